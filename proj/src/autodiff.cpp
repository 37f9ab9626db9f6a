#include "hsagnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsagnn/errors.hpp"

namespace hsagnn::ad {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::parameter(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::push(Tensor value, bool requires_grad, Backward backward) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad,
                        requires_grad ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty() && !node.value.empty()) {
    node.grad = Tensor(node.value.rows(), node.value.cols(), 0.0);
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw UsageError("backward: loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw UsageError("backward: loss must be a scalar, got " + value(loss.id()).shape_string());
  }
  if (!requires_grad(loss.id())) return;
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw UsageError("ops on vars from different tapes");
  }
  return *a.tape();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw UsageError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_grouped(const Tensor& a, std::size_t group, const char* op) {
  if (group == 0 || a.rows() % group != 0) {
    throw UsageError(std::string(op) + ": rows " + std::to_string(a.rows()) +
                     " not divisible by group " + std::to_string(group));
  }
}

void accumulate(Tape& t, std::size_t id, const Tensor& g) {
  if (!t.requires_grad(id)) return;
  auto& buf = t.grad_buffer(id);
  auto dst = buf.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw UsageError("matmul: shape mismatch " + av.shape_string() + " · " + bv.shape_string());
  }
  Tensor out(av.rows(), bv.cols());
  gemm_acc(av, bv, out);
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.requires_grad(ia)) gemm_nt_acc(g, tp.value(ib), tp.grad_buffer(ia));
                  if (tp.requires_grad(ib)) gemm_tn_acc(tp.value(ia), g, tp.grad_buffer(ib));
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw UsageError("matmul_nt: shape mismatch " + av.shape_string() + " · " +
                     bv.shape_string() + "ᵀ");
  }
  Tensor out(av.rows(), bv.rows());
  gemm_nt_acc(av, bv, out);
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  // out = a bᵀ: da = g b, db = gᵀ a
                  if (tp.requires_grad(ia)) gemm_acc(g, tp.value(ib), tp.grad_buffer(ia));
                  if (tp.requires_grad(ib)) gemm_tn_acc(g, tp.value(ia), tp.grad_buffer(ib));
                });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  accumulate(tp, ia, g);
                  accumulate(tp, ib, g);
                });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  accumulate(tp, ia, g);
                  if (tp.requires_grad(ib)) {
                    auto dst = tp.grad_buffer(ib).data();
                    auto src = g.data();
                    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
                  }
                });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(), [ia, factor](Tape& tp, std::size_t self) {
    auto dst = tp.grad_buffer(ia).data();
    auto src = tp.grad(self).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * src[i];
  });
}

Var bias_add(Var a, Var bias) {
  Tape& t = same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw UsageError("bias_add: bias " + bv.shape_string() + " does not broadcast over " +
                     av.shape_string());
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  }
  const auto ia = a.id(), ib = bias.id();
  return t.push(std::move(out), a.requires_grad() || bias.requires_grad(),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  accumulate(tp, ia, g);
                  if (tp.requires_grad(ib)) {
                    Tensor& gb = tp.grad_buffer(ib);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
                    }
                  }
                });
}

Var tanh(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.data()) v = std::tanh(v);
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    auto y = tp.value(self).data();
    auto g = tp.grad(self).data();
    auto dst = tp.grad_buffer(ia).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.data()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    auto y = tp.value(self).data();
    auto g = tp.grad(self).data();
    auto dst = tp.grad_buffer(ia).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var hadamard_square(Var a) {
  Tape& t = *a.tape();
  Tensor out = a.value();
  for (auto& v : out.data()) v = v * v;
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    auto x = tp.value(ia).data();
    auto g = tp.grad(self).data();
    auto dst = tp.grad_buffer(ia).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += 2.0 * x[i] * g[i];
  });
}

Var sum_reduce(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id();
  return t.push(Tensor::scalar(s), a.requires_grad(), [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (auto& d : tp.grad_buffer(ia).data()) d += g;
  });
}

Var mean_reduce(Var a) {
  const auto n = a.value().size();
  if (n == 0) throw UsageError("mean_reduce: empty tensor");
  return scale(sum_reduce(a), 1.0 / static_cast<double>(n));
}

Var masked_softmax(Var logits, std::span<const std::uint8_t> mask) {
  Tape& t = *logits.tape();
  const Tensor& x = logits.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  const bool broadcast = mask.size() == cols && rows != 1;
  if (!mask.empty() && !broadcast && mask.size() != rows * cols) {
    throw UsageError("masked_softmax: mask length " + std::to_string(mask.size()) +
                     " does not fit logits " + x.shape_string());
  }
  auto masked = [&](std::size_t r, std::size_t c) -> bool {
    if (mask.empty()) return false;
    return broadcast ? mask[c] != 0 : mask[r * cols + c] != 0;
  };
  Tensor out(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    std::size_t open = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (masked(r, c)) continue;
      mx = std::max(mx, x(r, c));
      ++open;
    }
    // Non-finite logits propagate as NaN so callers can detect divergence.
    if (!std::isfinite(mx)) mx = 0.0;
    if (open == 0) {
      throw UsageError("masked_softmax: every entry of row " + std::to_string(r) + " is masked");
    }
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (masked(r, c)) continue;
      out(r, c) = std::exp(x(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= z;
  }
  const auto ia = logits.id();
  // Masked entries have y = 0, so the Jacobian rows/cols vanish there.
  return t.push(std::move(out), logits.requires_grad(), [ia](Tape& tp, std::size_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& dst = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) dst(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var bce_loss(Var p, std::span<const double> labels) {
  Tape& t = *p.tape();
  const Tensor& pv = p.value();
  if (pv.size() != labels.size() || labels.empty()) {
    throw UsageError("bce_loss: " + std::to_string(labels.size()) + " labels for " +
                     pv.shape_string() + " probabilities");
  }
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  const auto n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double q = std::clamp(pv[i], kLo, kHi);
    loss -= labels[i] * std::log(q) + (1.0 - labels[i]) * std::log(1.0 - q);
  }
  const auto ia = p.id();
  std::vector<double> y(labels.begin(), labels.end());
  return t.push(Tensor::scalar(loss / n), p.requires_grad(),
                [ia, y = std::move(y), n](Tape& tp, std::size_t self) {
                  const double g = tp.grad(self)[0];
                  const Tensor& pv = tp.value(ia);
                  auto dst = tp.grad_buffer(ia).data();
                  for (std::size_t i = 0; i < y.size(); ++i) {
                    const double q = pv[i];
                    if (q < kLo || q > kHi) continue;
                    dst[i] += g * (-(y[i] / q) + (1.0 - y[i]) / (1.0 - q)) / n;
                  }
                });
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  Tensor out(index.size(), av.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= av.rows()) {
      throw UsageError("gather_rows: index " + std::to_string(index[r]) + " out of range " +
                       av.shape_string());
    }
    auto src = av.row_span(index[r]);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  const auto ia = a.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return t.push(std::move(out), a.requires_grad(),
                [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  Tensor& dst = tp.grad_buffer(ia);
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    auto gr = g.row_span(r);
                    auto dr = dst.row_span(idx[r]);
                    for (std::size_t c = 0; c < gr.size(); ++c) dr[c] += gr[c];
                  }
                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool rg = false;
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw UsageError("concat_cols: vars from different tapes");
    if (p.rows() != rows) throw UsageError("concat_cols: row count mismatch");
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Tensor out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = pv.row_span(r);
      std::copy(src.begin(), src.end(), out.row_span(r).begin() + offsets[k]);
    }
  }
  return t.push(std::move(out), rg, [ids, offsets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& dst = tp.grad_buffer(ids[k]);
      for (std::size_t r = 0; r < dst.rows(); ++r) {
        for (std::size_t c = 0; c < dst.cols(); ++c) dst(r, c) += g(r, offsets[k] + c);
      }
    }
  });
}

Var group_matmul_nt(Var q, Var k, std::size_t group) {
  Tape& t = same_tape(q, k);
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  require_same_shape(qv, kv, "group_matmul_nt");
  require_grouped(qv, group, "group_matmul_nt");
  const std::size_t rows = qv.rows(), d = qv.cols();
  Tensor out(rows, group);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = (r / group) * group;
    auto qr = qv.row_span(r);
    for (std::size_t j = 0; j < group; ++j) {
      auto kr = kv.row_span(base + j);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += qr[c] * kr[c];
      out(r, j) = s;
    }
  }
  const auto iq = q.id(), ik = k.id();
  return t.push(std::move(out), q.requires_grad() || k.requires_grad(),
                [iq, ik, group](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  const Tensor& qv = tp.value(iq);
                  const Tensor& kv = tp.value(ik);
                  const bool gq = tp.requires_grad(iq), gk = tp.requires_grad(ik);
                  Tensor* dq = gq ? &tp.grad_buffer(iq) : nullptr;
                  Tensor* dk = gk ? &tp.grad_buffer(ik) : nullptr;
                  const std::size_t d = qv.cols();
                  for (std::size_t r = 0; r < qv.rows(); ++r) {
                    const std::size_t base = (r / group) * group;
                    for (std::size_t j = 0; j < group; ++j) {
                      const double gv = g(r, j);
                      if (gv == 0.0) continue;
                      for (std::size_t c = 0; c < d; ++c) {
                        if (dq) (*dq)(r, c) += gv * kv(base + j, c);
                        if (dk) (*dk)(base + j, c) += gv * qv(r, c);
                      }
                    }
                  }
                });
}

Var group_matmul(Var alpha, Var v, std::size_t group) {
  Tape& t = same_tape(alpha, v);
  const Tensor& av = alpha.value();
  const Tensor& vv = v.value();
  if (av.cols() != group || av.rows() != vv.rows()) {
    throw UsageError("group_matmul: alpha " + av.shape_string() + " incompatible with values " +
                     vv.shape_string());
  }
  require_grouped(vv, group, "group_matmul");
  const std::size_t rows = vv.rows(), d = vv.cols();
  Tensor out(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = (r / group) * group;
    auto orow = out.row_span(r);
    for (std::size_t j = 0; j < group; ++j) {
      const double a = av(r, j);
      if (a == 0.0) continue;
      auto vr = vv.row_span(base + j);
      for (std::size_t c = 0; c < d; ++c) orow[c] += a * vr[c];
    }
  }
  const auto ia = alpha.id(), iv = v.id();
  return t.push(std::move(out), alpha.requires_grad() || v.requires_grad(),
                [ia, iv, group](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  const Tensor& av = tp.value(ia);
                  const Tensor& vv = tp.value(iv);
                  Tensor* da = tp.requires_grad(ia) ? &tp.grad_buffer(ia) : nullptr;
                  Tensor* dv = tp.requires_grad(iv) ? &tp.grad_buffer(iv) : nullptr;
                  const std::size_t d = vv.cols();
                  for (std::size_t r = 0; r < vv.rows(); ++r) {
                    const std::size_t base = (r / group) * group;
                    for (std::size_t j = 0; j < group; ++j) {
                      double s = 0.0;
                      const double a = av(r, j);
                      for (std::size_t c = 0; c < d; ++c) {
                        s += g(r, c) * vv(base + j, c);
                        if (dv) (*dv)(base + j, c) += a * g(r, c);
                      }
                      if (da) (*da)(r, j) += s;
                    }
                  }
                });
}

Var group_mean(Var a, std::size_t group) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (av.cols() != 1) throw UsageError("group_mean: expects a column vector");
  require_grouped(av, group, "group_mean");
  const std::size_t blocks = av.rows() / group;
  Tensor out(blocks, 1);
  for (std::size_t b = 0; b < blocks; ++b) {
    double s = 0.0;
    for (std::size_t j = 0; j < group; ++j) s += av[b * group + j];
    out[b] = s / static_cast<double>(group);
  }
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(), [ia, group](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    auto dst = tp.grad_buffer(ia).data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i] += g[i / group] / static_cast<double>(group);
    }
  });
}

Var group_min(Var a, std::size_t group) {
  Tape& t = *a.tape();
  const Tensor& av = a.value();
  if (av.cols() != 1) throw UsageError("group_min: expects a column vector");
  require_grouped(av, group, "group_min");
  const std::size_t blocks = av.rows() / group;
  Tensor out(blocks, 1);
  std::vector<std::size_t> arg(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t best = b * group;
    for (std::size_t j = 1; j < group; ++j) {
      if (av[b * group + j] < av[best]) best = b * group + j;
    }
    arg[b] = best;
    out[b] = av[best];
  }
  const auto ia = a.id();
  return t.push(std::move(out), a.requires_grad(),
                [ia, arg = std::move(arg)](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  auto dst = tp.grad_buffer(ia).data();
                  for (std::size_t b = 0; b < arg.size(); ++b) dst[arg[b]] += g[b];
                });
}

GradCheckResult finite_diff_check_detailed(const ScalarFn& f, std::vector<Tensor> params,
                                           double eps) {
  if (!(eps > 0.0)) throw UsageError("finite_diff_check: eps must be positive");
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    Var loss = f(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) {
      analytic.push_back(tape.has_grad(v.id()) ? v.grad()
                                               : Tensor(v.rows(), v.cols(), 0.0));
    }
  }
  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.constant(p));
    return f(tape, vars).value().item();
  };

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t i = 0; i < params[pi].size(); ++i) {
      const double orig = params[pi][i];
      params[pi][i] = orig + eps;
      const double up = evaluate();
      params[pi][i] = orig - eps;
      const double down = evaluate();
      params[pi][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result = GradCheckResult{std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity(),
                                 pi, i, a, numeric};
      }
    }
  }
  return result;
}

double finite_diff_check(const ScalarFn& f, std::vector<Tensor> params, double eps) {
  return finite_diff_check_detailed(f, std::move(params), eps).max_rel_error;
}

}  // namespace hsagnn::ad
