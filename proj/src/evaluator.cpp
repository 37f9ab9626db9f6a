#include "hsagnn/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace hsagnn {

namespace {

void check_scored(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
  for (double s : scores) {
    if (std::isnan(s)) throw DataError("score is NaN");
  }
  for (int l : labels) {
    if (l != 0 && l != 1) throw DataError("labels must be 0 or 1");
  }
}

std::vector<std::size_t> order_by(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels);
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw DataError("auroc needs both positive and negative labels");
  const auto idx = order_by(scores, false);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t m = i; m < j; ++m) {
      if (labels[idx[m]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  check_scored(scores, labels);
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0.0) throw DataError("aupr needs at least one positive label");
  const auto idx = order_by(scores, true);
  double tp = 0.0, fp = 0.0, ap = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double block_tp = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]] == 1) {
        block_tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++j;
    }
    tp += block_tp;
    if (block_tp > 0.0) ap += (block_tp / pos) * (tp / (tp + fp));
    i = j;
  }
  return ap;
}

Tensor LogisticModel::predict_proba(const Tensor& x) const {
  if (x.cols() != mean.size()) throw UsageError("classifier input width mismatch");
  Tensor out(x.rows(), classes, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < classes; ++c) {
      double z = bias[c];
      for (std::size_t d = 0; d < mean.size(); ++d) {
        z += (x(r, d) - mean[d]) / scale[d] * weights(d, c);
      }
      out(r, c) = z;
    }
    auto row = out.row_span(r);
    if (mode == LabelMode::Multiclass) {
      const double mx = *std::max_element(row.begin(), row.end());
      double z = 0.0;
      for (auto& v : row) z += (v = std::exp(v - mx));
      for (auto& v : row) v /= z;
    } else {
      for (auto& v : row) v = 1.0 / (1.0 + std::exp(-v));
    }
  }
  return out;
}

std::vector<std::vector<int>> LogisticModel::predict(const Tensor& x) const {
  const Tensor p = predict_proba(x);
  std::vector<std::vector<int>> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = p.row_span(r);
    if (mode == LabelMode::Multiclass) {
      out[r].push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    } else {
      for (std::size_t c = 0; c < classes; ++c) {
        if (row[c] >= 0.5) out[r].push_back(static_cast<int>(c));
      }
    }
  }
  return out;
}

LogisticModel fit_logistic(const Tensor& x, std::span<const std::vector<int>> labels,
                           std::size_t classes, LabelMode mode, const LogisticConfig& cfg) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0 || labels.size() != n) throw UsageError("fit_logistic: rows and labels mismatch");
  if (classes < 2) throw UsageError("fit_logistic needs at least 2 classes");
  Tensor y(n, classes, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    if (mode == LabelMode::Multiclass && labels[r].size() != 1) {
      throw DataError("multiclass rows need exactly one label");
    }
    for (int c : labels[r]) {
      if (c < 0 || static_cast<std::size_t>(c) >= classes) throw DataError("label out of range");
      y(r, static_cast<std::size_t>(c)) = 1.0;
    }
  }

  LogisticModel m;
  m.mode = mode;
  m.classes = classes;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += x(r, j);
    m.mean[j] = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t r = 0; r < n; ++r) v += (x(r, j) - m.mean[j]) * (x(r, j) - m.mean[j]);
    v /= static_cast<double>(n);
    if (v > 1e-24) m.scale[j] = std::sqrt(v);
  }
  Tensor z(n, d + 1, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) z(r, j) = (x(r, j) - m.mean[j]) / m.scale[j];
  }

  // Step size from the largest eigenvalue of zᵀz/n (power iteration).
  std::vector<double> v(d + 1, 1.0), w(d + 1);
  double lambda = 1.0;
  for (int it = 0; it < 100; ++it) {
    std::vector<double> zv(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j <= d; ++j) zv[r] += z(r, j) * v[j];
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j <= d; ++j) w[j] += z(r, j) * zv[r] / static_cast<double>(n);
    }
    double norm = 0.0;
    for (double e : w) norm += e * e;
    norm = std::sqrt(norm);
    if (norm == 0.0) break;
    lambda = norm;
    for (std::size_t j = 0; j <= d; ++j) v[j] = w[j] / norm;
  }
  const double curvature = mode == LabelMode::Multiclass ? 0.5 : 0.25;
  const double lr = 1.0 / (curvature * lambda + cfg.l2);

  Tensor theta(d + 1, classes, 0.0);  // last row is the bias
  Tensor grad(d + 1, classes);
  Tensor logits(n, classes);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    logits.fill(0.0);
    gemm_acc(z, theta, logits);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = logits.row_span(r);
      if (mode == LabelMode::Multiclass) {
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (auto& e : row) s += (e = std::exp(e - mx));
        for (auto& e : row) e /= s;
      } else {
        for (auto& e : row) e = 1.0 / (1.0 + std::exp(-e));
      }
      for (std::size_t c = 0; c < classes; ++c) row[c] = (row[c] - y(r, c)) / static_cast<double>(n);
    }
    grad.fill(0.0);
    gemm_tn_acc(z, logits, grad);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t c = 0; c < classes; ++c) grad(j, c) += cfg.l2 * theta(j, c);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  }
  m.weights = Tensor(d, classes);
  m.bias.assign(classes, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < classes; ++c) m.weights(j, c) = theta(j, c);
  }
  for (std::size_t c = 0; c < classes; ++c) m.bias[c] = theta(d, c);
  return m;
}

F1Scores f1_scores(std::span<const std::vector<int>> truth,
                   std::span<const std::vector<int>> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw UsageError("f1: truth and predictions differ in length");
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0);
  std::vector<bool> present(classes, false);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::set<int> t(truth[i].begin(), truth[i].end());
    std::set<int> p(predicted[i].begin(), predicted[i].end());
    for (int c : t) {
      present.at(static_cast<std::size_t>(c)) = true;
      (p.count(c) ? tp : fn)[static_cast<std::size_t>(c)] += 1.0;
    }
    for (int c : p) {
      if (!t.count(c)) fp.at(static_cast<std::size_t>(c)) += 1.0;
    }
  }
  double stp = 0.0, sfp = 0.0, sfn = 0.0, macro = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    stp += tp[c];
    sfp += fp[c];
    sfn += fn[c];
    if (!present[c]) continue;
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    macro += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
    ++counted;
  }
  F1Scores out;
  const double denom = 2.0 * stp + sfp + sfn;
  out.micro = denom > 0.0 ? 2.0 * stp / denom : 0.0;
  out.macro = counted ? macro / static_cast<double>(counted) : 0.0;
  return out;
}

NodeClassResult evaluate_node_classification(const Tensor& x,
                                             std::span<const std::vector<int>> labels,
                                             std::size_t classes, LabelMode mode,
                                             double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train fraction must lie in (0,1)");
  }
  const std::size_t n = x.rows();
  if (n < 2 || labels.size() != n) throw DataError("node classification needs >= 2 labelled rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  auto take = [&](std::size_t from, std::size_t to) {
    Tensor rows(to - from, x.cols());
    std::vector<std::vector<int>> lab;
    for (std::size_t i = from; i < to; ++i) {
      auto src = x.row_span(order[i]);
      std::copy(src.begin(), src.end(), rows.row_span(i - from).begin());
      lab.push_back(labels[order[i]]);
    }
    return std::make_pair(std::move(rows), std::move(lab));
  };
  auto [xtr, ytr] = take(0, n_train);
  auto [xte, yte] = take(n_train, n);

  NodeClassResult out;
  out.train_size = n_train;
  out.test_size = n - n_train;
  std::set<int> seen;
  for (const auto& l : ytr) seen.insert(l.begin(), l.end());
  std::set<int> unseen;
  for (const auto& l : yte) {
    for (int c : l) {
      if (!seen.count(c)) unseen.insert(c);
    }
  }
  out.unseen_classes.assign(unseen.begin(), unseen.end());
  const auto model = fit_logistic(xtr, ytr, classes, mode);
  out.f1 = f1_scores(yte, model.predict(xte), classes);
  return out;
}

double outsider_topk_accuracy(std::span<const std::vector<NodeId>> rankings,
                              std::span<const NodeId> true_outsiders, std::size_t k) {
  if (k < 1) throw UsageError("top-k needs k >= 1");
  if (rankings.size() != true_outsiders.size()) throw UsageError("rankings and outsiders differ in length");
  if (rankings.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const auto& r = rankings[i];
    const auto end = r.begin() + static_cast<long>(std::min(k, r.size()));
    if (std::find(r.begin(), end, true_outsiders[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

Projection project_2d(const Tensor& x, std::uint64_t seed) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n < 2 || d < 1) throw UsageError("project_2d needs at least 2 rows");
  Tensor c(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t r = 0; r < n; ++r) m += x(r, j);
    m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) c(r, j) = x(r, j) - m;
  }
  Tensor cov(d, d, 0.0);
  gemm_tn_acc(c, c, cov);
  for (auto& v : cov.data()) v /= static_cast<double>(n - 1);
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov(j, j);

  Projection out;
  out.coords = Tensor(n, 2, 0.0);
  out.variance.assign(2, 0.0);
  out.variance_ratio.assign(2, 0.0);
  if (!(trace > 1e-300)) {
    out.degenerate = true;
    return out;
  }

  // Orthogonal iteration on a 2-column block, then Rayleigh–Ritz.
  const std::size_t b = std::min<std::size_t>(2, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor basis(d, b);
  for (auto& v : basis.data()) v = normal(rng);

  auto column_norm = [&](const Tensor& q, std::size_t k) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += q(j, k) * q(j, k);
    return std::sqrt(norm);
  };
  auto orthonormalize = [&](Tensor& q) {
    for (std::size_t k = 0; k < b; ++k) {
      for (int pass = 0; pass < 2; ++pass) {
        const double before = column_norm(q, k);
        for (std::size_t p = 0; p < k; ++p) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += q(j, k) * q(j, p);
          for (std::size_t j = 0; j < d; ++j) q(j, k) -= dot * q(j, p);
        }
        const double norm = column_norm(q, k);
        if (!(norm > 1e-10 * before) || norm < 1e-150) {
          // Column lay in the span of earlier ones (rank-deficient covariance):
          // what is left is roundoff, so restart it randomly.
          for (std::size_t j = 0; j < d; ++j) q(j, k) = normal(rng);
          pass = -1;
          continue;
        }
        for (std::size_t j = 0; j < d; ++j) q(j, k) /= norm;
      }
    }
  };
  orthonormalize(basis);

  Tensor ritz(b, b);
  auto rayleigh = [&]() {
    Tensor cq(d, b, 0.0);
    gemm_acc(cov, basis, cq);
    ritz.fill(0.0);
    gemm_tn_acc(basis, cq, ritz);
    return cq;
  };
  double prev = -1.0;
  for (int it = 0; it < 20000; ++it) {
    Tensor next = rayleigh();
    double sum = 0.0;
    for (std::size_t k = 0; k < b; ++k) sum += ritz(k, k);
    if (it >= 10 && std::abs(sum - prev) <= 1e-15 * trace) break;
    prev = sum;
    basis = std::move(next);
    orthonormalize(basis);
  }
  rayleigh();

  // Eigen-decompose the small symmetric Ritz matrix.
  std::vector<double> vals(b);
  Tensor rot(b, b, 0.0);
  if (b == 1) {
    vals[0] = ritz(0, 0);
    rot(0, 0) = 1.0;
  } else {
    const double a = ritz(0, 0), e = ritz(1, 1), off = 0.5 * (ritz(0, 1) + ritz(1, 0));
    const double mid = 0.5 * (a + e), rad = std::hypot(0.5 * (a - e), off);
    vals[0] = mid + rad;
    vals[1] = mid - rad;
    const double theta = 0.5 * std::atan2(2.0 * off, a - e);
    rot(0, 0) = std::cos(theta);
    rot(1, 0) = std::sin(theta);
    rot(0, 1) = -std::sin(theta);
    rot(1, 1) = std::cos(theta);
  }
  Tensor comps(d, b, 0.0);
  gemm_acc(basis, rot, comps);
  for (std::size_t k = 0; k < b; ++k) {
    // Sign convention: largest-magnitude loading is positive.
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(comps(j, k)) > std::abs(comps(arg, k))) arg = j;
    }
    if (comps(arg, k) < 0.0) {
      for (std::size_t j = 0; j < d; ++j) comps(j, k) = -comps(j, k);
    }
    out.variance[k] = std::max(vals[k], 0.0);
    out.variance_ratio[k] = out.variance[k] / trace;
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < b; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += c(r, j) * comps(j, k);
      out.coords(r, k) = s;
    }
  }
  return out;
}

void MetricReport::set(const std::string& name, double value) {
  for (auto& [k, v] : metrics) {
    if (k == name) {
      v = value;
      return;
    }
  }
  metrics.emplace_back(name, value);
}

double MetricReport::get(const std::string& name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  throw UsageError("report '" + task + "' has no metric '" + name + "'");
}

MetricReport aggregate_reports(std::span<const MetricReport> runs) {
  if (runs.empty()) throw UsageError("aggregate_reports: no runs");
  MetricReport out;
  out.task = runs.front().task;
  out.metadata = runs.front().metadata;
  out.metadata["runs"] = std::to_string(runs.size());
  for (const auto& [name, value] : runs.front().metrics) {
    double sum = 0.0;
    for (const auto& r : runs) {
      const double v = r.get(name);
      out.per_run[name].push_back(v);
      sum += v;
    }
    out.set(name, sum / static_cast<double>(runs.size()));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

void write_report_text(std::ostream& out, std::span<const MetricReport> reports) {
  for (const auto& r : reports) {
    out << "task: " << r.task << '\n';
    for (const auto& [k, v] : r.metadata) out << "  meta." << k << ": " << v << '\n';
    for (const auto& [k, v] : r.metrics) out << "  " << k << ": " << fmt(v) << '\n';
    for (const auto& [k, vals] : r.per_run) {
      out << "  runs." << k << ":";
      for (double v : vals) out << ' ' << fmt(v);
      out << '\n';
    }
  }
}

void write_report_csv(std::ostream& out, std::span<const MetricReport> reports) {
  out << "run,task,metric,value,seed\n";
  for (const auto& r : reports) {
    auto it = r.metadata.find("seed");
    const std::string seed = it == r.metadata.end() ? "" : it->second;
    for (const auto& [k, v] : r.metrics) {
      out << "all," << r.task << ',' << k << ',' << fmt(v) << ',' << seed << '\n';
    }
    for (const auto& [k, vals] : r.per_run) {
      for (std::size_t i = 0; i < vals.size(); ++i) {
        out << i << ',' << r.task << ',' << k << ',' << fmt(vals[i]) << ',' << seed << '\n';
      }
    }
  }
}

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }
};

Frame frame_of(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  return {x0, x1, y0, y1};
}

void axes(std::ostringstream& s, const Frame& f, const std::string& title,
          const std::string& xl, const std::string& yl) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Frame::W << "\" height=\""
    << Frame::H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << Frame::W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  const double xa = Frame::L, xb = Frame::W - Frame::R, ya = Frame::T, yb = Frame::H - Frame::B;
  s << "<path d=\"M" << xa << ' ' << ya << " V" << yb << " H" << xb
    << "\" stroke=\"black\" fill=\"none\"/>\n";
  s << "<text x=\"" << xa << "\" y=\"" << yb + 16 << "\" text-anchor=\"middle\">" << fmt(f.x0) << "</text>\n";
  s << "<text x=\"" << xb << "\" y=\"" << yb + 16 << "\" text-anchor=\"middle\">" << fmt(f.x1) << "</text>\n";
  s << "<text x=\"" << xa - 6 << "\" y=\"" << yb << "\" text-anchor=\"end\">" << fmt(f.y0) << "</text>\n";
  s << "<text x=\"" << xa - 6 << "\" y=\"" << ya + 4 << "\" text-anchor=\"end\">" << fmt(f.y1) << "</text>\n";
  s << "<text x=\"" << (xa + xb) / 2 << "\" y=\"" << Frame::H - 12 << "\" text-anchor=\"middle\">"
    << escape(xl) << "</text>\n";
  s << "<text x=\"16\" y=\"" << (ya + yb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (ya + yb) / 2 << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string svg_line_chart(std::span<const Series> series, const std::string& title,
                           const std::string& x_label, const std::string& y_label) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) {
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (!std::isfinite(y0)) y0 = 0, y1 = 1;
  const Frame f = frame_of(x0, x1, y0, y1);
  std::ostringstream s;
  axes(s, f, title, x_label, y_label);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& sr = series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < std::min(sr.x.size(), sr.y.size()); ++k) {
      if (!std::isfinite(sr.y[k])) continue;
      s << fmt(f.px(sr.x[k])) << ',' << fmt(f.py(sr.y[k])) << ' ';
    }
    s << "\"/>\n";
    const double ly = Frame::T + 16.0 * static_cast<double>(i);
    s << "<rect x=\"" << Frame::W - Frame::R + 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"3\" fill=\""
      << color << "\"/>\n";
    s << "<text x=\"" << Frame::W - Frame::R + 30 << "\" y=\"" << ly + 5 << "\">" << escape(sr.name)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_scatter(const Tensor& points, std::span<const int> groups,
                        const std::string& title) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (std::size_t r = 0; r < points.rows(); ++r) {
    x0 = std::min(x0, points(r, 0)), x1 = std::max(x1, points(r, 0));
    y0 = std::min(y0, points(r, 1)), y1 = std::max(y1, points(r, 1));
  }
  if (points.rows() == 0) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Frame f = frame_of(x0, x1, y0, y1);
  std::ostringstream s;
  axes(s, f, title, "PC1", "PC2");
  for (std::size_t r = 0; r < points.rows(); ++r) {
    const int g = r < groups.size() ? groups[r] : 0;
    s << "<circle cx=\"" << fmt(f.px(points(r, 0))) << "\" cy=\"" << fmt(f.py(points(r, 1)))
      << "\" r=\"3\" fill=\"" << kPalette[static_cast<std::size_t>(std::max(g, 0)) % std::size(kPalette)]
      << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace hsagnn
