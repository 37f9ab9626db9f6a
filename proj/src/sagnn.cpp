#include "hsagnn/sagnn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace hsagnn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Standard: return "standard";
    case Variant::TypeI: return "type1";
    case Variant::TypeII: return "type2";
  }
  return "?";
}

std::string to_string(FeatureMode m) { return m == FeatureMode::Walk ? "walk" : "encoder"; }
std::string to_string(PoolMode m) { return m == PoolMode::Mean ? "mean" : "min"; }

Variant parse_variant(const std::string& s) {
  if (s == "standard") return Variant::Standard;
  if (s == "type1" || s == "typeI" || s == "TypeI") return Variant::TypeI;
  if (s == "type2" || s == "typeII" || s == "TypeII") return Variant::TypeII;
  throw UsageError("unknown variant '" + s + "' (standard|type1|type2)");
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "walk") return FeatureMode::Walk;
  if (s == "encoder") return FeatureMode::Encoder;
  throw UsageError("unknown feature mode '" + s + "' (walk|encoder)");
}

PoolMode parse_pool_mode(const std::string& s) {
  if (s == "mean") return PoolMode::Mean;
  if (s == "min") return PoolMode::Min;
  throw UsageError("unknown pool mode '" + s + "' (mean|min)");
}

void ModelConfig::validate() const {
  if (dim == 0 || heads == 0 || dim % heads != 0) {
    throw UsageError("model dim " + std::to_string(dim) + " must be divisible by heads " +
                     std::to_string(heads));
  }
  if (input_dim == 0 || feature_dim == 0) throw UsageError("model input/feature dims unset");
  if (feature_mode == FeatureMode::Walk && feature_dim != input_dim) {
    throw UsageError("walk mode requires feature_dim == input_dim");
  }
  if (!(recon_weight >= 0.0)) throw UsageError("reconstruction weight must be >= 0");
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("static_w", &static_w);
  for (std::size_t h = 0; h < query.size(); ++h) out.emplace_back("query." + std::to_string(h), &query[h]);
  for (std::size_t h = 0; h < key.size(); ++h) out.emplace_back("key." + std::to_string(h), &key[h]);
  for (std::size_t h = 0; h < value.size(); ++h) out.emplace_back("value." + std::to_string(h), &value[h]);
  out.emplace_back("out_w", &out_w);
  out.emplace_back("out_b", &out_b);
  if (!enc_w.empty()) {
    out.emplace_back("enc_w", &enc_w);
    out.emplace_back("enc_b", &enc_b);
  }
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

bool ModelParams::all_finite() const {
  for (const auto& [name, t] : named()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t rows, std::size_t cols) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(rows, cols);
    for (auto& v : t.data()) v = u(rng);
    return t;
  };
  ModelParams p;
  p.static_w = glorot(cfg.feature_dim, cfg.dim);
  for (std::size_t h = 0; h < cfg.heads; ++h) p.query.push_back(glorot(cfg.feature_dim, cfg.head_dim()));
  for (std::size_t h = 0; h < cfg.heads; ++h) p.key.push_back(glorot(cfg.feature_dim, cfg.head_dim()));
  for (std::size_t h = 0; h < cfg.heads; ++h) p.value.push_back(glorot(cfg.feature_dim, cfg.head_dim()));
  p.out_w = glorot(cfg.dim, 1);
  p.out_b = Tensor(1, 1, 0.0);
  if (cfg.feature_mode == FeatureMode::Encoder) {
    p.enc_w = glorot(cfg.feature_dim, cfg.input_dim);
    p.enc_b = Tensor(1, cfg.feature_dim, 0.0);
  }
  return p;
}

FeatureSource FeatureSource::from_table(Tensor table) {
  FeatureSource s;
  s.nodes_ = table.rows();
  s.width_ = table.cols();
  s.table_ = std::move(table);
  return s;
}

FeatureSource FeatureSource::from_adjacency(const Hypergraph& g) {
  FeatureSource s;
  s.nodes_ = g.node_count();
  s.width_ = g.node_count();
  s.adjacency_ = true;
  s.sparse_.reserve(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    s.sparse_.push_back(adjacency_row_sparse(g, static_cast<NodeId>(v)));
  }
  return s;
}

Tensor FeatureSource::rows(std::span<const NodeId> ids) const {
  Tensor out(ids.size(), width_, 0.0);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= nodes_) throw DataError("feature row for unknown node " + std::to_string(ids[r]));
    if (adjacency_) {
      for (auto [u, c] : sparse_[ids[r]]) out(r, u) = c;
    } else {
      auto src = table_.row_span(ids[r]);
      std::copy(src.begin(), src.end(), out.row_span(r).begin());
    }
  }
  return out;
}

ParamVars bind_vars(const ModelConfig& cfg, std::span<const ad::Var> vars) {
  ParamVars p;
  std::size_t i = 0;
  auto next = [&]() {
    if (i >= vars.size()) throw UsageError("bind_vars: too few parameter vars");
    return vars[i++];
  };
  p.static_w = next();
  for (std::size_t h = 0; h < cfg.heads; ++h) p.query.push_back(next());
  for (std::size_t h = 0; h < cfg.heads; ++h) p.key.push_back(next());
  for (std::size_t h = 0; h < cfg.heads; ++h) p.value.push_back(next());
  p.out_w = next();
  p.out_b = next();
  if (cfg.feature_mode == FeatureMode::Encoder) {
    p.enc_w = next();
    p.enc_b = next();
  }
  if (i != vars.size()) throw UsageError("bind_vars: unexpected extra parameter vars");
  p.all.assign(vars.begin(), vars.end());
  return p;
}

ParamVars bind_params(ad::Tape& tape, const ModelParams& params, bool trainable) {
  std::vector<ad::Var> vars;
  for (const auto& [name, t] : params.named()) {
    vars.push_back(trainable ? tape.parameter(*t) : tape.constant(*t));
  }
  ModelConfig shape;
  shape.heads = params.query.size();
  shape.feature_mode = params.enc_w.empty() ? FeatureMode::Walk : FeatureMode::Encoder;
  return bind_vars(shape, vars);
}

std::size_t BatchFeatures::row_of(NodeId v) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  if (it == nodes.end() || *it != v) throw UsageError("node not present in batch features");
  return static_cast<std::size_t>(it - nodes.begin());
}

BatchFeatures build_batch_features(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                                   const FeatureSource& source, std::span<const NodeId> nodes) {
  if (source.width() != cfg.input_dim) {
    throw UsageError("feature width " + std::to_string(source.width()) +
                     " does not match model input_dim " + std::to_string(cfg.input_dim));
  }
  BatchFeatures bf;
  bf.nodes.assign(nodes.begin(), nodes.end());
  std::sort(bf.nodes.begin(), bf.nodes.end());
  bf.nodes.erase(std::unique(bf.nodes.begin(), bf.nodes.end()), bf.nodes.end());
  ad::Var raw = tape.constant(source.rows(bf.nodes));
  if (cfg.feature_mode == FeatureMode::Walk) {
    bf.x = raw;
    return bf;
  }
  bf.x = ad::tanh(ad::bias_add(ad::matmul_nt(raw, p.enc_w), p.enc_b));
  ad::Var recon = ad::tanh(ad::matmul(bf.x, p.enc_w));
  bf.recon_loss = ad::mean_reduce(ad::hadamard_square(ad::sub(recon, raw)));
  return bf;
}

namespace {

BucketGraph bucket_from_rows(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                             ad::Var x, std::size_t group, PoolMode pool) {
  if (group < cfg.min_tuple_size()) {
    throw UsageError("tuple size " + std::to_string(group) + " is below the minimum " +
                     std::to_string(cfg.min_tuple_size()) + " for variant " +
                     to_string(cfg.variant));
  }
  const std::size_t rows = x.rows();
  BucketGraph out;
  out.group = group;
  out.features = x;
  out.static_emb = ad::tanh(ad::matmul(x, p.static_w));

  std::vector<std::uint8_t> mask;
  if (cfg.variant == Variant::Standard) {
    mask.assign(rows * group, 0);
    for (std::size_t r = 0; r < rows; ++r) mask[r * group + r % group] = 1;
  }
  std::vector<ad::Var> heads;
  for (std::size_t h = 0; h < p.query.size(); ++h) {
    ad::Var q = ad::matmul(x, p.query[h]);
    ad::Var k = ad::matmul(x, p.key[h]);
    ad::Var v = ad::matmul(x, p.value[h]);
    ad::Var alpha = ad::masked_softmax(ad::group_matmul_nt(q, k, group), mask);
    out.attention.push_back(alpha);
    heads.push_back(ad::group_matmul(alpha, v, group));
  }
  out.dynamic_emb = ad::tanh(ad::concat_cols(heads));

  ad::Var scored = cfg.variant == Variant::TypeII
                       ? out.dynamic_emb
                       : ad::hadamard_square(ad::sub(out.dynamic_emb, out.static_emb));
  out.node_prob = ad::sigmoid(ad::bias_add(ad::matmul(scored, p.out_w), p.out_b));
  out.tuple_prob = pool == PoolMode::Mean ? ad::group_mean(out.node_prob, group)
                                          : ad::group_min(out.node_prob, group);
  (void)tape;
  return out;
}

}  // namespace

BucketGraph build_bucket(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                         const BatchFeatures& feats,
                         std::span<const std::vector<NodeId>> tuples, PoolMode pool) {
  if (tuples.empty()) throw UsageError("build_bucket: no tuples");
  const std::size_t group = tuples.front().size();
  std::vector<std::size_t> index;
  index.reserve(tuples.size() * group);
  for (const auto& t : tuples) {
    if (t.size() != group) throw UsageError("build_bucket: mixed tuple sizes");
    for (NodeId v : t) index.push_back(feats.row_of(v));
  }
  return bucket_from_rows(tape, cfg, p, ad::gather_rows(feats.x, index), group, pool);
}

namespace {

ForwardOutput to_output(const BucketGraph& b) {
  ForwardOutput out;
  out.static_emb = b.static_emb.value();
  out.dynamic_emb = b.dynamic_emb.value();
  auto np = b.node_prob.value().data();
  out.per_node_prob.assign(np.begin(), np.end());
  out.tuple_prob = b.tuple_prob.value()[0];
  return out;
}

}  // namespace

ForwardOutput score_features(const ModelConfig& cfg, const ModelParams& params,
                             const Tensor& x_tuple) {
  ad::Tape tape;
  ParamVars p = bind_params(tape, params, false);
  auto b = bucket_from_rows(tape, cfg, p, tape.constant(x_tuple), x_tuple.rows(), cfg.pool);
  return to_output(b);
}

Tensor dynamic_embed(const ModelConfig& cfg, const ModelParams& params, const Tensor& x_tuple) {
  return score_features(cfg, params, x_tuple).dynamic_emb;
}

ForwardOutput score_tuple(const ModelConfig& cfg, const ModelParams& params,
                          const FeatureSource& source, std::span<const NodeId> tuple) {
  ad::Tape tape;
  ParamVars p = bind_params(tape, params, false);
  auto feats = build_batch_features(tape, cfg, p, source, tuple);
  std::vector<std::vector<NodeId>> one{std::vector<NodeId>(tuple.begin(), tuple.end())};
  return to_output(build_bucket(tape, cfg, p, feats, one, cfg.pool));
}

namespace {

// Runs `fn(bucket_graph, member_indices)` for chunks of same-size tuples.
template <class Fn>
void for_each_bucket(const ModelConfig& cfg, const ModelParams& params,
                     const FeatureSource& source, std::span<const std::vector<NodeId>> tuples,
                     std::size_t batch_size, Fn&& fn) {
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < tuples.size(); ++i) by_size[tuples[i].size()].push_back(i);
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (const auto& [size, indices] : by_size) {
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
      const std::size_t end = std::min(indices.size(), start + batch_size);
      std::vector<std::vector<NodeId>> chunk;
      std::vector<NodeId> nodes;
      for (std::size_t i = start; i < end; ++i) {
        chunk.push_back(tuples[indices[i]]);
        nodes.insert(nodes.end(), chunk.back().begin(), chunk.back().end());
      }
      ad::Tape tape;
      ParamVars p = bind_params(tape, params, false);
      auto feats = build_batch_features(tape, cfg, p, source, nodes);
      auto graph = build_bucket(tape, cfg, p, feats, chunk, cfg.pool);
      fn(graph, std::span<const std::size_t>(indices).subspan(start, end - start));
    }
  }
}

}  // namespace

std::vector<double> score_tuples(const ModelConfig& cfg, const ModelParams& params,
                                 const FeatureSource& source,
                                 std::span<const std::vector<NodeId>> tuples,
                                 std::size_t batch_size) {
  std::vector<double> out(tuples.size(), 0.0);
  for_each_bucket(cfg, params, source, tuples, batch_size,
                  [&](const BucketGraph& g, std::span<const std::size_t> idx) {
                    const auto& tp = g.tuple_prob.value();
                    for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = tp[i];
                  });
  return out;
}

std::vector<std::vector<double>> score_nodes(const ModelConfig& cfg, const ModelParams& params,
                                             const FeatureSource& source,
                                             std::span<const std::vector<NodeId>> tuples,
                                             std::size_t batch_size) {
  std::vector<std::vector<double>> out(tuples.size());
  for_each_bucket(cfg, params, source, tuples, batch_size,
                  [&](const BucketGraph& g, std::span<const std::size_t> idx) {
                    const auto& np = g.node_prob.value();
                    for (std::size_t i = 0; i < idx.size(); ++i) {
                      auto& dst = out[idx[i]];
                      dst.assign(np.data().begin() + static_cast<long>(i * g.group),
                                 np.data().begin() + static_cast<long>((i + 1) * g.group));
                    }
                  });
  return out;
}

LossGraph build_loss(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                     const FeatureSource& source, std::span<const TupleSample> samples,
                     std::span<const NodeTarget> node_targets, double node_weight) {
  if (samples.empty()) throw UsageError("build_loss: empty batch");
  std::vector<NodeId> nodes;
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    nodes.insert(nodes.end(), samples[i].members.begin(), samples[i].members.end());
    by_size[samples[i].members.size()].push_back(i);
  }
  auto feats = build_batch_features(tape, cfg, p, source, nodes);

  std::map<std::size_t, const NodeTarget*> targets;
  for (const auto& t : node_targets) targets[t.sample] = &t;

  LossGraph out;
  out.tuple_prob.assign(samples.size(), 0.0);
  const double n_total = static_cast<double>(samples.size());
  const double n_targets = static_cast<double>(node_targets.size());
  std::optional<ad::Var> bce;
  std::optional<ad::Var> node_term;
  for (const auto& [size, indices] : by_size) {
    std::vector<std::vector<NodeId>> tuples;
    std::vector<double> labels;
    for (auto i : indices) {
      tuples.push_back(samples[i].members);
      labels.push_back(static_cast<double>(samples[i].label));
    }
    auto graph = build_bucket(tape, cfg, p, feats, tuples, cfg.pool);
    const auto& tp = graph.tuple_prob.value();
    for (std::size_t j = 0; j < indices.size(); ++j) out.tuple_prob[indices[j]] = tp[j];
    ad::Var term = ad::scale(ad::bce_loss(graph.tuple_prob, labels),
                             static_cast<double>(indices.size()) / n_total);
    bce = bce ? ad::add(*bce, term) : term;

    if (node_weight > 0.0 && !targets.empty()) {
      std::vector<std::size_t> rows;
      std::vector<double> node_labels;
      std::size_t hits = 0;
      for (std::size_t j = 0; j < indices.size(); ++j) {
        auto it = targets.find(indices[j]);
        if (it == targets.end()) continue;
        if (it->second->labels.size() != size) throw UsageError("node target size mismatch");
        ++hits;
        for (std::size_t m = 0; m < size; ++m) {
          rows.push_back(j * size + m);
          node_labels.push_back(it->second->labels[m]);
        }
      }
      if (hits > 0) {
        ad::Var nt = ad::scale(ad::bce_loss(ad::gather_rows(graph.node_prob, rows), node_labels),
                               node_weight * static_cast<double>(hits) / n_targets);
        node_term = node_term ? ad::add(*node_term, nt) : nt;
      }
    }
  }
  out.bce = *bce;
  out.total = out.bce;
  if (feats.recon_loss && cfg.recon_weight > 0.0) {
    out.recon = *feats.recon_loss;
    out.total = ad::add(out.total, ad::scale(*feats.recon_loss, cfg.recon_weight));
  }
  if (node_term) out.total = ad::add(out.total, *node_term);
  return out;
}

double total_loss(const ModelConfig& cfg, const ModelParams& params, const FeatureSource& source,
                  std::span<const TupleSample> samples) {
  ad::Tape tape;
  ParamVars p = bind_params(tape, params, false);
  return build_loss(tape, cfg, p, source, samples).total.value().item();
}

EncodedFeature encode_features(const ModelParams& params, std::span<const double> adjacency) {
  if (params.enc_w.empty()) throw UsageError("encode_features: model has no encoder");
  if (adjacency.size() != params.enc_w.cols()) {
    throw UsageError("encode_features: adjacency row length " + std::to_string(adjacency.size()) +
                     " does not match encoder input " + std::to_string(params.enc_w.cols()));
  }
  const std::size_t f = params.enc_w.rows(), n = params.enc_w.cols();
  EncodedFeature out;
  out.x.assign(f, 0.0);
  for (std::size_t i = 0; i < f; ++i) {
    double s = params.enc_b[i];
    for (std::size_t j = 0; j < n; ++j) s += params.enc_w(i, j) * adjacency[j];
    out.x[i] = std::tanh(s);
  }
  out.reconstruction.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < f; ++i) s += params.enc_w(i, j) * out.x[i];
    out.reconstruction[j] = std::tanh(s);
    const double d = out.reconstruction[j] - adjacency[j];
    out.recon_error += d * d;
  }
  out.recon_error /= static_cast<double>(n);
  return out;
}

std::vector<double> static_embed(const ModelParams& params, std::span<const double> x) {
  const Tensor& w = params.static_w;
  if (x.size() != w.rows()) throw UsageError("static_embed: feature length mismatch");
  std::vector<double> s(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) s[j] += x[i] * w(i, j);
  }
  for (auto& v : s) v = std::tanh(v);
  return s;
}

namespace {

std::vector<double> feature_of(const ModelConfig& cfg, const ModelParams& params,
                               const FeatureSource& source, NodeId node) {
  const NodeId ids[1] = {node};
  Tensor row = source.rows(ids);
  if (cfg.feature_mode == FeatureMode::Encoder) {
    return encode_features(params, row.row_span(0)).x;
  }
  auto r = row.row_span(0);
  return {r.begin(), r.end()};
}

}  // namespace

std::vector<double> node_repr_for_classification(const ModelConfig& cfg,
                                                 const ModelParams& params,
                                                 const FeatureSource& source, NodeId node) {
  const auto x = feature_of(cfg, params, source, node);
  if (cfg.variant != Variant::TypeII) return static_embed(params, x);
  std::vector<double> out;
  for (const auto& w : params.value) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.rows(); ++i) s += x[i] * w(i, j);
      out.push_back(s);
    }
  }
  return out;
}

Tensor node_representations(const ModelConfig& cfg, const ModelParams& params,
                            const FeatureSource& source) {
  Tensor out(source.node_count(), cfg.dim);
  for (std::size_t v = 0; v < source.node_count(); ++v) {
    auto r = node_repr_for_classification(cfg, params, source, static_cast<NodeId>(v));
    std::copy(r.begin(), r.end(), out.row_span(v).begin());
  }
  return out;
}

}  // namespace hsagnn
