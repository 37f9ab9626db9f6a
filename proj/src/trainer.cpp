#include "hsagnn/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "hsagnn/evaluator.hpp"

namespace hsagnn {

void TrainConfig::validate() const {
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (batch_size < 1) throw UsageError("batch size must be >= 1");
  if (neg_ratio < 1) throw UsageError("negative ratio must be >= 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw UsageError("validation fraction must lie in [0,1)");
  }
  if (!(outsider_ce_weight >= 0.0)) throw UsageError("outsider CE weight must be >= 0");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return splitmix(splitmix(seed ^ splitmix(stream)) + index);
}

enum Stream : std::uint64_t { kValidation = 1, kValNegatives, kNegatives, kShuffle, kOutsiders };

struct Adam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t t = 0;
  std::vector<Tensor> m, v;

  void step(std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (m.empty()) {
      for (auto* p : params) {
        m.emplace_back(p->rows(), p->cols(), 0.0);
        v.emplace_back(p->rows(), p->cols(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads[i]) continue;
      auto p = params[i]->data();
      const auto& g = grads[i]->data();
      auto mi = m[i].data();
      auto vi = v[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        mi[j] = b1 * mi[j] + (1.0 - b1) * g[j];
        vi[j] = b2 * vi[j] + (1.0 - b2) * g[j] * g[j];
        p[j] -= lr * (mi[j] / c1) / (std::sqrt(vi[j] / c2) + eps);
      }
    }
  }
};

struct Validation {
  std::vector<std::vector<NodeId>> tuples;
  std::vector<int> labels;
  std::vector<TupleKind> kinds;
};

void score_validation(const Validation& val, const ModelConfig& mc, const ModelParams& params,
                      const FeatureSource& features, EpochRecord& rec) {
  rec.val_auc = rec.val_aupr = std::numeric_limits<double>::quiet_NaN();
  if (val.tuples.empty()) return;
  const auto scores = score_tuples(mc, params, features, val.tuples);
  rec.val_auc = auroc(scores, val.labels);
  rec.val_aupr = aupr(scores, val.labels);
  const bool mixed = std::count(val.kinds.begin(), val.kinds.end(), TupleKind::Hyper) > 0 &&
                     std::count(val.kinds.begin(), val.kinds.end(), TupleKind::Pairwise) > 0;
  if (!mixed) return;
  for (auto kind : {TupleKind::Hyper, TupleKind::Pairwise}) {
    std::vector<double> s;
    std::vector<int> l;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (val.kinds[i] == kind) {
        s.push_back(scores[i]);
        l.push_back(val.labels[i]);
      }
    }
    const bool both = std::count(l.begin(), l.end(), 1) > 0 && std::count(l.begin(), l.end(), 0) > 0;
    if (!both) continue;
    (kind == TupleKind::Hyper ? rec.hyper_val_auc : rec.edge_val_auc) = auroc(s, l);
  }
}

}  // namespace

std::vector<TupleSample> epoch_negatives(const Hypergraph& reference,
                                         std::span<const TupleSample> positives, int ratio,
                                         std::uint64_t seed, std::size_t epoch) {
  return sample_negatives(reference, positives, ratio, derive(seed, kNegatives, epoch));
}

TrainResult train_on(std::span<const TupleSample> positives, const Hypergraph& reference,
                     const FeatureSource& features, const ModelConfig& model,
                     const TrainConfig& cfg, const ModelParams* init,
                     const EpochCallback& on_epoch) {
  cfg.validate();
  ModelConfig mc = model;
  mc.pool = cfg.pool;
  mc.validate();
  if (positives.empty()) throw DataError("empty training set");
  if (features.node_count() != reference.node_count()) {
    throw DataError("features cover " + std::to_string(features.node_count()) +
                    " nodes but the graph has " + std::to_string(reference.node_count()));
  }

  // Hold out a validation slice of the positives.
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 split_rng(derive(cfg.seed, kValidation));
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_val = static_cast<std::size_t>(
      std::llround(cfg.validation_fraction * static_cast<double>(positives.size())));
  if (n_val >= positives.size()) n_val = positives.size() - 1;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<TupleSample> train_pos, val_pos;
  for (auto i : train_idx) train_pos.push_back(positives[i]);
  for (auto i : val_idx) val_pos.push_back(positives[i]);

  Validation val;
  if (!val_pos.empty()) {
    auto val_neg = sample_negatives(reference, val_pos, cfg.neg_ratio, derive(cfg.seed, kValNegatives));
    for (const auto* set : {&val_pos, &val_neg}) {
      for (const auto& s : *set) {
        val.tuples.push_back(s.members);
        val.labels.push_back(s.label);
        val.kinds.push_back(s.kind);
      }
    }
  }

  std::vector<TupleSample> hyper_pos;
  if (cfg.outsider_ce_weight > 0.0) {
    for (const auto& p : train_pos) {
      if (p.members.size() >= 3) hyper_pos.push_back(p);
    }
  }

  TrainResult result;
  result.params = init ? *init : init_params(mc, cfg.seed);
  Adam adam;
  adam.lr = cfg.learning_rate;
  auto named = result.params.named();
  std::vector<Tensor*> param_ptrs;
  for (auto& [name, t] : named) param_ptrs.push_back(t);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<TupleSample> samples = train_pos;
    auto negs = epoch_negatives(reference, train_pos, cfg.neg_ratio, cfg.seed, epoch);
    samples.insert(samples.end(), negs.begin(), negs.end());
    // Per-node labels for generated outsider tuples: 1 for members, 0 for the outsider.
    std::vector<std::vector<double>> node_labels(samples.size());
    if (!hyper_pos.empty()) {
      auto outsiders = generate_outsider_triplets(reference, hyper_pos, hyper_pos.size(),
                                                  derive(cfg.seed, kOutsiders, epoch));
      for (auto& o : outsiders) {
        std::vector<double> lab(o.members.size(), 1.0);
        lab[o.outsider_position] = 0.0;
        samples.push_back(TupleSample{o.members, 0, TupleKind::Hyper});
        node_labels.push_back(std::move(lab));
      }
    }
    std::vector<std::size_t> perm(samples.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 shuffle_rng(derive(cfg.seed, kShuffle, epoch));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      std::vector<TupleSample> batch;
      std::vector<NodeTarget> targets;
      for (std::size_t i = start; i < end; ++i) {
        if (!node_labels[perm[i]].empty()) targets.push_back({batch.size(), node_labels[perm[i]]});
        batch.push_back(samples[perm[i]]);
      }
      ad::Tape tape;
      ParamVars pv = bind_params(tape, result.params, true);
      auto lg = build_loss(tape, mc, pv, features, batch, targets, cfg.outsider_ce_weight);
      const double loss = lg.total.value().item();
      if (!std::isfinite(loss)) {
        throw DivergenceError(static_cast<int>(epoch), "training loss became non-finite");
      }
      loss_sum += loss * static_cast<double>(batch.size());
      tape.backward(lg.total);
      std::vector<const Tensor*> grads;
      for (const auto& v : pv.all) grads.push_back(tape.has_grad(v.id()) ? &tape.grad(v.id()) : nullptr);
      adam.step(param_ptrs, grads);
    }
    if (!result.params.all_finite()) {
      throw DivergenceError(static_cast<int>(epoch), "parameters became non-finite");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(samples.size());
    score_validation(val, mc, result.params, features, rec);
    result.history.push_back(rec);
    if (on_epoch && !on_epoch(rec, result.params)) break;
  }
  return result;
}

TrainResult train(const Hypergraph& g, const FeatureSource& features, const ModelConfig& model,
                  const TrainConfig& cfg, const ModelParams* init, const EpochCallback& on_epoch) {
  auto positives = positives_of(g);
  if (!cfg.mix_pairwise) return train_on(positives, g, features, model, cfg, init, on_epoch);
  for (auto& p : decompose_pairwise(g)) {
    if (!g.contains(p.members)) positives.push_back(std::move(p));
  }
  const Hypergraph reference = with_pairwise(g);
  return train_on(positives, reference, features, model, cfg, init, on_epoch);
}

TrainResult fine_tune_min_pool(const ModelParams& params, const Hypergraph& g,
                               const FeatureSource& features, const ModelConfig& model,
                               const TrainConfig& cfg) {
  TrainConfig ft = cfg;
  ft.pool = PoolMode::Min;
  ft.epochs = cfg.fine_tune_epochs;
  // Distinct negative draws from the mean-pool run.
  ft.seed = derive(cfg.seed, 0xf1e7u);
  return train(g, features, model, ft, &params);
}

std::vector<NodeId> rank_outsiders(std::span<const NodeId> tuple, std::span<const double> p) {
  if (tuple.size() != p.size()) throw UsageError("rank_outsiders: size mismatch");
  std::vector<std::size_t> idx(tuple.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (p[a] != p[b]) return p[a] < p[b];
    return tuple[a] < tuple[b];
  });
  std::vector<NodeId> out;
  for (auto i : idx) out.push_back(tuple[i]);
  return out;
}

std::vector<NodeId> predict_outsider(const ModelConfig& model, const ModelParams& params,
                                     const FeatureSource& features, std::span<const NodeId> tuple) {
  if (tuple.size() < 2) throw UsageError("outsider prediction needs a tuple of size >= 2");
  const auto out = score_tuple(model, params, features, tuple);
  return rank_outsiders(tuple, out.per_node_prob);
}

// ---- checkpoint ----

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"input_dim", cfg.input_dim},   {"feature_dim", cfg.feature_dim},
          {"dim", cfg.dim},               {"heads", cfg.heads},
          {"variant", to_string(cfg.variant)}, {"feature_mode", to_string(cfg.feature_mode)},
          {"recon_weight", cfg.recon_weight},  {"pool", to_string(cfg.pool)}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.feature_mode = parse_feature_mode(j.at("feature_mode").get<std::string>());
  c.recon_weight = j.at("recon_weight").get<double>();
  c.pool = parse_pool_mode(j.at("pool").get<std::string>());
  return c;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"neg_ratio", cfg.neg_ratio},
          {"mix_pairwise", cfg.mix_pairwise},
          {"seed", cfg.seed},
          {"pool", to_string(cfg.pool)},
          {"validation_fraction", cfg.validation_fraction},
          {"fine_tune_epochs", cfg.fine_tune_epochs},
          {"outsider_ce_weight", cfg.outsider_ce_weight}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.neg_ratio = j.at("neg_ratio").get<int>();
  c.mix_pairwise = j.at("mix_pairwise").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.pool = parse_pool_mode(j.at("pool").get<std::string>());
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.fine_tune_epochs = j.at("fine_tune_epochs").get<std::size_t>();
  c.outsider_ce_weight = j.at("outsider_ce_weight").get<double>();
  return c;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_tensor(std::ostream& out, const Tensor& t) {
  for (double v : t.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(buf, 8);
  }
}

void get_tensor(const std::string& blob, std::size_t& pos, Tensor& t) {
  const std::size_t bytes = t.size() * 8;
  if (blob.size() - pos < bytes) throw DataError("checkpoint truncated in tensor data");
  for (auto& v : t.data()) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[pos + i])) << (8 * i);
    }
    v = std::bit_cast<double>(bits);
    pos += 8;
  }
}

ModelParams shaped_params(const ModelConfig& c) {
  ModelParams p;
  p.static_w = Tensor(c.feature_dim, c.dim, 0.0);
  for (std::size_t h = 0; h < c.heads; ++h) {
    p.query.emplace_back(c.feature_dim, c.head_dim(), 0.0);
    p.key.emplace_back(c.feature_dim, c.head_dim(), 0.0);
    p.value.emplace_back(c.feature_dim, c.head_dim(), 0.0);
  }
  p.out_w = Tensor(c.dim, 1, 0.0);
  p.out_b = Tensor(1, 1, 0.0);
  if (c.feature_mode == FeatureMode::Encoder) {
    p.enc_w = Tensor(c.feature_dim, c.input_dim, 0.0);
    p.enc_b = Tensor(1, c.feature_dim, 0.0);
  }
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json meta;
  meta["model"] = to_json(ckpt.model);
  meta["node_count"] = ckpt.node_count;
  meta["vocabulary_hash"] = ckpt.vocabulary_hash;
  meta["epoch"] = ckpt.epoch;
  meta["seed"] = ckpt.seed;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.params.named()) {
    tensors.push_back({{"name", name}, {"rows", t->rows()}, {"cols", t->cols()}});
  }
  meta["tensors"] = tensors;
  if (ckpt.features) {
    meta["features"] = {{"rows", ckpt.features->rows()}, {"cols", ckpt.features->cols()}};
  } else {
    meta["features"] = nullptr;
  }
  meta["extra"] = ckpt.extra;
  const std::string doc = meta.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(kCheckpointMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(doc.size()));
  out.write(doc.data(), static_cast<std::streamsize>(doc.size()));
  for (const auto& [name, t] : ckpt.params.named()) put_tensor(out, *t);
  if (ckpt.features) put_tensor(out, *ckpt.features);
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocabulary) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 9) throw DataError("checkpoint truncated (no header)");
  if (blob.compare(0, 4, "HSGN") != 0) throw DataError("not a checkpoint file (bad magic)");
  if (blob[4] != kCheckpointMagic[4]) {
    throw DataError(std::string("unsupported checkpoint version '") + blob[4] + "'");
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[5 + i])) << (8 * i);
  if (blob.size() - 9 < len) throw DataError("checkpoint truncated in metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob.substr(9, len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.model = model_config_from_json(meta.at("model"));
    ck.node_count = meta.at("node_count").get<std::size_t>();
    ck.vocabulary_hash = meta.at("vocabulary_hash").get<std::uint64_t>();
    ck.epoch = meta.at("epoch").get<std::size_t>();
    ck.seed = meta.at("seed").get<std::uint64_t>();
    ck.extra = meta.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  if (expected_vocabulary && *expected_vocabulary != ck.vocabulary_hash) {
    throw DataError("checkpoint was built over a different node vocabulary");
  }
  ck.params = shaped_params(ck.model);
  std::size_t pos = 9 + len;
  const auto& listed = meta.at("tensors");
  auto named = ck.params.named();
  if (listed.size() != named.size()) throw DataError("checkpoint tensor list does not match its model config");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    if (listed[i].at("name") != name || listed[i].at("rows") != t->rows() ||
        listed[i].at("cols") != t->cols()) {
      throw DataError("checkpoint tensor '" + name + "' has an unexpected name or shape");
    }
    get_tensor(blob, pos, *t);
  }
  if (!meta.at("features").is_null()) {
    const auto rows = meta["features"].at("rows").get<std::size_t>();
    const auto cols = meta["features"].at("cols").get<std::size_t>();
    if (cols != 0 && rows > (blob.size() - pos) / 8 / cols) throw DataError("checkpoint truncated in features");
    Tensor f(rows, cols, 0.0);
    get_tensor(blob, pos, f);
    ck.features = std::move(f);
  }
  if (pos != blob.size()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace hsagnn
