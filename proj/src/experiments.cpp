#include "hsagnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hsagnn {

nlohmann::json to_json(const FeatureSettings& s) {
  return {{"walk",
           {{"p", s.walk.p},
            {"q", s.walk.q},
            {"walk_length", s.walk.walk_length},
            {"walks_per_vertex", s.walk.walks_per_vertex},
            {"seed", s.walk.seed},
            {"threads", s.walk.threads}}},
          {"skipgram",
           {{"dim", s.skipgram.dim},
            {"window", s.skipgram.window},
            {"negatives_per_pair", s.skipgram.negatives_per_pair},
            {"epochs", s.skipgram.epochs},
            {"initial_lr", s.skipgram.initial_lr},
            {"seed", s.skipgram.seed},
            {"threads", s.skipgram.threads}}}};
}

FeatureSettings feature_settings_from_json(const nlohmann::json& j) {
  FeatureSettings s;
  const auto& w = j.at("walk");
  s.walk.p = w.at("p").get<double>();
  s.walk.q = w.at("q").get<double>();
  s.walk.walk_length = w.at("walk_length").get<std::size_t>();
  s.walk.walks_per_vertex = w.at("walks_per_vertex").get<std::size_t>();
  s.walk.seed = w.at("seed").get<std::uint64_t>();
  s.walk.threads = w.at("threads").get<std::size_t>();
  const auto& k = j.at("skipgram");
  s.skipgram.dim = k.at("dim").get<std::size_t>();
  s.skipgram.window = k.at("window").get<std::size_t>();
  s.skipgram.negatives_per_pair = k.at("negatives_per_pair").get<std::size_t>();
  s.skipgram.epochs = k.at("epochs").get<std::size_t>();
  s.skipgram.initial_lr = k.at("initial_lr").get<double>();
  s.skipgram.seed = k.at("seed").get<std::uint64_t>();
  s.skipgram.threads = k.at("threads").get<std::size_t>();
  return s;
}

FeatureSource build_features(const Hypergraph& g, FeatureMode mode, const FeatureSettings& s) {
  if (mode == FeatureMode::Encoder) return FeatureSource::from_adjacency(g);
  const auto corpus = simulate_walks(g, s.walk);
  auto table = train_skipgram(corpus.walks, g.node_count(), s.skipgram);
  return FeatureSource::from_table(std::move(table.rows));
}

ModelConfig fit_model_dims(ModelConfig base, const FeatureSource& features) {
  base.input_dim = features.width();
  if (base.feature_mode == FeatureMode::Walk) base.feature_dim = features.width();
  return base;
}

MetricReport score_against_negatives(const std::string& task, const ModelConfig& model,
                                     const ModelParams& params, const FeatureSource& features,
                                     const Hypergraph& reference,
                                     std::span<const TupleSample> positives, int neg_ratio,
                                     std::uint64_t seed) {
  const auto negatives = sample_negatives(reference, positives, neg_ratio, seed);
  std::vector<std::vector<NodeId>> tuples;
  std::vector<int> labels;
  for (const auto& p : positives) {
    tuples.push_back(p.members);
    labels.push_back(1);
  }
  for (const auto& n : negatives) {
    tuples.push_back(n.members);
    labels.push_back(0);
  }
  const auto scores = score_tuples(model, params, features, tuples);
  MetricReport r;
  r.task = task;
  r.set("auroc", auroc(scores, labels));
  r.set("aupr", aupr(scores, labels));
  r.set("positives", static_cast<double>(positives.size()));
  r.set("negatives", static_cast<double>(negatives.size()));
  return r;
}

namespace {

void describe(MetricReport& r, const ExperimentConfig& cfg, const Hypergraph& g,
              const TrainResult& trained) {
  r.metadata["seed"] = std::to_string(cfg.train.seed);
  r.metadata["variant"] = to_string(cfg.model.variant);
  r.metadata["feature_mode"] = to_string(cfg.model.feature_mode);
  r.metadata["epochs"] = std::to_string(trained.history.size());
  r.metadata["vocabulary_hash"] = std::to_string(g.vocabulary_hash());
  r.metadata["edges"] = std::to_string(g.edge_count());
}

std::uint64_t eval_seed(std::uint64_t seed) { return seed * 0x2545F4914F6CDD1DULL + 17; }

}  // namespace

TaskOutcome run_reconstruction(const Hypergraph& g, const ExperimentConfig& cfg) {
  TaskOutcome out;
  out.features = build_features(g, cfg.model.feature_mode, cfg.features);
  out.model = fit_model_dims(cfg.model, out.features);
  out.model.pool = cfg.train.pool;
  out.trained = train(g, out.features, out.model, cfg.train);
  const auto positives = positives_of(g);
  out.report = score_against_negatives("reconstruction", out.model, out.trained.params,
                                       out.features, g, positives, cfg.eval_neg_ratio,
                                       eval_seed(cfg.train.seed));
  describe(out.report, cfg, g, out.trained);
  return out;
}

TaskOutcome run_link_prediction(const Hypergraph& g, const ExperimentConfig& cfg, int ratio_train,
                                int ratio_test, std::uint64_t split_seed) {
  auto [kept, held_out] = split_train_test<Hyperedge>(g.edges(), ratio_train, ratio_test, split_seed);
  const std::size_t train_count = kept.size();
  std::vector<TupleSample> test_pos;
  for (const auto& e : held_out) test_pos.push_back({e.members, 1, TupleKind::Hyper});
  const Hypergraph train_graph = with_edges(g, std::move(kept));

  TaskOutcome out;
  out.features = build_features(train_graph, cfg.model.feature_mode, cfg.features);
  out.model = fit_model_dims(cfg.model, out.features);
  out.model.pool = cfg.train.pool;
  out.trained = train(train_graph, out.features, out.model, cfg.train);
  out.report = score_against_negatives("link_prediction", out.model, out.trained.params,
                                       out.features, g, test_pos, cfg.eval_neg_ratio,
                                       eval_seed(split_seed));
  describe(out.report, cfg, g, out.trained);
  out.report.metadata["split"] = std::to_string(ratio_train) + ":" + std::to_string(ratio_test);
  out.report.metadata["split_seed"] = std::to_string(split_seed);
  out.report.set("train_edges", static_cast<double>(train_count));
  return out;
}

TaskOutcome run_downsampled(const Hypergraph& g, const ExperimentConfig& cfg, double hyper_frac,
                            double edge_frac, std::uint64_t seed) {
  std::vector<TupleSample> hyper;
  for (auto& p : positives_of(g)) {
    if (p.members.size() > 2) hyper.push_back(std::move(p));
  }
  const auto pairs = decompose_pairwise(g);
  auto [h, p] = downsample<TupleSample, TupleSample>(hyper, pairs, hyper_frac, edge_frac, seed);
  std::vector<TupleSample> positives = h;
  std::vector<Hyperedge> edges;
  for (const auto& s : h) edges.push_back({s.members, 1.0});
  for (const auto& s : p) {
    positives.push_back(s);
    edges.push_back({s.members, 1.0});
  }
  if (positives.empty()) throw DataError("downsampling left no training tuples");
  const Hypergraph sampled = with_edges(g, std::move(edges));
  const Hypergraph reference = with_pairwise(g);

  TaskOutcome out;
  out.features = build_features(sampled, cfg.model.feature_mode, cfg.features);
  out.model = fit_model_dims(cfg.model, out.features);
  out.model.pool = cfg.train.pool;
  out.trained = train_on(positives, reference, out.features, out.model, cfg.train);
  out.report.task = "downsampled";
  describe(out.report, cfg, g, out.trained);
  out.report.set("hyperedges_kept", static_cast<double>(h.size()));
  out.report.set("edges_kept", static_cast<double>(p.size()));
  const auto& last = out.trained.history.back();
  if (last.hyper_val_auc) out.report.set("hyper_val_auc", *last.hyper_val_auc);
  if (last.edge_val_auc) out.report.set("edge_val_auc", *last.edge_val_auc);
  for (const auto& rec : out.trained.history) {
    out.report.per_run["hyper_val_auc"].push_back(rec.hyper_val_auc.value_or(std::nan("")));
    out.report.per_run["edge_val_auc"].push_back(rec.edge_val_auc.value_or(std::nan("")));
  }
  return out;
}

OutsiderComparison run_outsider_comparison(const Hypergraph& g, const ExperimentConfig& cfg,
                                           std::size_t instances, std::uint64_t seed) {
  ExperimentConfig mean_cfg = cfg;
  mean_cfg.train.pool = PoolMode::Mean;
  auto base = run_reconstruction(g, mean_cfg);

  OutsiderComparison out;
  std::vector<TupleSample> sources;
  for (auto& p : positives_of(g)) {
    if (p.members.size() >= 3) sources.push_back(std::move(p));
  }
  out.instances = generate_outsider_triplets(g, sources, instances, seed);
  if (out.instances.empty()) throw DataError("no outsider instances could be generated");
  std::vector<NodeId> truth;
  for (const auto& inst : out.instances) truth.push_back(inst.outsider());

  ModelConfig mean_model = base.model;
  mean_model.pool = PoolMode::Mean;
  for (const auto& inst : out.instances) {
    out.mean_rankings.push_back(predict_outsider(mean_model, base.trained.params, base.features, inst.members));
  }

  auto tuned = fine_tune_min_pool(base.trained.params, g, base.features, base.model, cfg.train);
  ModelConfig min_model = base.model;
  min_model.pool = PoolMode::Min;
  for (const auto& inst : out.instances) {
    out.min_rankings.push_back(predict_outsider(min_model, tuned.params, base.features, inst.members));
  }
  const auto positives = positives_of(g);
  auto min_recon = score_against_negatives("reconstruction_min", min_model, tuned.params,
                                           base.features, g, positives, cfg.eval_neg_ratio,
                                           eval_seed(cfg.train.seed));

  auto& r = out.report;
  r.task = "outsider";
  describe(r, cfg, g, base.trained);
  r.metadata["fine_tune_epochs"] = std::to_string(tuned.history.size());
  r.set("instances", static_cast<double>(out.instances.size()));
  r.set("mean_pool.top1", outsider_topk_accuracy(out.mean_rankings, truth, 1));
  r.set("mean_pool.top2", outsider_topk_accuracy(out.mean_rankings, truth, 2));
  r.set("min_pool.top1", outsider_topk_accuracy(out.min_rankings, truth, 1));
  r.set("min_pool.top2", outsider_topk_accuracy(out.min_rankings, truth, 2));
  r.set("mean_pool.reconstruction_auroc", base.report.get("auroc"));
  r.set("min_pool.reconstruction_auroc", min_recon.get("auroc"));
  return out;
}

std::vector<VariantCurve> run_variant_curves(const Hypergraph& g, const ExperimentConfig& cfg,
                                             std::span<const Variant> variants,
                                             std::span<const std::uint64_t> seeds) {
  std::vector<VariantCurve> out;
  for (auto variant : variants) {
    VariantCurve curve;
    curve.variant = variant;
    std::vector<std::vector<double>> aucs, auprs, losses;
    for (auto seed : seeds) {
      auto [kept, held_out] = split_train_test<Hyperedge>(g.edges(), 4, 1, seed);
      std::vector<TupleSample> test_pos;
      for (const auto& e : held_out) test_pos.push_back({e.members, 1, TupleKind::Hyper});
      const Hypergraph train_graph = with_edges(g, std::move(kept));
      ExperimentConfig run = cfg;
      run.model.variant = variant;
      run.train.seed = seed;
      run.features.walk.seed = seed;
      run.features.skipgram.seed = seed;
      const auto features = build_features(train_graph, run.model.feature_mode, run.features);
      ModelConfig model = fit_model_dims(run.model, features);
      model.pool = run.train.pool;
      const auto negatives = sample_negatives(g, test_pos, cfg.eval_neg_ratio, eval_seed(seed));
      std::vector<std::vector<NodeId>> tuples;
      std::vector<int> labels;
      for (const auto& p : test_pos) tuples.push_back(p.members), labels.push_back(1);
      for (const auto& n : negatives) tuples.push_back(n.members), labels.push_back(0);
      std::vector<double> auc, ap, loss;
      auto on_epoch = [&](const EpochRecord& rec, const ModelParams& params) {
        const auto scores = score_tuples(model, params, features, tuples);
        auc.push_back(auroc(scores, labels));
        ap.push_back(aupr(scores, labels));
        loss.push_back(rec.train_loss);
        return true;
      };
      auto trained = train(train_graph, features, model, run.train, nullptr, on_epoch);
      curve.runs.push_back(trained.history);
      aucs.push_back(std::move(auc));
      auprs.push_back(std::move(ap));
      losses.push_back(std::move(loss));
    }
    auto average = [](const std::vector<std::vector<double>>& rows) {
      std::size_t len = rows.empty() ? 0 : rows.front().size();
      for (const auto& r : rows) len = std::min(len, r.size());
      std::vector<double> mean(len, 0.0);
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < len; ++i) mean[i] += r[i] / static_cast<double>(rows.size());
      }
      return mean;
    };
    curve.mean_auc = average(aucs);
    curve.mean_aupr = average(auprs);
    curve.mean_loss = average(losses);
    out.push_back(std::move(curve));
  }
  return out;
}

}  // namespace hsagnn
