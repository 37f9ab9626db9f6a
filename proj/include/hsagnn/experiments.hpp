#pragma once

// End-to-end task protocols shared by the CLI and the acceptance suite.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsagnn/evaluator.hpp"
#include "hsagnn/hypergraph.hpp"
#include "hsagnn/sagnn.hpp"
#include "hsagnn/skipgram.hpp"
#include "hsagnn/trainer.hpp"
#include "hsagnn/walker.hpp"

namespace hsagnn {

struct FeatureSettings {
  WalkConfig walk;
  SkipGramConfig skipgram;
};

nlohmann::json to_json(const FeatureSettings& s);
FeatureSettings feature_settings_from_json(const nlohmann::json& j);

/// Walk mode: walks + skip-gram on g. Encoder mode: g's adjacency rows.
FeatureSource build_features(const Hypergraph& g, FeatureMode mode, const FeatureSettings& s);

/// Copies `base` with input/feature widths matched to `features`.
ModelConfig fit_model_dims(ModelConfig base, const FeatureSource& features);

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  FeatureSettings features;
  int eval_neg_ratio = 5;
};

struct TaskOutcome {
  MetricReport report;
  ModelConfig model;
  TrainResult trained;
  FeatureSource features;
};

/// Scores `positives` against fresh corruptions rejected by `reference`.
MetricReport score_against_negatives(const std::string& task, const ModelConfig& model,
                                     const ModelParams& params, const FeatureSource& features,
                                     const Hypergraph& reference,
                                     std::span<const TupleSample> positives, int neg_ratio,
                                     std::uint64_t seed);

/// Train on every hyperedge, then score them against corruptions.
TaskOutcome run_reconstruction(const Hypergraph& g, const ExperimentConfig& cfg);

/// Split hyperedges train:test, build features and train on the training
/// graph, score held-out hyperedges against corruptions rejected by g.
TaskOutcome run_link_prediction(const Hypergraph& g, const ExperimentConfig& cfg, int ratio_train,
                                int ratio_test, std::uint64_t split_seed);

/// Trains on a downsampled hyperedge set plus a downsampled pair set.
TaskOutcome run_downsampled(const Hypergraph& g, const ExperimentConfig& cfg, double hyper_frac,
                            double edge_frac, std::uint64_t seed);

struct OutsiderComparison {
  MetricReport report;  // top-1/top-2 and reconstruction AUC before and after
  std::vector<OutsiderInstance> instances;
  std::vector<std::vector<NodeId>> mean_rankings;
  std::vector<std::vector<NodeId>> min_rankings;
};

/// Mean-pool training, outsider ranking, min-pool fine-tune, ranking again.
OutsiderComparison run_outsider_comparison(const Hypergraph& g, const ExperimentConfig& cfg,
                                           std::size_t instances, std::uint64_t seed);

struct VariantCurve {
  Variant variant;
  std::vector<std::vector<EpochRecord>> runs;
  std::vector<double> mean_auc;   // held-out test AUROC per epoch, across runs
  std::vector<double> mean_aupr;
  std::vector<double> mean_loss;
};

/// Per seed: 4:1 split, train each variant, score the held-out edges every epoch.
std::vector<VariantCurve> run_variant_curves(const Hypergraph& g, const ExperimentConfig& cfg,
                                             std::span<const Variant> variants,
                                             std::span<const std::uint64_t> seeds);

}  // namespace hsagnn
