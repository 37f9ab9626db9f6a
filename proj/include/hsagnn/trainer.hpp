#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsagnn/hypergraph.hpp"
#include "hsagnn/sagnn.hpp"

namespace hsagnn {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 96;
  double learning_rate = 1e-3;
  int neg_ratio = 5;
  bool mix_pairwise = false;
  std::uint64_t seed = 0;
  PoolMode pool = PoolMode::Mean;
  double validation_fraction = 0.1;
  std::size_t fine_tune_epochs = 5;
  // Weight of the per-node outsider cross-entropy term; 0 disables it.
  double outsider_ce_weight = 0.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;   // NaN without a validation set
  double val_aupr = 0.0;
  // Split by tuple kind when both kinds are validated.
  std::optional<double> hyper_val_auc;
  std::optional<double> edge_val_auc;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&, const ModelParams&)>;

/// Trains on the hyperedges of `g` (plus decomposed pairs when mix_pairwise).
/// Negatives are redrawn every epoch and rejected against `g`.
TrainResult train(const Hypergraph& g, const FeatureSource& features, const ModelConfig& model,
                  const TrainConfig& cfg, const ModelParams* init = nullptr,
                  const EpochCallback& on_epoch = {});

/// Trains on an explicit positive set; negatives are rejected against `reference`.
TrainResult train_on(std::span<const TupleSample> positives, const Hypergraph& reference,
                     const FeatureSource& features, const ModelConfig& model,
                     const TrainConfig& cfg, const ModelParams* init = nullptr,
                     const EpochCallback& on_epoch = {});

/// Continues training from `params` with min pooling for cfg.fine_tune_epochs.
TrainResult fine_tune_min_pool(const ModelParams& params, const Hypergraph& g,
                               const FeatureSource& features, const ModelConfig& model,
                               const TrainConfig& cfg);

/// Tuple members by ascending p_i; ties broken by node id.
std::vector<NodeId> rank_outsiders(std::span<const NodeId> tuple, std::span<const double> p);
std::vector<NodeId> predict_outsider(const ModelConfig& model, const ModelParams& params,
                                     const FeatureSource& features, std::span<const NodeId> tuple);

/// Positives and negatives used in one epoch; exposed for inspection.
std::vector<TupleSample> epoch_negatives(const Hypergraph& reference,
                                         std::span<const TupleSample> positives, int ratio,
                                         std::uint64_t seed, std::size_t epoch);

struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  std::size_t node_count = 0;
  std::uint64_t vocabulary_hash = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::optional<Tensor> features;  // fixed Walk-mode feature table
  nlohmann::json extra = nlohmann::json::object();
};

inline constexpr char kCheckpointMagic[] = "HSGN1";

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws DataError on a corrupt or mismatched file. When `expected_vocabulary`
/// is set, a checkpoint built over another node vocabulary is refused.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocabulary = std::nullopt);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

}  // namespace hsagnn
