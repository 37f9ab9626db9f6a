#pragma once

// Self-attention hyperedge scorer.
//
// Each node feature x_i feeds two branches:
//   static   s_i = tanh(W_sᵀ x_i)                      (tuple-independent)
//   dynamic  d_i = tanh(concat_h Σ_{j≠i} α^h_ij W_V^hᵀ x_j)
//            α^h_ij = softmax_j((W_Q^hᵀ x_i)·(W_K^hᵀ x_j)), self term excluded
// and the per-node score is p_i = σ(W_oᵀ (d_i − s_i)^∘2 + b). The tuple score
// pools p_i by mean (or min for outsider fine-tuning).
//
// Variant TypeI keeps the self term in the attention. Variant TypeII keeps it
// too and scores p_i = σ(W_oᵀ d_i + b), bypassing the static branch.
//
// In Encoder mode x_i = tanh(W_enc a_i + b_enc) where a_i is the node's
// adjacency row; the tied decoder tanh(W_encᵀ x_i) adds a reconstruction term.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsagnn/autodiff.hpp"
#include "hsagnn/hypergraph.hpp"
#include "hsagnn/tensor.hpp"

namespace hsagnn {

enum class Variant { Standard, TypeI, TypeII };
enum class FeatureMode { Walk, Encoder };
enum class PoolMode { Mean, Min };

std::string to_string(Variant v);
std::string to_string(FeatureMode m);
std::string to_string(PoolMode m);
Variant parse_variant(const std::string& s);
FeatureMode parse_feature_mode(const std::string& s);
PoolMode parse_pool_mode(const std::string& s);

struct ModelConfig {
  std::size_t input_dim = 0;    // width of FeatureSource rows (n in Encoder mode)
  std::size_t feature_dim = 64; // width of x_i; equals input_dim in Walk mode
  std::size_t dim = 64;
  std::size_t heads = 4;
  Variant variant = Variant::Standard;
  FeatureMode feature_mode = FeatureMode::Walk;
  double recon_weight = 0.1;    // λ, Encoder mode only
  PoolMode pool = PoolMode::Mean;

  void validate() const;
  std::size_t head_dim() const { return dim / heads; }
  /// Smallest tuple the variant can score.
  std::size_t min_tuple_size() const { return variant == Variant::TypeI ? 1 : 2; }
};

struct ModelParams {
  Tensor static_w;               // feature_dim × dim
  std::vector<Tensor> query;     // per head: feature_dim × head_dim
  std::vector<Tensor> key;
  std::vector<Tensor> value;
  Tensor out_w;                  // dim × 1
  Tensor out_b;                  // 1 × 1
  Tensor enc_w;                  // feature_dim × input_dim (Encoder mode)
  Tensor enc_b;                  // 1 × feature_dim (Encoder mode)

  /// Every tensor in checkpoint order with a stable name.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  bool all_finite() const;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Source of the per-node input rows: fixed embeddings (Walk) or adjacency
/// rows (Encoder). Adjacency rows are stored sparsely and densified per batch.
class FeatureSource {
 public:
  FeatureSource() = default;
  static FeatureSource from_table(Tensor table);
  static FeatureSource from_adjacency(const Hypergraph& g);

  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t width() const noexcept { return width_; }
  bool is_adjacency() const noexcept { return adjacency_; }
  const Tensor& table() const { return table_; }

  Tensor rows(std::span<const NodeId> ids) const;

 private:
  std::size_t nodes_ = 0;
  std::size_t width_ = 0;
  bool adjacency_ = false;
  Tensor table_;
  std::vector<std::vector<std::pair<NodeId, double>>> sparse_;
};

/// Parameters bound to a tape.
struct ParamVars {
  ad::Var static_w;
  std::vector<ad::Var> query, key, value;
  ad::Var out_w, out_b, enc_w, enc_b;
  std::vector<ad::Var> all;  // order of ModelParams::named()
};

ParamVars bind_params(ad::Tape& tape, const ModelParams& params, bool trainable);
ParamVars bind_vars(const ModelConfig& cfg, std::span<const ad::Var> vars);

/// Forward graph for a batch of same-size tuples, rows in tuple-major order.
struct BucketGraph {
  std::size_t group = 0;
  ad::Var features;    // (B·k) × feature_dim
  ad::Var static_emb;  // (B·k) × dim
  ad::Var dynamic_emb; // (B·k) × dim
  std::vector<ad::Var> attention;  // per head, (B·k) × k
  ad::Var node_prob;   // (B·k) × 1
  ad::Var tuple_prob;  // B × 1
};

/// Batch-level features: gathered constant rows (Walk) or encoder outputs
/// for the batch's distinct nodes (Encoder) plus their reconstruction loss.
struct BatchFeatures {
  ad::Var x;                           // m × feature_dim, m = distinct nodes
  std::vector<NodeId> nodes;           // row -> node id
  std::optional<ad::Var> recon_loss;   // Encoder mode
  std::size_t row_of(NodeId v) const;
};

BatchFeatures build_batch_features(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                                   const FeatureSource& source, std::span<const NodeId> nodes);

BucketGraph build_bucket(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                         const BatchFeatures& feats,
                         std::span<const std::vector<NodeId>> tuples, PoolMode pool);

struct ForwardOutput {
  Tensor static_emb;               // k × dim
  Tensor dynamic_emb;              // k × dim
  std::vector<double> per_node_prob;
  double tuple_prob = 0.0;
};

/// Encoder output x_i = tanh(W_enc a_i + b_enc) and its reconstruction.
struct EncodedFeature {
  std::vector<double> x;
  std::vector<double> reconstruction;
  double recon_error = 0.0;  // mean squared error over the row
};
EncodedFeature encode_features(const ModelParams& params, std::span<const double> adjacency);

/// s_i for a raw feature row.
std::vector<double> static_embed(const ModelParams& params, std::span<const double> x);

/// Dynamic embeddings for a k × feature_dim tuple matrix.
Tensor dynamic_embed(const ModelConfig& cfg, const ModelParams& params, const Tensor& x_tuple);

/// Scores a k × feature_dim tuple matrix.
ForwardOutput score_features(const ModelConfig& cfg, const ModelParams& params,
                             const Tensor& x_tuple);

/// Scores a node tuple drawn from `source`.
ForwardOutput score_tuple(const ModelConfig& cfg, const ModelParams& params,
                          const FeatureSource& source, std::span<const NodeId> tuple);

/// Tuple probabilities for many tuples (any sizes), evaluated in buckets.
std::vector<double> score_tuples(const ModelConfig& cfg, const ModelParams& params,
                                 const FeatureSource& source,
                                 std::span<const std::vector<NodeId>> tuples,
                                 std::size_t batch_size = 256);

/// Per-node probabilities p_i for each tuple.
std::vector<std::vector<double>> score_nodes(const ModelConfig& cfg, const ModelParams& params,
                                             const FeatureSource& source,
                                             std::span<const std::vector<NodeId>> tuples,
                                             std::size_t batch_size = 256);

struct LossGraph {
  ad::Var total;
  ad::Var bce;
  std::optional<ad::Var> recon;
  std::vector<double> tuple_prob;  // per sample, in input order
};

/// Mean BCE over the samples plus λ·reconstruction in Encoder mode.
/// Optional per-node targets add a BCE term over p_i (weight `node_weight`).
struct NodeTarget {
  std::size_t sample = 0;           // index into samples
  std::vector<double> labels;       // one per member
};
LossGraph build_loss(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& p,
                     const FeatureSource& source, std::span<const TupleSample> samples,
                     std::span<const NodeTarget> node_targets = {}, double node_weight = 0.0);

double total_loss(const ModelConfig& cfg, const ModelParams& params, const FeatureSource& source,
                  std::span<const TupleSample> samples);

/// Static embedding (Standard/TypeI) or concatenated W_Vᵀ x_i (TypeII).
std::vector<double> node_repr_for_classification(const ModelConfig& cfg,
                                                 const ModelParams& params,
                                                 const FeatureSource& source, NodeId node);
Tensor node_representations(const ModelConfig& cfg, const ModelParams& params,
                            const FeatureSource& source);

}  // namespace hsagnn
