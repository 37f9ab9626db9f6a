#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsagnn/hypergraph.hpp"
#include "hsagnn/tensor.hpp"
#include "hsagnn/walker.hpp"

namespace hsagnn {

struct SkipGramConfig {
  std::size_t dim = 64;
  std::size_t window = 10;
  std::size_t negatives_per_pair = 5;
  std::size_t epochs = 5;
  double initial_lr = 0.025;
  std::uint64_t seed = 0;
  // 1 = deterministic; >1 = lock-free parallel updates, not reproducible.
  std::size_t threads = 1;

  void validate() const;
};

struct EmbeddingTable {
  Tensor rows;          // n × dim input vectors, exported as node features
  Tensor context_rows;  // n × dim output vectors
  std::vector<double> epoch_loss;   // end-of-epoch objective on fixed noise draws
  std::vector<double> online_loss;  // running mean loss seen during each epoch

  std::size_t node_count() const { return rows.rows(); }
  std::size_t dim() const { return rows.cols(); }
};

/// Every ordered (c_i, c_j) with 0 < |i - j| <= window, centre-major.
std::vector<std::pair<NodeId, NodeId>> context_pairs(std::span<const NodeId> walk,
                                                     std::size_t window);

/// Skip-gram with negative sampling from the unigram^(3/4) noise distribution
/// and linear learning-rate decay over all epochs.
EmbeddingTable train_skipgram(std::span<const Walk> corpus, std::size_t node_count,
                              const SkipGramConfig& cfg);

enum class BaselineMode { Mean, Min };

/// Mean or min of all pairwise cosine similarities; zero-norm rows count as 0.
double baseline_tuple_score(const Tensor& embeddings, std::span<const NodeId> tuple,
                            BaselineMode mode);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// "n dim" header then "token v1 ... v_dim" per node.
void write_embeddings(std::ostream& out, const Hypergraph& g, const Tensor& rows);
/// Rows are reordered to g's node ids; every node must be present.
Tensor read_embeddings(std::istream& in, const Hypergraph& g);

}  // namespace hsagnn
