#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "hsagnn/hypergraph.hpp"

namespace hsagnn {

struct WalkConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walk_length = 40;
  std::size_t walks_per_vertex = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct Transition {
  NodeId node;
  double prob;
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Sparse distribution over successor nodes, sorted by node id.
using Distribution = std::vector<Transition>;

using Walk = std::vector<NodeId>;

struct WalkCorpus {
  std::vector<Walk> walks;
  std::size_t isolated_skipped = 0;
};

/// π₁(t|x) ∝ Σ_e w(e)·h(t,e)·h(x,e)/δ(e) over t ≠ x, normalized.
/// Throws DataError when x has no successor.
Distribution first_order_distribution(const Hypergraph& g, NodeId x);

/// Unnormalized first-order masses (same support as above).
Distribution first_order_mass(const Hypergraph& g, NodeId x);

/// 1/p if some hyperedge holds {t, v, x}; else 1 if one holds {t, x}; else 1/q.
double second_order_bias(const Hypergraph& g, NodeId t, NodeId v, NodeId x, double p, double q);

/// π(t|v,x) ∝ π₁(t|x)·α(t,v); requires that v and x share a hyperedge.
Distribution transition_distribution(const Hypergraph& g, NodeId v, NodeId x,
                                     const WalkConfig& cfg);

/// Draws successors using lazily built cumulative tables, memoized per
/// state. Not thread-safe; use one sampler per worker.
class WalkSampler {
 public:
  WalkSampler(const Hypergraph& g, double p, double q);

  /// Returns false when x has no successor.
  bool first_step(NodeId x, std::mt19937_64& rng, NodeId& out);
  bool next_step(NodeId v, NodeId x, std::mt19937_64& rng, NodeId& out);

 private:
  struct Table {
    std::vector<NodeId> nodes;
    std::vector<double> cumulative;
  };
  static Table make_table(const Distribution& d);
  static NodeId draw(const Table& t, std::mt19937_64& rng);

  const Hypergraph& g_;
  double p_, q_;
  std::unordered_map<NodeId, Table> first_;
  std::unordered_map<std::uint64_t, Table> second_;
};

/// Each walk's RNG stream is derived from (seed, start, index), so the
/// corpus is independent of thread count and scheduling.
Walk simulate_walk(WalkSampler& sampler, NodeId start, std::size_t length, std::uint64_t seed,
                   std::size_t index);

/// walks_per_vertex walks from every non-isolated node, ordered by
/// (start node, walk index).
WalkCorpus simulate_walks(const Hypergraph& g, const WalkConfig& cfg);
WalkCorpus simulate_walks_from(const Hypergraph& g, const WalkConfig& cfg,
                               std::span<const NodeId> starts);

/// One walk per line, space-separated tokens.
void write_corpus(std::ostream& out, const Hypergraph& g, const WalkCorpus& corpus);
std::vector<Walk> read_corpus(std::istream& in, const Hypergraph& g);

}  // namespace hsagnn
