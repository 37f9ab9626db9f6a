#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hsagnn/errors.hpp"

namespace hsagnn {

using NodeId = std::uint32_t;
using TypeId = std::uint16_t;

struct NodeInfo {
  NodeId id = 0;
  std::string token;
  TypeId node_type = 0;
};

struct Hyperedge {
  std::vector<NodeId> members;
  double weight = 1.0;
};

enum class TupleKind : std::uint8_t { Hyper, Pairwise };

/// Candidate node tuple with a binary label. Members are an unordered
/// multiset semantically; positions matter only for corruption bookkeeping.
struct TupleSample {
  std::vector<NodeId> members;
  int label = 1;
  TupleKind kind = TupleKind::Hyper;

  friend bool operator==(const TupleSample&, const TupleSample&) = default;
};

/// token -> type name; nodes absent from the map take `default_type` when set.
struct TypeMap {
  std::map<std::string, std::string> types;
  std::optional<std::string> default_type;
  /// Declared type names in declaration order; type ids index this list.
  std::vector<std::string> declared;
};

struct VectorHash {
  std::size_t operator()(const std::vector<NodeId>& v) const noexcept;
};

/// Immutable hypergraph G = (V, E) with per-node incidence lists.
/// Safe to share across threads once built.
class Hypergraph {
 public:
  Hypergraph() = default;
  /// Validates and indexes; duplicate hyperedges (same member multiset)
  /// collapse into the first occurrence with summed weight.
  Hypergraph(std::vector<NodeInfo> nodes, std::vector<std::string> type_names,
             std::vector<Hyperedge> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t type_count() const noexcept { return type_names_.size(); }

  const std::vector<NodeInfo>& nodes() const noexcept { return nodes_; }
  const NodeInfo& node(NodeId v) const;
  const std::vector<Hyperedge>& edges() const noexcept { return edges_; }
  const Hyperedge& edge(std::size_t e) const { return edges_.at(e); }
  const std::vector<std::string>& type_names() const noexcept { return type_names_; }
  TypeId node_type(NodeId v) const { return node(v).node_type; }
  const std::vector<NodeId>& nodes_of_type(TypeId t) const { return by_type_.at(t); }

  /// Sorted indices of hyperedges incident to v.
  const std::vector<std::uint32_t>& incidence(NodeId v) const;
  std::optional<NodeId> find(const std::string& token) const;
  NodeId id_of(const std::string& token) const;

  /// True when `members` equals some hyperedge as a multiset.
  bool contains(std::span<const NodeId> members) const;
  /// True when some hyperedge contains every node in `nodes`.
  bool co_incident(std::initializer_list<NodeId> nodes) const;
  bool edge_contains(std::size_t e, NodeId v) const;

  /// 64-bit FNV-1a over tokens in id order.
  std::uint64_t vocabulary_hash() const;

 private:
  void check_node(NodeId v) const;

  std::vector<NodeInfo> nodes_;
  std::vector<std::string> type_names_;
  std::vector<Hyperedge> edges_;
  std::vector<std::vector<std::uint32_t>> incidence_;
  std::vector<std::vector<NodeId>> by_type_;
  std::unordered_map<std::string, NodeId> token_index_;
  std::unordered_set<std::vector<NodeId>, VectorHash> edge_keys_;
};

/// Sorted copy of a member list, the multiset key used throughout.
std::vector<NodeId> tuple_key(std::span<const NodeId> members);

/// Parses hyperedge records: whitespace-separated tokens, optional trailing
/// "w=<float>". Blank lines and lines starting with '#' are skipped.
/// Tokens listed in `type_map` but absent from every edge become isolated nodes.
Hypergraph build_hypergraph(std::span<const std::string> edge_lines, const TypeMap& type_map);

/// Builds a graph with a single declared type for every token.
Hypergraph build_untyped_hypergraph(std::span<const std::string> edge_lines,
                                    const std::string& type_name = "node");

/// Rebuilds a graph over the same node set with a different edge list.
Hypergraph with_edges(const Hypergraph& g, std::vector<Hyperedge> edges);

/// "token<TAB>type_name" per line.
TypeMap read_type_map(std::istream& in);
std::vector<std::string> read_lines(std::istream& in);

/// "token<TAB>label[,label...]" per line.
std::map<std::string, std::vector<std::string>> read_label_file(std::istream& in);

/// Σ_e h(v,e)·w(e).
double degree(const Hypergraph& g, NodeId v);
/// Unweighted co-membership counts; entry v is 0.
std::vector<double> adjacency_row(const Hypergraph& g, NodeId v);
/// Sparse form of adjacency_row: (neighbor, count) sorted by neighbor.
std::vector<std::pair<NodeId, double>> adjacency_row_sparse(const Hypergraph& g, NodeId v);

/// All C(k,2) pairs of every hyperedge, deduplicated, in first-seen order.
std::vector<TupleSample> decompose_pairwise(const Hypergraph& g);
/// g's hyperedges plus every decomposed pair not already an edge.
Hypergraph with_pairwise(const Hypergraph& g);

std::vector<TupleSample> positives_of(const Hypergraph& g);

/// Single-slot, type-preserving corruption of each positive, `ratio` times.
/// Candidates that repeat a node or equal an edge of g are resampled up to
/// `max_retries` times; exhaustion throws DataError.
std::vector<TupleSample> sample_negatives(const Hypergraph& g,
                                          std::span<const TupleSample> positives, int ratio,
                                          std::uint64_t seed, int max_retries = 200);

/// Deterministic shuffled partition; test size = round(n·test/(train+test)).
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(std::span<const T> items,
                                                           int ratio_train, int ratio_test,
                                                           std::uint64_t seed) {
  if (ratio_train < 1 || ratio_test < 1) throw UsageError("split ratios must be >= 1");
  const std::size_t parts = static_cast<std::size_t>(ratio_train + ratio_test);
  if (items.size() < parts) {
    throw DataError("cannot split " + std::to_string(items.size()) + " items by " +
                    std::to_string(ratio_train) + ":" + std::to_string(ratio_test));
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(items.size());
  auto n_test = static_cast<std::size_t>(std::llround(n * ratio_test / static_cast<double>(parts)));
  n_test = std::clamp<std::size_t>(n_test, 1, items.size() - 1);
  std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<long>(n_test));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<T> train, test;
  for (auto i : train_idx) train.push_back(items[i]);
  for (auto i : test_idx) test.push_back(items[i]);
  return {std::move(train), std::move(test)};
}

/// Uniform subset of round(frac·n) items, original order preserved.
template <class T>
std::vector<T> downsample_one(std::span<const T> items, double frac, std::mt19937_64& rng) {
  if (!(frac >= 0.0 && frac <= 1.0)) throw UsageError("downsample fraction outside [0,1]");
  const auto keep = static_cast<std::size_t>(std::llround(frac * static_cast<double>(items.size())));
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  std::vector<T> out;
  out.reserve(keep);
  for (auto i : order) out.push_back(items[i]);
  return out;
}

template <class H, class P>
std::pair<std::vector<H>, std::vector<P>> downsample(std::span<const H> hyperedges,
                                                     std::span<const P> pairwise_edges,
                                                     double hyper_frac, double edge_frac,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto h = downsample_one(hyperedges, hyper_frac, rng);
  auto p = downsample_one(pairwise_edges, edge_frac, rng);
  return {std::move(h), std::move(p)};
}

/// Tuple from a true hyperedge with one member replaced by a same-type node
/// that shares no hyperedge with any remaining member.
struct OutsiderInstance {
  std::vector<NodeId> members;
  std::size_t outsider_position = 0;
  NodeId outsider() const { return members[outsider_position]; }
};

std::vector<OutsiderInstance> generate_outsider_triplets(const Hypergraph& g,
                                                         std::span<const TupleSample> sources,
                                                         std::size_t count, std::uint64_t seed,
                                                         int max_retries = 200);

/// True when `candidate` (at `position`) satisfies both outsider conditions.
bool is_outsider(const Hypergraph& g, std::span<const NodeId> tuple, std::size_t position);

}  // namespace hsagnn
