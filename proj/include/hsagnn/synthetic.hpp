#pragma once

// Planted heterogeneous hypergraph used by tests and demos.
//
// Each of `types` node types has `nodes_per_type` nodes; node i of every type
// belongs to community i % communities. A hyperedge takes one node per type,
// all from one community, except with probability `noise` where members are
// drawn uniformly.

#include <cstdint>
#include <vector>

#include "hsagnn/hypergraph.hpp"

namespace hsagnn {

struct PlantedConfig {
  std::size_t types = 3;
  std::size_t nodes_per_type = 20;
  std::size_t communities = 4;
  std::size_t edges = 500;
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Tokens are "t<type>_<index>", type names "t<type>".
Hypergraph planted_hypergraph(const PlantedConfig& cfg);

/// Community of every node, indexed by node id.
std::vector<int> planted_communities(const Hypergraph& g, const PlantedConfig& cfg);

}  // namespace hsagnn
