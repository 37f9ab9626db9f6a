#include "hsagnn/synthetic.hpp"

#include <cmath>
#include <random>
#include <string>
#include <unordered_set>

namespace hsagnn {

void PlantedConfig::validate() const {
  if (types < 2) throw UsageError("planted graph needs at least 2 types");
  if (communities < 1 || nodes_per_type < communities) {
    throw UsageError("planted graph needs 1 <= communities <= nodes_per_type");
  }
  if (!(noise >= 0.0 && noise <= 1.0)) throw UsageError("planted noise outside [0,1]");
  const std::size_t per = nodes_per_type / communities;
  const double capacity = static_cast<double>(communities) *
                          std::pow(static_cast<double>(per), static_cast<double>(types));
  if (static_cast<double>(edges) * (1.0 - noise) > capacity) {
    throw UsageError("planted graph: too many edges for the community capacity");
  }
}

Hypergraph planted_hypergraph(const PlantedConfig& cfg) {
  cfg.validate();
  std::vector<NodeInfo> nodes;
  std::vector<std::string> type_names;
  for (std::size_t t = 0; t < cfg.types; ++t) {
    type_names.push_back("t" + std::to_string(t));
    for (std::size_t i = 0; i < cfg.nodes_per_type; ++i) {
      nodes.push_back({static_cast<NodeId>(nodes.size()),
                       "t" + std::to_string(t) + "_" + std::to_string(i),
                       static_cast<TypeId>(t)});
    }
  }
  auto id = [&](std::size_t t, std::size_t i) {
    return static_cast<NodeId>(t * cfg.nodes_per_type + i);
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_node(0, cfg.nodes_per_type - 1);
  std::uniform_int_distribution<std::size_t> pick_comm(0, cfg.communities - 1);
  const std::size_t per = cfg.nodes_per_type / cfg.communities;
  std::uniform_int_distribution<std::size_t> pick_member(0, per - 1);

  std::unordered_set<std::vector<NodeId>, VectorHash> seen;
  std::vector<Hyperedge> edges;
  std::size_t attempts = 0;
  const std::size_t budget = cfg.edges * 10000;
  while (edges.size() < cfg.edges) {
    if (++attempts > budget) throw DataError("planted graph: could not place enough edges");
    std::vector<NodeId> members;
    if (coin(rng) < cfg.noise) {
      for (std::size_t t = 0; t < cfg.types; ++t) members.push_back(id(t, pick_node(rng)));
    } else {
      const std::size_t c = pick_comm(rng);
      for (std::size_t t = 0; t < cfg.types; ++t) {
        members.push_back(id(t, c + cfg.communities * pick_member(rng)));
      }
    }
    if (seen.insert(tuple_key(members)).second) edges.push_back({std::move(members), 1.0});
  }
  return Hypergraph(std::move(nodes), std::move(type_names), std::move(edges));
}

std::vector<int> planted_communities(const Hypergraph& g, const PlantedConfig& cfg) {
  std::vector<int> out(g.node_count());
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    out[v] = static_cast<int>((v % cfg.nodes_per_type) % cfg.communities);
  }
  return out;
}

}  // namespace hsagnn
