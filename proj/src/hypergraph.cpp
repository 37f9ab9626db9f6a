#include "hsagnn/hypergraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace hsagnn {

std::size_t VectorHash::operator()(const std::vector<NodeId>& v) const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (NodeId x : v) {
    h ^= x;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

std::vector<NodeId> tuple_key(std::span<const NodeId> members) {
  std::vector<NodeId> key(members.begin(), members.end());
  std::sort(key.begin(), key.end());
  return key;
}

Hypergraph::Hypergraph(std::vector<NodeInfo> nodes, std::vector<std::string> type_names,
                       std::vector<Hyperedge> edges)
    : nodes_(std::move(nodes)), type_names_(std::move(type_names)) {
  if (type_names_.empty() && !nodes_.empty()) throw DataError("no node types declared");
  by_type_.resize(type_names_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    if (n.id != i) throw DataError("node ids must be contiguous 0..n-1");
    if (n.node_type >= type_names_.size()) {
      throw DataError("node '" + n.token + "' has undeclared type " + std::to_string(n.node_type));
    }
    if (!token_index_.emplace(n.token, n.id).second) {
      throw DataError("duplicate node token '" + n.token + "'");
    }
    by_type_[n.node_type].push_back(n.id);
  }

  std::unordered_map<std::vector<NodeId>, std::size_t, VectorHash> first_seen;
  for (auto& e : edges) {
    if (e.members.size() < 2) throw DataError("hyperedge with fewer than 2 members");
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw DataError("hyperedge weight must be finite and nonnegative");
    }
    for (NodeId v : e.members) check_node(v);
    auto key = tuple_key(e.members);
    if (std::adjacent_find(key.begin(), key.end()) != key.end()) {
      throw DataError("hyperedge repeats node '" +
                      nodes_[*std::adjacent_find(key.begin(), key.end())].token + "'");
    }
    auto [it, fresh] = first_seen.emplace(key, edges_.size());
    if (fresh) {
      edges_.push_back(std::move(e));
      edge_keys_.insert(std::move(key));
    } else {
      edges_[it->second].weight += e.weight;
    }
  }

  incidence_.resize(nodes_.size());
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    for (NodeId v : edges_[e].members) incidence_[v].push_back(static_cast<std::uint32_t>(e));
  }
}

void Hypergraph::check_node(NodeId v) const {
  if (v >= nodes_.size()) {
    throw DataError("node id " + std::to_string(v) + " out of range (n=" +
                    std::to_string(nodes_.size()) + ")");
  }
}

const NodeInfo& Hypergraph::node(NodeId v) const {
  check_node(v);
  return nodes_[v];
}

const std::vector<std::uint32_t>& Hypergraph::incidence(NodeId v) const {
  check_node(v);
  return incidence_[v];
}

std::optional<NodeId> Hypergraph::find(const std::string& token) const {
  auto it = token_index_.find(token);
  if (it == token_index_.end()) return std::nullopt;
  return it->second;
}

NodeId Hypergraph::id_of(const std::string& token) const {
  auto id = find(token);
  if (!id) throw DataError("unknown node token '" + token + "'");
  return *id;
}

bool Hypergraph::contains(std::span<const NodeId> members) const {
  return edge_keys_.contains(tuple_key(members));
}

bool Hypergraph::edge_contains(std::size_t e, NodeId v) const {
  const auto& m = edges_[e].members;
  return std::find(m.begin(), m.end(), v) != m.end();
}

bool Hypergraph::co_incident(std::initializer_list<NodeId> nodes) const {
  if (nodes.size() == 0) return false;
  // Scan the shortest incidence list.
  NodeId pivot = *nodes.begin();
  for (NodeId v : nodes) {
    check_node(v);
    if (incidence_[v].size() < incidence_[pivot].size()) pivot = v;
  }
  for (auto e : incidence_[pivot]) {
    bool all = true;
    for (NodeId v : nodes) {
      if (v != pivot && !edge_contains(e, v)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

std::uint64_t Hypergraph::vocabulary_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& n : nodes_) {
    for (unsigned char c : n.token) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool is_blank_or_comment(const std::string& line) {
  auto pos = line.find_first_not_of(" \t\r\n");
  return pos == std::string::npos || line[pos] == '#';
}

std::string rstrip(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

}  // namespace

Hypergraph build_hypergraph(std::span<const std::string> edge_lines, const TypeMap& type_map) {
  std::vector<std::string> type_names = type_map.declared;
  auto type_index = [&](const std::string& name) -> TypeId {
    auto it = std::find(type_names.begin(), type_names.end(), name);
    if (it == type_names.end()) {
      type_names.push_back(name);
      return static_cast<TypeId>(type_names.size() - 1);
    }
    return static_cast<TypeId>(it - type_names.begin());
  };

  std::vector<NodeInfo> nodes;
  std::unordered_map<std::string, NodeId> ids;
  auto intern = [&](const std::string& token, std::size_t line_no) -> NodeId {
    if (auto it = ids.find(token); it != ids.end()) return it->second;
    TypeId t;
    if (auto tt = type_map.types.find(token); tt != type_map.types.end()) {
      t = type_index(tt->second);
    } else if (type_map.default_type) {
      t = type_index(*type_map.default_type);
    } else {
      throw DataError("line " + std::to_string(line_no) + ": token '" + token +
                      "' has no declared type");
    }
    const auto id = static_cast<NodeId>(nodes.size());
    nodes.push_back(NodeInfo{id, token, t});
    ids.emplace(token, id);
    return id;
  };

  std::vector<Hyperedge> edges;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const auto& line = edge_lines[i];
    if (is_blank_or_comment(line)) continue;
    auto tokens = split_ws(line);
    double weight = 1.0;
    if (!tokens.empty() && tokens.back().rfind("w=", 0) == 0) {
      const auto& w = tokens.back();
      auto [ptr, ec] = std::from_chars(w.data() + 2, w.data() + w.size(), weight);
      if (ec != std::errc{} || ptr != w.data() + w.size()) {
        throw DataError("line " + std::to_string(i + 1) + ": bad weight field '" + w + "'");
      }
      tokens.pop_back();
    }
    if (tokens.size() < 2) {
      throw DataError("line " + std::to_string(i + 1) + ": hyperedge needs at least 2 nodes");
    }
    Hyperedge e;
    e.weight = weight;
    for (const auto& tok : tokens) e.members.push_back(intern(tok, i + 1));
    edges.push_back(std::move(e));
  }
  // Typed tokens that never occur in an edge are isolated nodes.
  for (const auto& [token, type] : type_map.types) {
    if (!ids.contains(token)) intern(token, 0);
  }
  if (type_names.empty()) type_names.push_back("node");
  return Hypergraph(std::move(nodes), std::move(type_names), std::move(edges));
}

Hypergraph build_untyped_hypergraph(std::span<const std::string> edge_lines,
                                    const std::string& type_name) {
  TypeMap tm;
  tm.default_type = type_name;
  tm.declared = {type_name};
  return build_hypergraph(edge_lines, tm);
}

Hypergraph with_edges(const Hypergraph& g, std::vector<Hyperedge> edges) {
  return Hypergraph(g.nodes(), g.type_names(), std::move(edges));
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(rstrip(line));
  return lines;
}

TypeMap read_type_map(std::istream& in) {
  TypeMap tm;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    line = rstrip(line);
    if (is_blank_or_comment(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw DataError("type file line " + std::to_string(no) + ": expected token<TAB>type");
    }
    auto token = line.substr(0, tab);
    auto type = line.substr(tab + 1);
    if (auto [it, fresh] = tm.types.emplace(token, type); !fresh && it->second != type) {
      throw DataError("type file line " + std::to_string(no) + ": token '" + token +
                      "' declared with two types");
    }
    if (std::find(tm.declared.begin(), tm.declared.end(), type) == tm.declared.end()) {
      tm.declared.push_back(type);
    }
  }
  return tm;
}

std::map<std::string, std::vector<std::string>> read_label_file(std::istream& in) {
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    line = rstrip(line);
    if (is_blank_or_comment(line)) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      throw DataError("label file line " + std::to_string(no) + ": expected token<TAB>labels");
    }
    auto& labels = out[line.substr(0, tab)];
    std::istringstream ss(line.substr(tab + 1));
    std::string label;
    while (std::getline(ss, label, ',')) {
      if (!label.empty() && std::find(labels.begin(), labels.end(), label) == labels.end()) {
        labels.push_back(label);
      }
    }
  }
  return out;
}

double degree(const Hypergraph& g, NodeId v) {
  double d = 0.0;
  for (auto e : g.incidence(v)) d += g.edge(e).weight;
  return d;
}

std::vector<std::pair<NodeId, double>> adjacency_row_sparse(const Hypergraph& g, NodeId v) {
  std::map<NodeId, double> counts;
  for (auto e : g.incidence(v)) {
    for (NodeId u : g.edge(e).members) {
      if (u != v) counts[u] += 1.0;
    }
  }
  return {counts.begin(), counts.end()};
}

std::vector<double> adjacency_row(const Hypergraph& g, NodeId v) {
  std::vector<double> row(g.node_count(), 0.0);
  for (auto [u, c] : adjacency_row_sparse(g, v)) row[u] = c;
  return row;
}

std::vector<TupleSample> decompose_pairwise(const Hypergraph& g) {
  std::vector<TupleSample> out;
  std::unordered_set<std::vector<NodeId>, VectorHash> seen;
  for (const auto& e : g.edges()) {
    const auto& m = e.members;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j) {
        std::vector<NodeId> pair{m[i], m[j]};
        if (seen.insert(tuple_key(pair)).second) {
          out.push_back(TupleSample{std::move(pair), 1, TupleKind::Pairwise});
        }
      }
    }
  }
  return out;
}

Hypergraph with_pairwise(const Hypergraph& g) {
  std::vector<Hyperedge> edges = g.edges();
  for (auto& p : decompose_pairwise(g)) {
    if (!g.contains(p.members)) edges.push_back(Hyperedge{std::move(p.members), 1.0});
  }
  return with_edges(g, std::move(edges));
}

std::vector<TupleSample> positives_of(const Hypergraph& g) {
  std::vector<TupleSample> out;
  out.reserve(g.edge_count());
  for (const auto& e : g.edges()) {
    out.push_back(TupleSample{e.members, 1,
                              e.members.size() == 2 ? TupleKind::Pairwise : TupleKind::Hyper});
  }
  return out;
}

std::vector<TupleSample> sample_negatives(const Hypergraph& g,
                                          std::span<const TupleSample> positives, int ratio,
                                          std::uint64_t seed, int max_retries) {
  if (ratio < 1) throw UsageError("negative ratio must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<TupleSample> out;
  out.reserve(positives.size() * static_cast<std::size_t>(ratio));
  for (const auto& pos : positives) {
    const std::size_t k = pos.members.size();
    if (k < 2) throw DataError("positive tuple with fewer than 2 members");
    for (int r = 0; r < ratio; ++r) {
      bool done = false;
      for (int attempt = 0; attempt < max_retries && !done; ++attempt) {
        const std::size_t slot = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
        const NodeId old = pos.members[slot];
        const auto& pool = g.nodes_of_type(g.node_type(old));
        if (pool.size() < 2) {
          throw DataError("node type '" + g.type_names()[g.node_type(old)] +
                          "' has fewer than 2 nodes; cannot corrupt");
        }
        // Uniform over the pool minus the replaced node.
        std::size_t pick = std::uniform_int_distribution<std::size_t>(0, pool.size() - 2)(rng);
        NodeId cand = pool[pick];
        if (cand == old) cand = pool.back();
        auto members = pos.members;
        members[slot] = cand;
        if (std::find(pos.members.begin(), pos.members.end(), cand) != pos.members.end()) continue;
        if (g.contains(members)) continue;
        out.push_back(TupleSample{std::move(members), 0, pos.kind});
        done = true;
      }
      if (!done) {
        throw DataError("negative sampling retry budget exhausted (" +
                        std::to_string(max_retries) + " attempts); graph too dense for ratio " +
                        std::to_string(ratio));
      }
    }
  }
  return out;
}

bool is_outsider(const Hypergraph& g, std::span<const NodeId> tuple, std::size_t position) {
  if (position >= tuple.size()) return false;
  const NodeId out = tuple[position];
  std::vector<NodeId> rest;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (i != position) rest.push_back(tuple[i]);
  }
  for (NodeId u : rest) {
    if (g.co_incident({out, u})) return false;
  }
  if (rest.empty()) return false;
  // Some hyperedge holds all remaining members.
  for (auto e : g.incidence(rest.front())) {
    bool all = true;
    for (NodeId u : rest) all = all && g.edge_contains(e, u);
    if (all) return true;
  }
  return false;
}

std::vector<OutsiderInstance> generate_outsider_triplets(const Hypergraph& g,
                                                         std::span<const TupleSample> sources,
                                                         std::size_t count, std::uint64_t seed,
                                                         int max_retries) {
  std::vector<OutsiderInstance> out;
  if (sources.empty() || count == 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_source(0, sources.size() - 1);
  const std::size_t budget = count * static_cast<std::size_t>(max_retries);
  for (std::size_t attempt = 0; attempt < budget && out.size() < count; ++attempt) {
    const auto& src = sources[pick_source(rng)];
    const std::size_t k = src.members.size();
    if (k < 2) continue;
    const std::size_t slot = std::uniform_int_distribution<std::size_t>(0, k - 1)(rng);
    const auto& pool = g.nodes_of_type(g.node_type(src.members[slot]));
    const NodeId cand = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    auto members = src.members;
    if (std::find(members.begin(), members.end(), cand) != members.end()) continue;
    members[slot] = cand;
    if (!is_outsider(g, members, slot)) continue;
    out.push_back(OutsiderInstance{std::move(members), slot});
  }
  return out;
}

}  // namespace hsagnn
