#include "hsagnn/walker.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace hsagnn {

void WalkConfig::validate() const {
  if (!(p > 0.0) || !(q > 0.0)) throw UsageError("walk p and q must be positive");
  if (walk_length < 2) throw UsageError("walk length must be >= 2");
  if (walks_per_vertex < 1) throw UsageError("walks per vertex must be >= 1");
}

Distribution first_order_mass(const Hypergraph& g, NodeId x) {
  std::map<NodeId, double> mass;
  for (auto e : g.incidence(x)) {
    const auto& edge = g.edge(e);
    const double share = edge.weight / static_cast<double>(edge.members.size());
    for (NodeId t : edge.members) {
      if (t != x) mass[t] += share;
    }
  }
  Distribution d;
  d.reserve(mass.size());
  for (auto [t, m] : mass) {
    if (m > 0.0) d.push_back({t, m});
  }
  return d;
}

namespace {

Distribution normalized(Distribution d) {
  double z = 0.0;
  for (const auto& tr : d) z += tr.prob;
  for (auto& tr : d) tr.prob /= z;
  return d;
}

}  // namespace

Distribution first_order_distribution(const Hypergraph& g, NodeId x) {
  auto d = first_order_mass(g, x);
  if (d.empty()) {
    throw DataError("node '" + g.node(x).token + "' has no successor (isolated)");
  }
  return normalized(std::move(d));
}

double second_order_bias(const Hypergraph& g, NodeId t, NodeId v, NodeId x, double p,
                         double q) {
  // Repeated ids collapse: a hyperedge holds {t, v, x} as a set.
  if (t == v || v == x) {
    if (g.co_incident({t, x})) return 1.0 / p;
  } else if (t == x) {
    if (g.co_incident({v, x})) return 1.0 / p;
  } else if (g.co_incident({t, v, x})) {
    return 1.0 / p;
  }
  if (g.co_incident({t, x})) return 1.0;
  return 1.0 / q;
}

Distribution transition_distribution(const Hypergraph& g, NodeId v, NodeId x,
                                     const WalkConfig& cfg) {
  if (!g.co_incident({v, x}) || v == x) {
    throw UsageError("transition_distribution: '" + g.node(v).token + "' and '" +
                     g.node(x).token + "' share no hyperedge");
  }
  auto d = first_order_mass(g, x);
  for (auto& tr : d) tr.prob *= second_order_bias(g, tr.node, v, x, cfg.p, cfg.q);
  return normalized(std::move(d));
}

WalkSampler::WalkSampler(const Hypergraph& g, double p, double q) : g_(g), p_(p), q_(q) {}

WalkSampler::Table WalkSampler::make_table(const Distribution& d) {
  Table t;
  double acc = 0.0;
  for (const auto& tr : d) {
    acc += tr.prob;
    t.nodes.push_back(tr.node);
    t.cumulative.push_back(acc);
  }
  return t;
}

NodeId WalkSampler::draw(const Table& t, std::mt19937_64& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, t.cumulative.back())(rng);
  auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), u);
  if (it == t.cumulative.end()) --it;
  return t.nodes[static_cast<std::size_t>(it - t.cumulative.begin())];
}

bool WalkSampler::first_step(NodeId x, std::mt19937_64& rng, NodeId& out) {
  auto it = first_.find(x);
  if (it == first_.end()) it = first_.emplace(x, make_table(first_order_mass(g_, x))).first;
  if (it->second.nodes.empty()) return false;
  out = draw(it->second, rng);
  return true;
}

bool WalkSampler::next_step(NodeId v, NodeId x, std::mt19937_64& rng, NodeId& out) {
  const std::uint64_t key = (static_cast<std::uint64_t>(v) << 32) | x;
  auto it = second_.find(key);
  if (it == second_.end()) {
    auto d = first_order_mass(g_, x);
    for (auto& tr : d) tr.prob *= second_order_bias(g_, tr.node, v, x, p_, q_);
    it = second_.emplace(key, make_table(d)).first;
  }
  if (it->second.nodes.empty()) return false;
  out = draw(it->second, rng);
  return true;
}

Walk simulate_walk(WalkSampler& sampler, NodeId start, std::size_t length, std::uint64_t seed,
                   std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  Walk walk{start};
  walk.reserve(length);
  NodeId next = 0;
  if (length < 2 || !sampler.first_step(start, rng, next)) return walk;
  walk.push_back(next);
  while (walk.size() < length) {
    if (!sampler.next_step(walk[walk.size() - 2], walk.back(), rng, next)) break;
    walk.push_back(next);
  }
  return walk;
}

WalkCorpus simulate_walks_from(const Hypergraph& g, const WalkConfig& cfg,
                               std::span<const NodeId> starts) {
  cfg.validate();
  WalkCorpus corpus;
  std::vector<NodeId> active;
  for (NodeId s : starts) {
    if (first_order_mass(g, s).empty()) {
      ++corpus.isolated_skipped;
    } else {
      active.push_back(s);
    }
  }
  const std::size_t per = cfg.walks_per_vertex;
  corpus.walks.resize(active.size() * per);
  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.threads, active.size()));
  auto work = [&](std::size_t worker) {
    WalkSampler sampler(g, cfg.p, cfg.q);
    for (std::size_t i = worker; i < active.size(); i += threads) {
      for (std::size_t w = 0; w < per; ++w) {
        corpus.walks[i * per + w] = simulate_walk(sampler, active[i], cfg.walk_length, cfg.seed, w);
      }
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  return corpus;
}

WalkCorpus simulate_walks(const Hypergraph& g, const WalkConfig& cfg) {
  std::vector<NodeId> all(g.node_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<NodeId>(i);
  return simulate_walks_from(g, cfg, all);
}

void write_corpus(std::ostream& out, const Hypergraph& g, const WalkCorpus& corpus) {
  for (const auto& walk : corpus.walks) {
    for (std::size_t i = 0; i < walk.size(); ++i) {
      if (i) out << ' ';
      out << g.node(walk[i]).token;
    }
    out << '\n';
  }
}

std::vector<Walk> read_corpus(std::istream& in, const Hypergraph& g) {
  std::vector<Walk> walks;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    Walk w;
    while (ss >> tok) w.push_back(g.id_of(tok));
    if (!w.empty()) walks.push_back(std::move(w));
  }
  return walks;
}

}  // namespace hsagnn
