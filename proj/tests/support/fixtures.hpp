#pragma once

// Shared builders for unit and acceptance tests.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hsagnn/autodiff.hpp"
#include "hsagnn/hypergraph.hpp"
#include "hsagnn/sagnn.hpp"

namespace hsagnn::testing {

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t(r, c);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

/// Toy graph: V={a,b,c,d}, E={(a,b,c),(b,c,d)}, unit weights, one type.
inline Hypergraph toy_graph() {
  const std::vector<std::string> lines{"a b c", "b c d"};
  return build_untyped_hypergraph(lines);
}

/// Random untyped hypergraph with n nodes and sizes in [2, max_size].
/// Weights are random when `weighted`.
inline Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t n, std::size_t edges,
                                    std::size_t max_size, bool weighted = false) {
  std::vector<NodeInfo> nodes;
  for (std::size_t i = 0; i < n; ++i) nodes.push_back({static_cast<NodeId>(i), "n" + std::to_string(i), 0});
  std::vector<Hyperedge> es;
  std::uniform_int_distribution<std::size_t> size_dist(2, max_size);
  std::uniform_int_distribution<NodeId> node_dist(0, static_cast<NodeId>(n - 1));
  std::uniform_real_distribution<double> w(0.5, 3.0);
  for (std::size_t e = 0; e < edges; ++e) {
    std::set<NodeId> members;
    const std::size_t k = std::min(size_dist(rng), n);
    while (members.size() < k) members.insert(node_dist(rng));
    es.push_back({std::vector<NodeId>(members.begin(), members.end()), weighted ? w(rng) : 1.0});
  }
  return Hypergraph(std::move(nodes), {"node"}, std::move(es));
}

/// Small model setup for gradient and invariance checks.
struct ModelFixture {
  ModelConfig cfg;
  ModelParams params;
  FeatureSource source;
  std::vector<TupleSample> samples;
};

/// Batch holding two tuples of every size in [min_size, max_size] with mixed labels.
inline ModelFixture model_fixture(Variant variant, FeatureMode mode, std::uint64_t seed,
                                  std::size_t min_size = 2, std::size_t max_size = 5) {
  std::mt19937_64 rng(seed);
  ModelFixture f;
  const std::size_t n = 10;
  f.cfg.variant = variant;
  f.cfg.feature_mode = mode;
  f.cfg.dim = 8;
  f.cfg.heads = 2;
  f.cfg.recon_weight = 0.3;
  if (mode == FeatureMode::Walk) {
    f.cfg.input_dim = f.cfg.feature_dim = 6;
    f.source = FeatureSource::from_table(random_tensor(n, 6, rng));
  } else {
    f.cfg.input_dim = n;
    f.cfg.feature_dim = 6;
    f.source = FeatureSource::from_adjacency(random_hypergraph(rng, n, 12, 4));
  }
  f.params = init_params(f.cfg, rng());
  // Nonzero output bias so node probabilities are not symmetric around 0.5.
  f.params.out_b(0, 0) = 0.3;
  if (!f.params.enc_b.empty()) {
    for (auto& v : f.params.enc_b.data()) v = std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
  }
  std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
  int label = 0;
  for (std::size_t k = min_size; k <= max_size; ++k) {
    for (int rep = 0; rep < 2; ++rep) {
      std::set<NodeId> m;
      while (m.size() < k) m.insert(node(rng));
      std::vector<NodeId> members(m.begin(), m.end());
      std::shuffle(members.begin(), members.end(), rng);
      f.samples.push_back({members, label, TupleKind::Hyper});
      label ^= 1;
    }
  }
  return f;
}

/// total_loss of the fixture as a function of every parameter tensor.
inline ad::ScalarFn fixture_loss(const ModelFixture& f) {
  return [&f](ad::Tape& tape, std::span<const ad::Var> vars) {
    ParamVars pv = bind_vars(f.cfg, vars);
    return build_loss(tape, f.cfg, pv, f.source, f.samples).total;
  };
}

inline std::vector<Tensor> param_list(const ModelParams& p) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : p.named()) out.push_back(*t);
  return out;
}

/// Writes g as "<stem>.edges" and "<stem>.types" under dir.
inline void write_graph_files(const Hypergraph& g, const std::filesystem::path& dir,
                              const std::string& stem) {
  std::ofstream edges(dir / (stem + ".edges"));
  for (const auto& e : g.edges()) {
    for (std::size_t i = 0; i < e.members.size(); ++i) {
      edges << (i ? " " : "") << g.node(e.members[i]).token;
    }
    edges << '\n';
  }
  std::ofstream types(dir / (stem + ".types"));
  for (const auto& n : g.nodes()) types << n.token << '\t' << g.type_names()[n.node_type] << '\n';
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hsagnn_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hsagnn::testing
