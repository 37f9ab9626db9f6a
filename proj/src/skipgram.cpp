#include "hsagnn/skipgram.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace hsagnn {

void SkipGramConfig::validate() const {
  if (dim < 1) throw UsageError("skip-gram dim must be >= 1");
  if (window < 1) throw UsageError("skip-gram window must be >= 1");
  if (epochs < 1) throw UsageError("skip-gram epochs must be >= 1");
  if (!(initial_lr > 0.0)) throw UsageError("skip-gram learning rate must be positive");
}

std::vector<std::pair<NodeId, NodeId>> context_pairs(std::span<const NodeId> walk,
                                                     std::size_t window) {
  std::vector<std::pair<NodeId, NodeId>> out;
  const std::size_t n = walk.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) out.emplace_back(walk[i], walk[j]);
    }
  }
  return out;
}

namespace {

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Relaxed atomic access lets parallel workers race on shared rows without
// undefined behaviour; single-threaded mode uses plain access.
template <bool Atomic>
double load(const double& x) {
  if constexpr (Atomic) {
    return std::atomic_ref<const double>(x).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Atomic>
void add_to(double& x, double delta) {
  if constexpr (Atomic) {
    std::atomic_ref<double> r(x);
    r.store(r.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
  } else {
    x += delta;
  }
}

struct Shared {
  Tensor& in;
  Tensor& out;
  std::discrete_distribution<std::size_t>& noise;
  const SkipGramConfig& cfg;
  double total_pairs;
};

struct PairStats {
  double loss = 0.0;
  std::size_t pairs = 0;
};

// Trains on every stride-th walk starting at `first`.
template <bool Parallel>
PairStats run_walks(Shared& s, std::span<const Walk> corpus, std::size_t first,
                    std::size_t stride, std::size_t pairs_before, std::mt19937_64& rng) {
  const std::size_t dim = s.cfg.dim;
  std::vector<double> grad(dim);
  PairStats stats;
  std::size_t processed = pairs_before;
  for (std::size_t w = first; w < corpus.size(); w += stride) {
    const auto& walk = corpus[w];
    for (const auto& [center, context] : context_pairs(walk, s.cfg.window)) {
      const double progress = static_cast<double>(processed) / s.total_pairs;
      const double lr = s.cfg.initial_lr * std::max(1.0 - progress, 1e-4);
      processed += stride;
      double* u = &s.in(center, 0);
      std::fill(grad.begin(), grad.end(), 0.0);
      double pair_loss = 0.0;
      for (std::size_t k = 0; k <= s.cfg.negatives_per_pair; ++k) {
        NodeId target;
        double label;
        if (k == 0) {
          target = context;
          label = 1.0;
        } else {
          target = static_cast<NodeId>(s.noise(rng));
          if (target == context) continue;
          label = 0.0;
        }
        double* c = &s.out(target, 0);
        double dot = 0.0;
        for (std::size_t d = 0; d < dim; ++d) dot += load<Parallel>(u[d]) * load<Parallel>(c[d]);
        pair_loss -= label > 0.5 ? log_sigmoid(dot) : log_sigmoid(-dot);
        const double gscale = (label - sigmoid(dot)) * lr;
        for (std::size_t d = 0; d < dim; ++d) {
          grad[d] += gscale * load<Parallel>(c[d]);
          add_to<Parallel>(c[d], gscale * load<Parallel>(u[d]));
        }
      }
      for (std::size_t d = 0; d < dim; ++d) add_to<Parallel>(u[d], grad[d]);
      stats.loss += pair_loss;
      ++stats.pairs;
    }
  }
  return stats;
}

// Mean per-pair objective over the whole corpus with noise draws fixed by
// `seed`, so successive epochs are compared on identical samples.
double corpus_objective(const Tensor& in, const Tensor& out, std::span<const Walk> corpus,
                        const SkipGramConfig& cfg, std::discrete_distribution<std::size_t> noise,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t dim = cfg.dim;
  double loss = 0.0;
  std::size_t pairs = 0;
  auto dot = [&](NodeId a, NodeId b) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += in(a, d) * out(b, d);
    return s;
  };
  for (const auto& walk : corpus) {
    for (const auto& [center, context] : context_pairs(walk, cfg.window)) {
      loss -= log_sigmoid(dot(center, context));
      for (std::size_t k = 0; k < cfg.negatives_per_pair; ++k) {
        const auto target = static_cast<NodeId>(noise(rng));
        if (target == context) continue;
        loss -= log_sigmoid(-dot(center, target));
      }
      ++pairs;
    }
  }
  return loss / static_cast<double>(pairs);
}

}  // namespace

EmbeddingTable train_skipgram(std::span<const Walk> corpus, std::size_t node_count,
                              const SkipGramConfig& cfg) {
  cfg.validate();
  std::size_t total = 0;
  std::vector<double> freq(node_count, 0.0);
  for (const auto& walk : corpus) {
    for (NodeId v : walk) {
      if (v >= node_count) throw DataError("corpus node id out of range");
      freq[v] += 1.0;
    }
    total += context_pairs(walk, cfg.window).size();
  }
  if (corpus.empty() || total == 0) throw DataError("skip-gram: empty corpus");

  std::mt19937_64 rng(cfg.seed);
  EmbeddingTable table;
  table.rows = Tensor(node_count, cfg.dim);
  table.context_rows = Tensor(node_count, cfg.dim, 0.0);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(cfg.dim),
                                              0.5 / static_cast<double>(cfg.dim));
  for (auto& v : table.rows.data()) v = init(rng);

  for (auto& f : freq) f = std::pow(f, 0.75);
  std::discrete_distribution<std::size_t> noise(freq.begin(), freq.end());

  Shared shared{table.rows, table.context_rows, noise, cfg,
                static_cast<double>(total) * static_cast<double>(cfg.epochs)};
  const std::uint64_t eval_seed = rng();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::size_t before = epoch * total;
    if (cfg.threads <= 1) {
      auto stats = run_walks<false>(shared, corpus, 0, 1, before, rng);
      table.online_loss.push_back(stats.loss / static_cast<double>(stats.pairs));
    } else {
      const std::size_t workers = cfg.threads;
      std::vector<PairStats> stats(workers);
      std::vector<std::uint64_t> seeds(workers);
      for (auto& s : seeds) s = rng();
      {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
          pool.emplace_back([&, t] {
            std::mt19937_64 local(seeds[t]);
            auto noise_copy = noise;
            Shared mine{table.rows, table.context_rows, noise_copy, cfg, shared.total_pairs};
            stats[t] = run_walks<true>(mine, corpus, t, workers, before + t, local);
          });
        }
      }
      double loss = 0.0;
      std::size_t pairs = 0;
      for (const auto& s : stats) {
        loss += s.loss;
        pairs += s.pairs;
      }
      table.online_loss.push_back(loss / static_cast<double>(pairs));
    }
    table.epoch_loss.push_back(
        corpus_objective(table.rows, table.context_rows, corpus, cfg, noise, eval_seed));
  }
  if (!table.rows.all_finite()) throw DataError("skip-gram produced non-finite embeddings");
  return table;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double baseline_tuple_score(const Tensor& embeddings, std::span<const NodeId> tuple,
                            BaselineMode mode) {
  if (tuple.size() < 2) throw UsageError("baseline score needs a tuple of size >= 2");
  double sum = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    for (std::size_t j = i + 1; j < tuple.size(); ++j) {
      const double s = cosine_similarity(embeddings.row_span(tuple[i]), embeddings.row_span(tuple[j]));
      sum += s;
      mn = std::min(mn, s);
      ++pairs;
    }
  }
  return mode == BaselineMode::Mean ? sum / static_cast<double>(pairs) : mn;
}

void write_embeddings(std::ostream& out, const Hypergraph& g, const Tensor& rows) {
  out << rows.rows() << ' ' << rows.cols() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    out << g.node(static_cast<NodeId>(i)).token;
    for (double v : rows.row_span(i)) out << ' ' << v;
    out << '\n';
  }
}

Tensor read_embeddings(std::istream& in, const Hypergraph& g) {
  std::size_t n = 0, dim = 0;
  std::string header;
  if (!std::getline(in, header)) throw DataError("embedding file: missing header");
  std::istringstream hs(header);
  if (!(hs >> n >> dim) || dim == 0) throw DataError("embedding file: bad header '" + header + "'");
  Tensor rows(g.node_count(), dim);
  std::vector<bool> seen(g.node_count(), false);
  std::string line;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    auto id = g.find(token);
    if (!id) throw DataError("embedding file: unknown token '" + token + "'");
    for (std::size_t d = 0; d < dim; ++d) {
      if (!(ls >> rows(*id, d))) throw DataError("embedding file: short row for '" + token + "'");
    }
    seen[*id] = true;
    ++count;
  }
  if (count != n) throw DataError("embedding file: header says " + std::to_string(n) + " rows");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DataError("embedding file: no row for '" + g.node(static_cast<NodeId>(i)).token + "'");
  }
  return rows;
}

}  // namespace hsagnn
