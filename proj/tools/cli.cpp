#include "cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hsagnn/errors.hpp"
#include "hsagnn/evaluator.hpp"
#include "hsagnn/experiments.hpp"
#include "hsagnn/hypergraph.hpp"
#include "hsagnn/sagnn.hpp"
#include "hsagnn/skipgram.hpp"
#include "hsagnn/trainer.hpp"
#include "hsagnn/walker.hpp"

namespace hsagnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

struct Options {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool deterministic = false;
  std::string out_dir = ".";

  std::string edges, types, default_type;

  WalkConfig walk;
  SkipGramConfig skipgram;

  std::string feature_mode = "walk";
  std::string variant = "standard";
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t feature_dim = 64;
  double recon_weight = 0.1;

  TrainConfig train;
  std::string pool = "mean";

  std::string checkpoint, corpus, embeddings, labels, tuples, history;
  std::string ratio = "4:1";
  std::uint64_t split_seed = 0;
  std::size_t repeats = 1;
  std::string label_mode = "multiclass";
  double train_fraction = 0.5;
  std::size_t generate = 0;
  std::size_t topk = 2;
  bool fine_tune = false;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

class Run {
 public:
  Run(const Options& o, std::ostream& out, const CLI::App& app) : o_(o), out_(out), app_(app) {}

  const Options& opt() const { return o_; }
  std::ostream& out() { return out_; }
  json& manifest() { return manifest_; }

  bool given(const std::string& flag) const { return app_.count(flag) > 0; }

  void input(const std::string& key, const std::string& path) {
    manifest_["inputs"][key] = {{"path", path}, {"sha256", sha256_file(path)}};
  }

  fs::path out_path(const std::string& name) const { return fs::path(o_.out_dir) / name; }

  void write(const std::string& name, const std::string& content) {
    const auto path = out_path(name);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << content;
    f.close();
    output(name);
  }

  void output(const std::string& name) { manifest_["outputs"][name] = sha256_file(out_path(name)); }

  void lap(const std::string& phase) {
    const auto now = std::chrono::steady_clock::now();
    manifest_["timings"][phase] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  const Options& o_;
  std::ostream& out_;
  const CLI::App& app_;
  json manifest_ = json::object();
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError(flag + " is required for this command");
}

Hypergraph load_graph(Run& run) {
  const auto& o = run.opt();
  require(o.edges, "--edges");
  auto in = open_input(o.edges);
  const auto lines = read_lines(in);
  run.input("edges", o.edges);
  if (o.types.empty()) {
    return build_untyped_hypergraph(lines, o.default_type.empty() ? "node" : o.default_type);
  }
  auto tin = open_input(o.types);
  auto type_map = read_type_map(tin);
  run.input("types", o.types);
  if (!o.default_type.empty()) type_map.default_type = o.default_type;
  return build_hypergraph(lines, type_map);
}

std::size_t effective_threads(const Options& o) { return o.deterministic ? 1 : o.threads; }

FeatureSettings feature_settings(const Options& o) {
  FeatureSettings s;
  s.walk = o.walk;
  s.walk.seed = o.seed;
  s.walk.threads = effective_threads(o);
  s.skipgram = o.skipgram;
  s.skipgram.seed = o.seed;
  s.skipgram.threads = effective_threads(o);
  s.walk.validate();
  s.skipgram.validate();
  return s;
}

ModelConfig model_config(const Options& o) {
  ModelConfig m;
  m.feature_mode = parse_feature_mode(o.feature_mode);
  m.variant = parse_variant(o.variant);
  m.dim = o.dim;
  m.heads = o.heads;
  m.feature_dim = o.feature_dim;
  m.recon_weight = o.recon_weight;
  m.pool = parse_pool_mode(o.pool);
  return m;
}

TrainConfig train_config(const Options& o) {
  TrainConfig t = o.train;
  t.seed = o.seed;
  t.pool = parse_pool_mode(o.pool);
  t.validate();
  return t;
}

struct LoadedModel {
  Checkpoint ckpt;
  FeatureSource features;
  TrainConfig train;
  FeatureSettings feature_settings;
};

LoadedModel load_model(Run& run, const Hypergraph& g) {
  const auto& o = run.opt();
  require(o.checkpoint, "--checkpoint");
  LoadedModel m;
  m.ckpt = load_checkpoint(o.checkpoint, g.vocabulary_hash());
  run.input("checkpoint", o.checkpoint);
  if (m.ckpt.features) {
    m.features = FeatureSource::from_table(*m.ckpt.features);
  } else {
    m.features = FeatureSource::from_adjacency(g);
  }
  if (m.features.width() != m.ckpt.model.input_dim) {
    throw DataError("checkpoint input width does not match the supplied graph");
  }
  const auto& extra = m.ckpt.extra;
  m.train = extra.contains("train") ? train_config_from_json(extra.at("train")) : train_config(o);
  m.feature_settings = extra.contains("features") ? feature_settings_from_json(extra.at("features"))
                                                  : feature_settings(o);
  return m;
}

FeatureSource make_features(Run& run, const Hypergraph& g, FeatureMode mode,
                            const FeatureSettings& s) {
  const auto& o = run.opt();
  if (mode == FeatureMode::Walk && !o.embeddings.empty()) {
    auto in = open_input(o.embeddings);
    run.input("embeddings", o.embeddings);
    return FeatureSource::from_table(read_embeddings(in, g));
  }
  return build_features(g, mode, s);
}

std::pair<int, int> parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  int a = 0, b = 0;
  if (colon == std::string::npos) throw UsageError("--ratio must look like 4:1");
  auto r1 = std::from_chars(s.data(), s.data() + colon, a);
  auto r2 = std::from_chars(s.data() + colon + 1, s.data() + s.size(), b);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != s.data() + colon ||
      r2.ptr != s.data() + s.size() || a < 1 || b < 1) {
    throw UsageError("--ratio must look like 4:1");
  }
  return {a, b};
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream s;
  s << "epoch,train_loss,val_auc,val_aupr,hyper_val_auc,edge_val_auc\n";
  for (const auto& r : history) {
    s << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_auc) << ',' << num(r.val_aupr)
      << ',' << (r.hyper_val_auc ? num(*r.hyper_val_auc) : "") << ','
      << (r.edge_val_auc ? num(*r.edge_val_auc) : "") << '\n';
  }
  return s.str();
}

void write_reports(Run& run, const MetricReport& report) {
  const std::vector<MetricReport> reports{report};
  std::ostringstream text, csv;
  write_report_text(text, reports);
  write_report_csv(csv, reports);
  run.write("report.txt", text.str());
  run.write("report.csv", csv.str());
  run.out() << text.str();
}

std::string join_tokens(const Hypergraph& g, std::span<const NodeId> ids, char sep) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += sep;
    s += g.node(ids[i]).token;
  }
  return s;
}

// Commands.

void cmd_ingest(Run& run) {
  const auto g = load_graph(run);
  run.lap("load");
  std::ostringstream edges, types;
  for (const auto& e : g.edges()) {
    edges << join_tokens(g, e.members, ' ');
    if (e.weight != 1.0) edges << " w=" << num(e.weight);
    edges << '\n';
  }
  for (const auto& n : g.nodes()) types << n.token << '\t' << g.type_names()[n.node_type] << '\n';
  run.write("graph.edges", edges.str());
  run.write("graph.types", types.str());

  std::map<std::size_t, std::size_t> sizes;
  for (const auto& e : g.edges()) ++sizes[e.members.size()];
  json summary = {{"nodes", g.node_count()},
                  {"edges", g.edge_count()},
                  {"vocabulary_hash", std::to_string(g.vocabulary_hash())}};
  for (std::size_t t = 0; t < g.type_count(); ++t) {
    summary["types"][g.type_names()[t]] = g.nodes_of_type(static_cast<TypeId>(t)).size();
  }
  for (const auto& [k, c] : sizes) summary["edge_sizes"][std::to_string(k)] = c;
  run.write("summary.json", summary.dump(2) + "\n");
  run.manifest()["summary"] = summary;
  run.out() << "nodes: " << g.node_count() << "\nedges: " << g.edge_count()
            << "\ntypes: " << g.type_count() << '\n';
}

void cmd_walk(Run& run) {
  const auto g = load_graph(run);
  const auto s = feature_settings(run.opt());
  run.manifest()["resolved"] = to_json(s);
  const auto corpus = simulate_walks(g, s.walk);
  run.lap("walk");
  std::ostringstream text;
  write_corpus(text, g, corpus);
  run.write("corpus.txt", text.str());
  run.manifest()["summary"] = {{"walks", corpus.walks.size()},
                               {"isolated_skipped", corpus.isolated_skipped}};
  run.out() << "walks: " << corpus.walks.size() << "\nisolated_skipped: "
            << corpus.isolated_skipped << '\n';
}

void cmd_embed(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  const auto s = feature_settings(o);
  run.manifest()["resolved"] = to_json(s);
  std::vector<Walk> walks;
  if (!o.corpus.empty()) {
    auto in = open_input(o.corpus);
    walks = read_corpus(in, g);
    run.input("corpus", o.corpus);
  } else {
    walks = simulate_walks(g, s.walk).walks;
    run.lap("walk");
  }
  const auto table = train_skipgram(walks, g.node_count(), s.skipgram);
  run.lap("skipgram");
  std::ostringstream emb, loss;
  write_embeddings(emb, g, table.rows);
  loss << "epoch,objective,online_loss\n";
  for (std::size_t e = 0; e < table.epoch_loss.size(); ++e) {
    loss << e + 1 << ',' << num(table.epoch_loss[e]) << ',' << num(table.online_loss[e]) << '\n';
  }
  run.write("embeddings.txt", emb.str());
  run.write("skipgram_loss.csv", loss.str());
  run.out() << "nodes: " << g.node_count() << "\ndim: " << table.dim() << '\n';
}

void cmd_train(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  const auto s = feature_settings(o);
  const auto t = train_config(o);
  auto model = model_config(o);
  model.pool = t.pool;
  const auto features = make_features(run, g, model.feature_mode, s);
  model = fit_model_dims(model, features);
  model.validate();
  run.manifest()["resolved"] = {{"model", to_json(model)}, {"train", to_json(t)}, {"features", to_json(s)}};
  run.lap("features");

  auto on_epoch = [&](const EpochRecord& r, const ModelParams&) {
    run.out() << "epoch " << r.epoch << " loss " << num(r.train_loss) << " val_auc "
              << num(r.val_auc) << '\n';
    return true;
  };
  const auto result = train(g, features, model, t, nullptr, on_epoch);
  run.lap("train");

  Checkpoint ckpt;
  ckpt.model = model;
  ckpt.params = result.params;
  ckpt.node_count = g.node_count();
  ckpt.vocabulary_hash = g.vocabulary_hash();
  ckpt.epoch = result.history.size();
  ckpt.seed = o.seed;
  if (!features.is_adjacency()) ckpt.features = features.table();
  ckpt.extra = {{"train", to_json(t)},
                {"features", to_json(s)},
                {"edges_sha256", run.manifest()["inputs"]["edges"]["sha256"]}};
  save_checkpoint(ckpt, run.out_path("model.ckpt"));
  run.output("model.ckpt");
  run.write("history.csv", history_csv(result.history));
}

void cmd_eval_reconstruction(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  const auto m = load_model(run, g);
  const auto positives = positives_of(g);
  auto report = score_against_negatives("reconstruction", m.ckpt.model, m.ckpt.params, m.features,
                                        g, positives, o.train.neg_ratio, o.seed);
  report.metadata["seed"] = std::to_string(o.seed);
  report.metadata["variant"] = to_string(m.ckpt.model.variant);
  report.metadata["feature_mode"] = to_string(m.ckpt.model.feature_mode);
  report.metadata["vocabulary_hash"] = std::to_string(g.vocabulary_hash());
  run.lap("score");
  write_reports(run, report);
}

void cmd_eval_linkpred(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  const auto [ratio_train, ratio_test] = parse_ratio(o.ratio);
  ExperimentConfig cfg;
  if (!o.checkpoint.empty()) {
    const auto m = load_model(run, g);
    cfg.model = m.ckpt.model;
    cfg.train = m.train;
    cfg.features = m.feature_settings;
  } else {
    cfg.model = model_config(o);
    cfg.train = train_config(o);
    cfg.features = feature_settings(o);
  }
  cfg.eval_neg_ratio = o.train.neg_ratio;
  if (o.repeats == 0) throw UsageError("--repeats must be >= 1");
  const std::uint64_t split_seed = run.given("--split-seed") ? o.split_seed : o.seed;
  run.manifest()["resolved"] = {{"model", to_json(cfg.model)},
                                {"train", to_json(cfg.train)},
                                {"features", to_json(cfg.features)},
                                {"split_seed", split_seed}};
  std::vector<MetricReport> runs;
  for (std::size_t r = 0; r < o.repeats; ++r) {
    ExperimentConfig rc = cfg;
    rc.train.seed = cfg.train.seed + r;
    rc.features.walk.seed = cfg.features.walk.seed + r;
    rc.features.skipgram.seed = cfg.features.skipgram.seed + r;
    auto outcome = run_link_prediction(g, rc, ratio_train, ratio_test, split_seed + r);
    run.out() << "run " << r << " auroc " << num(outcome.report.get("auroc")) << '\n';
    runs.push_back(std::move(outcome.report));
  }
  run.lap("runs");
  write_reports(run, aggregate_reports(runs));
}

void cmd_eval_nodeclass(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  require(o.labels, "--labels");
  Tensor reps;
  if (!o.checkpoint.empty()) {
    const auto m = load_model(run, g);
    reps = node_representations(m.ckpt.model, m.ckpt.params, m.features);
  } else if (!o.embeddings.empty()) {
    auto in = open_input(o.embeddings);
    reps = read_embeddings(in, g);
    run.input("embeddings", o.embeddings);
  } else {
    throw UsageError("eval-nodeclass needs --checkpoint or --embeddings");
  }
  auto lin = open_input(o.labels);
  const auto label_map = read_label_file(lin);
  run.input("labels", o.labels);
  const LabelMode mode = o.label_mode == "multilabel" ? LabelMode::Multilabel : LabelMode::Multiclass;

  std::set<std::string> names;
  for (const auto& [tok, ls] : label_map) names.insert(ls.begin(), ls.end());
  const std::vector<std::string> classes(names.begin(), names.end());
  auto class_id = [&](const std::string& c) {
    return static_cast<int>(std::lower_bound(classes.begin(), classes.end(), c) - classes.begin());
  };
  std::vector<NodeId> rows;
  std::vector<std::vector<int>> labels;
  for (const auto& [tok, ls] : label_map) {
    const auto id = g.find(tok);
    if (!id) throw DataError("label file names unknown node '" + tok + "'");
    if (mode == LabelMode::Multiclass && ls.size() != 1) {
      throw DataError("node '" + tok + "' has " + std::to_string(ls.size()) +
                      " labels in multiclass mode");
    }
    rows.push_back(*id);
    std::vector<int> ids;
    for (const auto& l : ls) ids.push_back(class_id(l));
    labels.push_back(std::move(ids));
  }
  Tensor x(rows.size(), reps.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = reps.row_span(rows[i]);
    std::copy(src.begin(), src.end(), x.row_span(i).begin());
  }
  if (o.repeats == 0) throw UsageError("--repeats must be >= 1");
  std::vector<MetricReport> runs;
  for (std::size_t r = 0; r < o.repeats; ++r) {
    const auto res = evaluate_node_classification(x, labels, classes.size(), mode,
                                                  o.train_fraction, o.seed + r);
    MetricReport rep;
    rep.task = "node_classification";
    rep.set("micro_f1", res.f1.micro);
    rep.set("macro_f1", res.f1.macro);
    rep.set("train_size", static_cast<double>(res.train_size));
    rep.set("test_size", static_cast<double>(res.test_size));
    rep.set("unseen_classes", static_cast<double>(res.unseen_classes.size()));
    rep.metadata["seed"] = std::to_string(o.seed);
    rep.metadata["label_mode"] = o.label_mode;
    rep.metadata["classes"] = std::to_string(classes.size());
    runs.push_back(std::move(rep));
  }
  run.lap("classify");
  write_reports(run, aggregate_reports(runs));
}

struct LabelledTuple {
  std::vector<NodeId> members;
  std::optional<NodeId> outsider;
};

std::vector<LabelledTuple> read_tuples(const Hypergraph& g, const std::string& path) {
  auto in = open_input(path);
  std::vector<LabelledTuple> out;
  for (const auto& line : read_lines(in)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    std::string tok;
    LabelledTuple t;
    std::optional<std::string> outsider;
    while (s >> tok) {
      if (tok.rfind("outsider=", 0) == 0) {
        outsider = tok.substr(9);
        continue;
      }
      const auto id = g.find(tok);
      if (!id) throw DataError("tuple names unknown node '" + tok + "'");
      t.members.push_back(*id);
    }
    if (t.members.empty()) continue;
    if (outsider) {
      const auto id = g.find(*outsider);
      if (!id || std::find(t.members.begin(), t.members.end(), *id) == t.members.end()) {
        throw DataError("outsider '" + *outsider + "' is not a member of its tuple");
      }
      t.outsider = *id;
    }
    out.push_back(std::move(t));
  }
  if (out.empty()) throw DataError("no tuples in " + path);
  return out;
}

void cmd_outsider(Run& run) {
  const auto& o = run.opt();
  const auto g = load_graph(run);
  const auto m = load_model(run, g);
  std::vector<LabelledTuple> tuples;
  if (!o.tuples.empty()) {
    tuples = read_tuples(g, o.tuples);
    run.input("tuples", o.tuples);
  } else if (o.generate > 0) {
    std::vector<TupleSample> sources;
    for (auto& p : positives_of(g)) {
      if (p.members.size() >= 3) sources.push_back(std::move(p));
    }
    for (const auto& inst : generate_outsider_triplets(g, sources, o.generate, o.seed)) {
      tuples.push_back({inst.members, inst.outsider()});
    }
    if (tuples.empty()) throw DataError("no outsider instances could be generated");
  } else {
    throw UsageError("outsider needs --tuples or --generate");
  }
  if (o.topk == 0) throw UsageError("--topk must be >= 1");

  MetricReport report;
  report.task = "outsider";
  report.metadata["seed"] = std::to_string(o.seed);
  report.set("tuples", static_cast<double>(tuples.size()));
  std::ostringstream rankings;
  rankings << "index\tpool\tranking\toutsider\n";

  auto rank_all = [&](const ModelConfig& model, const ModelParams& params) {
    const std::string pool = to_string(model.pool);
    std::vector<std::vector<NodeId>> labelled_rankings;
    std::vector<NodeId> truth;
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const auto ranking = predict_outsider(model, params, m.features, tuples[i].members);
      rankings << i << '\t' << pool << '\t' << join_tokens(g, ranking, ',') << '\t'
               << (tuples[i].outsider ? g.node(*tuples[i].outsider).token : "-") << '\n';
      if (tuples[i].outsider) {
        labelled_rankings.push_back(ranking);
        truth.push_back(*tuples[i].outsider);
      }
    }
    report.set("labelled", static_cast<double>(truth.size()));
    if (truth.empty()) return;
    for (std::size_t k = 1; k <= o.topk; ++k) {
      report.set(pool + "_pool.top" + std::to_string(k),
                 outsider_topk_accuracy(labelled_rankings, truth, k));
    }
  };

  rank_all(m.ckpt.model, m.ckpt.params);
  run.lap("rank");
  if (o.fine_tune) {
    TrainConfig t = m.train;
    if (run.given("--fine-tune-epochs")) t.fine_tune_epochs = o.train.fine_tune_epochs;
    if (run.given("--outsider-ce")) t.outsider_ce_weight = o.train.outsider_ce_weight;
    t.validate();
    run.manifest()["resolved"] = {{"fine_tune", to_json(t)}};
    const auto tuned = fine_tune_min_pool(m.ckpt.params, g, m.features, m.ckpt.model, t);
    run.lap("fine_tune");
    Checkpoint ckpt = m.ckpt;
    ckpt.model.pool = PoolMode::Min;
    ckpt.params = tuned.params;
    ckpt.epoch = m.ckpt.epoch + tuned.history.size();
    ckpt.extra["fine_tune"] = to_json(t);
    save_checkpoint(ckpt, run.out_path("model_min.ckpt"));
    run.output("model_min.ckpt");
    rank_all(ckpt.model, ckpt.params);
    run.lap("rank_min");
  }
  run.write("rankings.tsv", rankings.str());
  write_reports(run, report);
}

std::vector<Series> read_history(const std::string& path) {
  auto in = open_input(path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty history file " + path);
  std::vector<std::string> cols;
  {
    std::istringstream s(header);
    std::string c;
    while (std::getline(s, c, ',')) cols.push_back(c);
  }
  if (cols.empty() || cols[0] != "epoch") throw DataError("history file lacks an epoch column");
  std::vector<Series> series(cols.size() - 1);
  for (std::size_t i = 1; i < cols.size(); ++i) series[i - 1].name = cols[i];
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    cells.resize(cols.size());
    double epoch = 0.0;
    try {
      epoch = std::stod(cells[0]);
    } catch (const std::exception&) {
      throw DataError("bad epoch in history line: " + line);
    }
    for (std::size_t i = 1; i < cols.size(); ++i) {
      double v = std::nan("");
      if (!cells[i].empty() && cells[i] != "nan") {
        try {
          v = std::stod(cells[i]);
        } catch (const std::exception&) {
          throw DataError("bad value in history line: " + line);
        }
      }
      series[i - 1].x.push_back(epoch);
      series[i - 1].y.push_back(v);
    }
  }
  std::erase_if(series, [](const Series& s) {
    return std::none_of(s.y.begin(), s.y.end(), [](double v) { return std::isfinite(v); });
  });
  return series;
}

void cmd_export_plot(Run& run) {
  const auto& o = run.opt();
  if (o.history.empty() && o.checkpoint.empty()) {
    throw UsageError("export-plot needs --history or --checkpoint");
  }
  if (!o.history.empty()) {
    const auto series = read_history(o.history);
    run.input("history", o.history);
    std::ostringstream csv;
    csv << "series,epoch,value\n";
    for (const auto& s : series) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        csv << s.name << ',' << num(s.x[i]) << ',' << num(s.y[i]) << '\n';
      }
    }
    run.write("curves.csv", csv.str());
    run.write("curves.svg", svg_line_chart(series, "Training curves", "epoch", "value"));
  }
  if (!o.checkpoint.empty()) {
    const auto g = load_graph(run);
    const auto m = load_model(run, g);
    const auto reps = node_representations(m.ckpt.model, m.ckpt.params, m.features);
    const auto proj = project_2d(reps, o.seed);
    std::ostringstream csv;
    csv << "token,type,x,y\n";
    std::vector<int> groups;
    for (const auto& n : g.nodes()) {
      csv << n.token << ',' << g.type_names()[n.node_type] << ',' << num(proj.coords(n.id, 0))
          << ',' << num(proj.coords(n.id, 1)) << '\n';
      groups.push_back(n.node_type);
    }
    run.write("projection.csv", csv.str());
    run.write("projection.svg", svg_scatter(proj.coords, groups, "Node representations"));
    run.manifest()["summary"] = {{"variance_ratio", proj.variance_ratio},
                                 {"degenerate", proj.degenerate}};
  }
  run.lap("plot");
}

using Command = std::function<void(Run&)>;

const std::vector<std::pair<std::string, std::pair<std::string, Command>>>& commands() {
  static const std::vector<std::pair<std::string, std::pair<std::string, Command>>> table = {
      {"ingest", {"Validate a hypergraph and write its normalized form", cmd_ingest}},
      {"walk", {"Simulate hypergraph random walks", cmd_walk}},
      {"embed", {"Train skip-gram node embeddings", cmd_embed}},
      {"train", {"Train a model; writes model.ckpt and history.csv", cmd_train}},
      {"eval-reconstruction", {"Score every hyperedge against corruptions", cmd_eval_reconstruction}},
      {"eval-linkpred", {"Held-out hyperedge prediction", cmd_eval_linkpred}},
      {"eval-nodeclass", {"Node classification with logistic regression", cmd_eval_nodeclass}},
      {"outsider", {"Rank tuple members by outsider likelihood", cmd_outsider}},
      {"export-plot", {"Write metric curves and 2D projections as CSV and SVG", cmd_export_plot}},
  };
  return table;
}

void add_options(CLI::App& app, Options& o) {
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_config("--config", "", "key=value configuration file; flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads for walks and skip-gram")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--deterministic", o.deterministic, "Force a single thread");
  app.add_option("--out", o.out_dir, "Output directory")->capture_default_str();

  auto* graph = app.add_option_group("Graph");
  graph->add_option("--edges", o.edges, "Hyperedge file")->check(CLI::ExistingFile);
  graph->add_option("--types", o.types, "token<TAB>type file")->check(CLI::ExistingFile);
  graph->add_option("--default-type", o.default_type, "Type for tokens absent from --types");

  auto* walk = app.add_option_group("Walk");
  walk->add_option("--p", o.walk.p, "Return parameter")->capture_default_str();
  walk->add_option("--q", o.walk.q, "In-out parameter")->capture_default_str();
  walk->add_option("--walk-length", o.walk.walk_length)->capture_default_str();
  walk->add_option("--walks-per-vertex", o.walk.walks_per_vertex)->capture_default_str();

  auto* sg = app.add_option_group("Skip-gram");
  sg->add_option("--sg-dim", o.skipgram.dim, "Embedding size")->capture_default_str();
  sg->add_option("--window", o.skipgram.window)->capture_default_str();
  sg->add_option("--sg-negatives", o.skipgram.negatives_per_pair)->capture_default_str();
  sg->add_option("--sg-epochs", o.skipgram.epochs)->capture_default_str();
  sg->add_option("--sg-lr", o.skipgram.initial_lr)->capture_default_str();

  auto* model = app.add_option_group("Model");
  model->add_option("--feature-mode", o.feature_mode)
      ->check(CLI::IsMember({"walk", "encoder"}))
      ->capture_default_str();
  model->add_option("--variant", o.variant)
      ->check(CLI::IsMember({"standard", "type1", "type2"}))
      ->capture_default_str();
  model->add_option("--dim", o.dim, "Embedding size")->capture_default_str();
  model->add_option("--heads", o.heads)->capture_default_str();
  model->add_option("--feature-dim", o.feature_dim, "Encoder output width")->capture_default_str();
  model->add_option("--recon-weight", o.recon_weight, "Encoder reconstruction weight")
      ->capture_default_str();

  auto* train = app.add_option_group("Training");
  train->add_option("--epochs", o.train.epochs)->capture_default_str();
  train->add_option("--batch-size", o.train.batch_size)->capture_default_str();
  train->add_option("--lr", o.train.learning_rate)->capture_default_str();
  train->add_option("--neg-ratio", o.train.neg_ratio, "Negatives per positive")->capture_default_str();
  train->add_flag("--mix-pairwise", o.train.mix_pairwise, "Also train on decomposed pairs");
  train->add_option("--pool", o.pool)->check(CLI::IsMember({"mean", "min"}))->capture_default_str();
  train->add_option("--val-fraction", o.train.validation_fraction)->capture_default_str();
  train->add_option("--fine-tune-epochs", o.train.fine_tune_epochs)->capture_default_str();
  train->add_option("--outsider-ce", o.train.outsider_ce_weight, "Per-node outsider loss weight")
      ->capture_default_str();

  auto* io = app.add_option_group("Inputs");
  io->add_option("--checkpoint", o.checkpoint)->check(CLI::ExistingFile);
  io->add_option("--corpus", o.corpus, "Walk corpus for embed")->check(CLI::ExistingFile);
  io->add_option("--embeddings", o.embeddings, "Precomputed node embeddings")
      ->check(CLI::ExistingFile);
  io->add_option("--labels", o.labels, "token<TAB>label[,label] file")->check(CLI::ExistingFile);
  io->add_option("--tuples", o.tuples, "Tuples to rank, optional outsider=<token>")
      ->check(CLI::ExistingFile);
  io->add_option("--history", o.history, "history.csv to plot")->check(CLI::ExistingFile);

  auto* eval = app.add_option_group("Evaluation");
  eval->add_option("--ratio", o.ratio, "Train:test split")->capture_default_str();
  eval->add_option("--split-seed", o.split_seed, "Defaults to --seed");
  eval->add_option("--repeats", o.repeats)->capture_default_str();
  eval->add_option("--label-mode", o.label_mode)
      ->check(CLI::IsMember({"multiclass", "multilabel"}))
      ->capture_default_str();
  eval->add_option("--train-fraction", o.train_fraction)->capture_default_str();
  eval->add_option("--generate", o.generate, "Generate N outsider tuples")->capture_default_str();
  eval->add_option("--topk", o.topk)->capture_default_str();
  eval->add_flag("--fine-tune", o.fine_tune, "Fine-tune with min pooling before ranking");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app("Hypergraph self-attention toolkit", "hsagnn");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  add_options(app, o);
  for (const auto& [name, entry] : commands()) app.add_subcommand(name, entry.first);

  std::vector<std::string> argv_store{"hsagnn"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  Command fn;
  for (const auto& [name, entry] : commands()) {
    if (name == command) fn = entry.second;
  }

  Run run(o, out, app);
  auto& manifest = run.manifest();
  manifest["command"] = command;
  manifest["argv"] = args;
  manifest["version"] = kVersion;
  manifest["seed"] = o.seed;
  manifest["threads"] = effective_threads(o);
  manifest["deterministic"] = o.deterministic;
  manifest["started_at"] = iso_now();
  manifest["config"] = app.config_to_str(true, false);
  manifest["inputs"] = json::object();
  manifest["outputs"] = json::object();
  const auto start = std::chrono::steady_clock::now();

  int code = kOk;
  std::string message;
  try {
    fs::create_directories(o.out_dir);
    if (app.count("--config") > 0) {
      const auto path = app["--config"]->as<std::string>();
      run.input("config", path);
    }
    fn(run);
  } catch (const UsageError& e) {
    code = kUsage;
    message = e.what();
  } catch (const DivergenceError& e) {
    code = kDivergence;
    message = std::string(e.what()) + " (epoch " + std::to_string(e.epoch()) + ")";
  } catch (const DataError& e) {
    code = kData;
    message = e.what();
  } catch (const nlohmann::json::exception& e) {
    code = kData;
    message = std::string("malformed metadata: ") + e.what();
  } catch (const std::exception& e) {
    code = kData;
    message = e.what();
  }
  manifest["timings"]["total"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  manifest["exit_code"] = code;
  manifest["status"] = code == kOk ? "ok" : "error";
  if (code != kOk) {
    manifest["error"] = message;
    err << "error: " << message << '\n';
  }
  std::error_code ec;
  if (fs::is_directory(o.out_dir, ec)) {
    std::ofstream f(fs::path(o.out_dir) / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
  }
  return code;
}

}  // namespace hsagnn::cli
