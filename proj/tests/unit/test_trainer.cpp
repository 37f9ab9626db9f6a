#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "hsagnn/experiments.hpp"
#include "hsagnn/synthetic.hpp"
#include "hsagnn/trainer.hpp"

using namespace hsagnn;

namespace {

struct Setup {
  Hypergraph g;
  FeatureSource features;
  ModelConfig model;
  TrainConfig train;
};

Setup small_setup(FeatureMode mode = FeatureMode::Walk, std::uint64_t seed = 1) {
  PlantedConfig pc;
  pc.edges = 200;
  pc.seed = seed;
  Setup s;
  s.g = planted_hypergraph(pc);
  FeatureSettings fs;
  fs.walk.walk_length = 10;
  fs.walk.walks_per_vertex = 4;
  fs.walk.seed = seed;
  fs.skipgram.dim = 12;
  fs.skipgram.window = 4;
  fs.skipgram.epochs = 2;
  fs.skipgram.seed = seed;
  s.features = build_features(s.g, mode, fs);
  ModelConfig m;
  m.feature_mode = mode;
  m.dim = 8;
  m.heads = 2;
  m.feature_dim = 12;
  s.model = fit_model_dims(m, s.features);
  s.train.epochs = 3;
  s.train.batch_size = 32;
  s.train.seed = seed;
  return s;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto na = a.named();
  const auto nb = b.named();
  if (na.size() != nb.size()) return false;
  for (std::size_t i = 0; i < na.size(); ++i) {
    const auto da = na[i].second->data(), db = nb[i].second->data();
    if (!std::equal(da.begin(), da.end(), db.begin(), db.end())) return false;
  }
  return true;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hsagnn_test_" + name);
}

std::map<std::vector<NodeId>, int> multiset(const std::vector<TupleSample>& s) {
  std::map<std::vector<NodeId>, int> m;
  for (const auto& t : s) ++m[t.members];
  return m;
}

}  // namespace

TEST(TrainConfig, ValidationAndJsonRoundTrip) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.neg_ratio = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = {};
  c.epochs = 7;
  c.mix_pairwise = true;
  c.pool = PoolMode::Min;
  c.seed = 123456789012345ULL;
  const auto back = train_config_from_json(to_json(c));
  EXPECT_EQ(back.epochs, 7u);
  EXPECT_TRUE(back.mix_pairwise);
  EXPECT_EQ(back.pool, PoolMode::Min);
  EXPECT_EQ(back.seed, c.seed);
  ModelConfig m;
  m.variant = Variant::TypeII;
  m.input_dim = m.feature_dim = 16;
  m.recon_weight = 0.25;
  const auto mb = model_config_from_json(to_json(m));
  EXPECT_EQ(mb.variant, Variant::TypeII);
  EXPECT_EQ(mb.input_dim, 16u);
  EXPECT_DOUBLE_EQ(mb.recon_weight, 0.25);
}

TEST(Train, DeterministicGivenSeed) {
  const auto s = small_setup();
  const auto a = train(s.g, s.features, s.model, s.train);
  const auto b = train(s.g, s.features, s.model, s.train);
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_auc, b.history[e].val_auc);
  }
  EXPECT_TRUE(same_params(a.params, b.params));
  auto other = s.train;
  other.seed = 99;
  EXPECT_FALSE(same_params(a.params, train(s.g, s.features, s.model, other).params));
}

TEST(Train, HistoryReportsValidationMetrics) {
  const auto s = small_setup(FeatureMode::Encoder);
  const auto r = train(s.g, s.features, s.model, s.train);
  for (const auto& h : r.history) {
    EXPECT_TRUE(std::isfinite(h.train_loss));
    EXPECT_GE(h.val_auc, 0.0);
    EXPECT_LE(h.val_auc, 1.0);
    EXPECT_GE(h.val_aupr, 0.0);
    EXPECT_LE(h.val_aupr, 1.0);
  }
  EXPECT_TRUE(r.params.all_finite());
}

TEST(Train, NegativesAreRedrawnEachEpoch) {
  const auto s = small_setup();
  const auto pos = positives_of(s.g);
  const auto e0 = epoch_negatives(s.g, pos, 5, 7, 0);
  const auto e1 = epoch_negatives(s.g, pos, 5, 7, 1);
  ASSERT_EQ(e0.size(), pos.size() * 5);
  EXPECT_NE(multiset(e0), multiset(e1));
  EXPECT_EQ(e0, epoch_negatives(s.g, pos, 5, 7, 0));
  for (const auto& n : e1) EXPECT_FALSE(s.g.contains(n.members));
}

TEST(Train, MixedPairwiseTrainingValidatesBothKinds) {
  auto s = small_setup();
  s.train.mix_pairwise = true;
  const auto r = train(s.g, s.features, s.model, s.train);
  ASSERT_FALSE(r.history.empty());
  EXPECT_TRUE(r.history.back().hyper_val_auc.has_value());
  EXPECT_TRUE(r.history.back().edge_val_auc.has_value());
}

TEST(Train, SmoothedLossDecreases) {
  auto s = small_setup();
  s.train.epochs = 30;
  s.train.batch_size = 64;
  const auto r = train(s.g, s.features, s.model, s.train);
  std::vector<double> ma;
  for (std::size_t i = 4; i < r.history.size(); ++i) {
    double m = 0.0;
    for (std::size_t k = 0; k < 5; ++k) m += r.history[i - k].train_loss / 5.0;
    ma.push_back(m);
  }
  // Negatives are redrawn each epoch, so the plateau carries sampling noise.
  for (std::size_t i = 1; i < ma.size(); ++i) EXPECT_LE(ma[i], ma[i - 1] + 0.01) << "window " << i;
  EXPECT_LT(ma.back(), 0.8 * ma.front());
}

TEST(Train, CallbackCanStopEarly) {
  const auto s = small_setup();
  std::size_t calls = 0;
  const auto r = train(s.g, s.features, s.model, s.train, nullptr,
                       [&](const EpochRecord&, const ModelParams&) { return ++calls < 2; });
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(r.history.size(), 2u);
}

TEST(Train, NonFiniteLossRaisesDivergenceWithEpoch) {
  auto s = small_setup();
  Tensor table = s.features.table();
  table(0, 0) = std::numeric_limits<double>::quiet_NaN();
  // Every node appears in some batch, so epoch 1 hits the NaN row.
  const auto poisoned = FeatureSource::from_table(table);
  try {
    train(s.g, poisoned, s.model, s.train);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(Train, EmptyTrainingSetRejected) {
  const auto s = small_setup();
  std::vector<TupleSample> none;
  EXPECT_THROW(train_on(none, s.g, s.features, s.model, s.train), DataError);
}

TEST(Train, DownsampledRegimeReportsBothCurves) {
  const auto s = small_setup();
  ExperimentConfig cfg;
  cfg.model = s.model;
  cfg.train = s.train;
  cfg.features.walk.walk_length = 10;
  cfg.features.walk.walks_per_vertex = 4;
  cfg.features.skipgram.dim = 12;
  cfg.features.skipgram.epochs = 2;
  const auto out = run_downsampled(s.g, cfg, 0.05, 0.5, 3);
  EXPECT_EQ(out.report.get("hyperedges_kept"), 10.0);
  ASSERT_EQ(out.report.per_run.at("hyper_val_auc").size(), s.train.epochs);
  for (double v : out.report.per_run.at("hyper_val_auc")) EXPECT_TRUE(std::isfinite(v));
  for (double v : out.report.per_run.at("edge_val_auc")) EXPECT_TRUE(std::isfinite(v));
}

TEST(Outsider, RankingByProbabilityThenId) {
  const std::vector<NodeId> tuple{1, 2, 3};
  const std::vector<double> p{0.9, 0.8, 0.1};
  EXPECT_EQ(rank_outsiders(tuple, p), (std::vector<NodeId>{3, 2, 1}));
  const std::vector<NodeId> shuffled{9, 4, 6};
  const std::vector<double> equal{0.5, 0.5, 0.5};
  EXPECT_EQ(rank_outsiders(shuffled, equal), (std::vector<NodeId>{4, 6, 9}));
}

TEST(Outsider, FineTuneUsesMinPooling) {
  auto s = small_setup();
  const auto base = train(s.g, s.features, s.model, s.train);
  s.train.fine_tune_epochs = 2;
  const auto tuned = fine_tune_min_pool(base.params, s.g, s.features, s.model, s.train);
  EXPECT_EQ(tuned.history.size(), 2u);
  EXPECT_FALSE(same_params(base.params, tuned.params));
  auto min_model = s.model;
  min_model.pool = PoolMode::Min;
  for (const auto& e : s.g.edges()) {
    const auto out = score_tuple(min_model, tuned.params, s.features, e.members);
    EXPECT_EQ(out.tuple_prob, *std::min_element(out.per_node_prob.begin(), out.per_node_prob.end()));
  }
}

TEST(Outsider, MinPoolFineTuneImprovesTop1) {
  PlantedConfig pc;
  pc.seed = 1;
  const auto g = planted_hypergraph(pc);
  ExperimentConfig cfg;
  cfg.model.dim = 64;
  cfg.model.heads = 4;
  cfg.train.epochs = 30;
  cfg.train.batch_size = 64;
  cfg.train.seed = 3;
  cfg.features.walk.seed = cfg.features.skipgram.seed = 3;
  const auto out = run_outsider_comparison(g, cfg, 200, 7);
  EXPECT_GT(out.report.get("min_pool.top1"), out.report.get("mean_pool.top1"));
}

TEST(Outsider, CrossEntropyFlagTrains) {
  auto s = small_setup();
  s.train.outsider_ce_weight = 0.5;
  const auto r = train(s.g, s.features, s.model, s.train);
  EXPECT_TRUE(r.params.all_finite());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (auto mode : {FeatureMode::Walk, FeatureMode::Encoder}) {
    const auto s = small_setup(mode);
    const auto trained = train(s.g, s.features, s.model, s.train);
    Checkpoint ck;
    ck.model = s.model;
    ck.params = trained.params;
    ck.node_count = s.g.node_count();
    ck.vocabulary_hash = s.g.vocabulary_hash();
    ck.epoch = 3;
    ck.seed = s.train.seed;
    if (!s.features.is_adjacency()) ck.features = s.features.table();
    ck.extra["note"] = "x";
    const auto path = temp_path("roundtrip.ckpt");
    save_checkpoint(ck, path);
    const auto back = load_checkpoint(path, s.g.vocabulary_hash());
    EXPECT_TRUE(same_params(ck.params, back.params));
    EXPECT_EQ(back.epoch, 3u);
    EXPECT_EQ(back.extra.at("note"), "x");
    EXPECT_EQ(back.features.has_value(), ck.features.has_value());
    const auto source = back.features ? FeatureSource::from_table(*back.features) : s.features;
    for (const auto& e : s.g.edges()) {
      const auto a = score_tuple(s.model, ck.params, s.features, e.members);
      const auto b = score_tuple(back.model, back.params, source, e.members);
      EXPECT_EQ(a.tuple_prob, b.tuple_prob);
      EXPECT_EQ(a.per_node_prob, b.per_node_prob);
    }
    std::filesystem::remove(path);
  }
}

TEST(Checkpoint, LayoutStartsWithMagicAndLength) {
  const auto s = small_setup();
  Checkpoint ck;
  ck.model = s.model;
  ck.params = init_params(s.model, 1);
  ck.node_count = s.g.node_count();
  const auto path = temp_path("layout.ckpt");
  save_checkpoint(ck, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ASSERT_GT(bytes.size(), 9u);
  EXPECT_EQ(bytes.substr(0, 5), "HSGN1");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[5 + i])) << (8 * i);
  const auto meta = nlohmann::json::parse(bytes.substr(9, len));
  EXPECT_TRUE(meta.contains("model"));
  std::size_t values = 0;
  for (const auto& [name, t] : ck.params.named()) values += t->data().size();
  EXPECT_EQ(bytes.size(), 9 + len + 8 * values);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto s = small_setup();
  Checkpoint ck;
  ck.model = s.model;
  ck.params = init_params(s.model, 2);
  ck.node_count = s.g.node_count();
  ck.vocabulary_hash = s.g.vocabulary_hash();
  const auto path = temp_path("corrupt.ckpt");
  save_checkpoint(ck, path);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };
  write(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(path), DataError);
  write(bytes + "extra");
  EXPECT_THROW(load_checkpoint(path), DataError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  write(bad_magic);
  EXPECT_THROW(load_checkpoint(path), DataError);
  auto bad_version = bytes;
  bad_version[4] = '9';
  write(bad_version);
  EXPECT_THROW(load_checkpoint(path), DataError);
  write(bytes);
  EXPECT_NO_THROW(load_checkpoint(path));
  EXPECT_THROW(load_checkpoint(path, s.g.vocabulary_hash() + 1), DataError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), DataError);
}
