#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "hsagnn/evaluator.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace hsagnn;
using hsagnn::testing::aupr_oracle;
using hsagnn::testing::auroc_oracle;

namespace {

std::vector<std::vector<int>> single(std::initializer_list<int> v) {
  std::vector<std::vector<int>> out;
  for (int c : v) out.push_back({c});
  return out;
}

}  // namespace

TEST(Auroc, Examples) {
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.1, 0.8, 0.2}, std::vector<int>{1, 0, 0, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, y), 0.5);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
}

TEST(Auroc, MatchesPairwiseOracleExactly) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;  // many ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng() % 7) / 7.0 : std::uniform_real_distribution<double>()(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(auroc(s, y), auroc_oracle(s, y)) << "trial " << trial;
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng() % 100;
    std::vector<double> s(n), t(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 20) / 20.0;
      y[i] = static_cast<int>(rng() % 2);
      t[i] = std::exp(3.0 * s[i]) - 7.0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(auroc(s, y), auroc(t, y));
  }
}

TEST(Aupr, Examples) {
  std::vector<double> s(10);
  std::vector<int> y(10, 0);
  for (int i = 0; i < 10; ++i) s[i] = 1.0 - 0.1 * i;
  y[0] = 1;
  EXPECT_DOUBLE_EQ(aupr(s, y), 1.0);
  EXPECT_DOUBLE_EQ(aupr(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}), 0.5);
  EXPECT_THROW(aupr(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 0}), DataError);
}

TEST(Aupr, MatchesThresholdSweepOracleExactly) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>()(rng);
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    EXPECT_EQ(aupr(s, y), aupr_oracle(s, y)) << "trial " << trial;
  }
}

TEST(F1, HandComputedThreeClassInstance) {
  // Per class (TP,FP,FN): 0 → (2,2,2), 1 → (3,1,1), 2 → (3,1,1).
  const auto truth = single({0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
  const auto pred = single({0, 0, 1, 2, 1, 1, 1, 0, 2, 2, 0, 2});
  const auto f = f1_scores(truth, pred, 3);
  EXPECT_NEAR(f.macro, (0.5 + 0.75 + 0.75) / 3.0, 1e-15);
  EXPECT_NEAR(f.micro, 16.0 / 24.0, 1e-15);
}

TEST(F1, MacroCountsOnlyClassesPresentInTruth) {
  // Class 2 never occurs in truth; its false positive still lowers class-0 recall.
  const auto truth = single({0, 0, 1, 1});
  const auto pred = single({0, 2, 1, 1});
  const auto f = f1_scores(truth, pred, 3);
  EXPECT_NEAR(f.macro, (2.0 / 3.0 + 1.0) / 2.0, 1e-15);
  // A truth class never predicted contributes F1 = 0.
  const auto g = f1_scores(single({0, 1}), single({0, 0}), 2);
  EXPECT_NEAR(g.macro, (2.0 / 3.0 + 0.0) / 2.0, 1e-15);
}

TEST(F1, PerfectPredictionsAndMicroEqualsAccuracy) {
  const auto truth = single({0, 1, 2, 1});
  const auto perfect = f1_scores(truth, truth, 3);
  EXPECT_DOUBLE_EQ(perfect.micro, 1.0);
  EXPECT_DOUBLE_EQ(perfect.macro, 1.0);
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + rng() % 50;
    std::vector<std::vector<int>> t, p;
    int correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
      t.push_back({static_cast<int>(rng() % 4)});
      p.push_back({static_cast<int>(rng() % 4)});
      correct += t.back() == p.back();
    }
    EXPECT_NEAR(f1_scores(t, p, 4).micro, static_cast<double>(correct) / static_cast<double>(n), 1e-12);
  }
}

TEST(Logistic, SeparableTwoClassToy) {
  Tensor x(8, 2);
  std::vector<std::vector<int>> y;
  for (int i = 0; i < 8; ++i) {
    const int c = i < 4 ? 0 : 1;
    x(static_cast<std::size_t>(i), 0) = (c ? 2.0 : -2.0) + 0.1 * i;
    x(static_cast<std::size_t>(i), 1) = 0.3 * (i % 3);
    y.push_back({c});
  }
  const auto model = fit_logistic(x, y, 2, LabelMode::Multiclass);
  const auto pred = model.predict(x);
  EXPECT_EQ(pred, y);
  const auto proba = model.predict_proba(x);
  for (std::size_t r = 0; r < 8; ++r) EXPECT_NEAR(proba(r, 0) + proba(r, 1), 1.0, 1e-12);
}

TEST(Logistic, MultilabelHeadsAreIndependent) {
  Tensor x(8, 2);
  std::vector<std::vector<int>> y;
  for (int i = 0; i < 8; ++i) {
    const bool a = i & 1, b = i & 2;
    x(static_cast<std::size_t>(i), 0) = a ? 1.5 : -1.5;
    x(static_cast<std::size_t>(i), 1) = b ? 1.5 : -1.5;
    std::vector<int> labels;
    if (a) labels.push_back(0);
    if (b) labels.push_back(1);
    y.push_back(labels);
  }
  const auto model = fit_logistic(x, y, 2, LabelMode::Multilabel);
  EXPECT_EQ(model.predict(x), y);
}

TEST(Logistic, NodeClassificationReportsUnseenClasses) {
  std::mt19937_64 rng(45);
  Tensor x = hsagnn::testing::random_tensor(40, 3, rng);
  std::vector<std::vector<int>> y;
  for (std::size_t i = 0; i < 40; ++i) {
    y.push_back({x(i, 0) > 0 ? 1 : 0});
    x(i, 1) += 3.0 * y.back()[0];
  }
  y[7] = {2};  // a class that can land only in one split
  const auto r = evaluate_node_classification(x, y, 3, LabelMode::Multiclass, 0.5, 3);
  EXPECT_EQ(r.train_size + r.test_size, 40u);
  EXPECT_GT(r.f1.micro, 0.8);
  const auto again = evaluate_node_classification(x, y, 3, LabelMode::Multiclass, 0.5, 3);
  EXPECT_EQ(r.f1.micro, again.f1.micro);
  EXPECT_EQ(r.f1.macro, again.f1.macro);
  EXPECT_THROW(evaluate_node_classification(x, y, 3, LabelMode::Multiclass, 1.0, 3), UsageError);
}

TEST(TopK, ExamplesAndMonotonicity) {
  const std::vector<std::vector<NodeId>> rankings{{1, 2, 3}, {5, 4, 6}, {9, 8, 7}};
  const std::vector<NodeId> truth{1, 4, 7};
  EXPECT_DOUBLE_EQ(outsider_topk_accuracy(rankings, truth, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(outsider_topk_accuracy(rankings, truth, 2), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(outsider_topk_accuracy(rankings, truth, 3), 1.0);
  const std::vector<NodeId> firsts{1, 5, 9};
  EXPECT_DOUBLE_EQ(outsider_topk_accuracy(rankings, firsts, 1), 1.0);
  std::mt19937_64 rng(46);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<NodeId>> r;
    std::vector<NodeId> t;
    for (int i = 0; i < 30; ++i) {
      std::vector<NodeId> perm{0, 1, 2, 3};
      std::shuffle(perm.begin(), perm.end(), rng);
      r.push_back(perm);
      t.push_back(static_cast<NodeId>(rng() % 4));
    }
    double prev = 0.0;
    for (std::size_t k = 1; k <= 4; ++k) {
      const double acc = outsider_topk_accuracy(r, t, k);
      EXPECT_GE(acc, prev);
      prev = acc;
    }
    EXPECT_DOUBLE_EQ(prev, 1.0);
  }
  EXPECT_THROW(outsider_topk_accuracy(rankings, truth, 0), UsageError);
}

TEST(Projection, MatchesEigenDecomposition) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = hsagnn::testing::random_tensor(5, 3, rng);
    Eigen::MatrixXd m(5, 3);
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = x(r, c);
    const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 4.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const auto ev = es.eigenvalues();  // ascending
    const double total = ev.sum();
    const auto p = project_2d(x, trial);
    ASSERT_EQ(p.variance_ratio.size(), 2u);
    EXPECT_NEAR(p.variance_ratio[0], ev(2) / total, 1e-6) << trial;
    EXPECT_NEAR(p.variance_ratio[1], ev(1) / total, 1e-6) << trial;
    EXPECT_NEAR(p.variance[0], ev(2), 1e-6);
    for (int c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < 5; ++r) mean += p.coords(r, static_cast<std::size_t>(c)) / 5.0;
      EXPECT_NEAR(mean, 0.0, 1e-12);
    }
  }
}

TEST(Projection, LineAndConstantInputs) {
  Tensor line(6, 3);
  for (std::size_t r = 0; r < 6; ++r) {
    line(r, 0) = 1.0 * r;
    line(r, 1) = 2.0 * r;
    line(r, 2) = -1.0 * r + 4.0;
  }
  const auto p = project_2d(line);
  EXPECT_NEAR(p.variance[1], 0.0, 1e-9);
  EXPECT_NEAR(p.variance_ratio[0], 1.0, 1e-9);
  Tensor flat(4, 2, 3.0);
  const auto z = project_2d(flat);
  EXPECT_TRUE(z.degenerate);
  for (double v : z.coords.data()) EXPECT_EQ(v, 0.0);
}

TEST(Report, TextAndCsvLayout) {
  MetricReport r;
  r.task = "link_prediction";
  r.set("auroc", 0.9);
  r.set("aupr", 0.8);
  r.metadata["seed"] = "7";
  r.per_run["auroc"] = {0.89, 0.91};
  const std::vector<MetricReport> reports{r};
  std::ostringstream text, csv;
  write_report_text(text, reports);
  write_report_csv(csv, reports);
  EXPECT_NE(text.str().find("task: link_prediction"), std::string::npos);
  EXPECT_NE(text.str().find("  auroc: 0.9"), std::string::npos);
  EXPECT_NE(text.str().find("  meta.seed: 7"), std::string::npos);
  const std::string c = csv.str();
  EXPECT_EQ(c.substr(0, c.find('\n')), "run,task,metric,value,seed");
  EXPECT_NE(c.find("all,link_prediction,auroc,0.9,7"), std::string::npos);
  EXPECT_NE(c.find("0,link_prediction,auroc,0.89,7"), std::string::npos);
  EXPECT_NE(c.find("1,link_prediction,auroc,0.91,7"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.get("aupr"), 0.8);
  r.set("aupr", 0.7);
  EXPECT_DOUBLE_EQ(r.get("aupr"), 0.7);
  EXPECT_EQ(r.metrics.size(), 2u);
}

TEST(Report, SvgOutputs) {
  const std::vector<Series> s{{"a", {1, 2, 3}, {0.5, 0.7, 0.9}}, {"b", {1, 2, 3}, {0.4, 0.6, 0.65}}};
  const auto chart = svg_line_chart(s, "AUC by epoch", "epoch", "auc");
  EXPECT_EQ(chart.rfind("<svg", 0), 0u);
  EXPECT_NE(chart.find("<polyline"), std::string::npos);
  EXPECT_NE(chart.find("AUC by epoch"), std::string::npos);
  Tensor pts(3, 2);
  pts(1, 0) = 1.0;
  pts(2, 1) = 1.0;
  const std::vector<int> groups{0, 1, 1};
  const auto sc = svg_scatter(pts, groups, "proj");
  EXPECT_EQ(std::count(sc.begin(), sc.end(), '\n') > 0, true);
  std::size_t circles = 0;
  for (std::size_t pos = sc.find("<circle"); pos != std::string::npos; pos = sc.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 3u);
}
