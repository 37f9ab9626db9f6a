#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hsagnn/hypergraph.hpp"
#include "hsagnn/tensor.hpp"

namespace hsagnn {

/// Mann–Whitney statistic with average ranks; ties count 1/2.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision in step form. Tied scores form one block whose
/// positives all take the precision at the end of the block.
double aupr(std::span<const double> scores, std::span<const int> labels);

enum class LabelMode { Multiclass, Multilabel };

/// Linear classifier on standardized inputs. Multiclass uses one softmax
/// head; multilabel uses an independent sigmoid head per class.
struct LogisticModel {
  LabelMode mode = LabelMode::Multiclass;
  std::size_t classes = 0;
  std::vector<double> mean, scale;  // per input dimension, from the training rows
  Tensor weights;                   // dim × classes
  std::vector<double> bias;         // classes

  /// Class probabilities (softmax or per-class sigmoid), rows × classes.
  Tensor predict_proba(const Tensor& x) const;
  /// Argmax (multiclass) or every class with probability >= 0.5 (multilabel).
  std::vector<std::vector<int>> predict(const Tensor& x) const;
};

struct LogisticConfig {
  std::size_t iterations = 500;
  double l2 = 1e-4;
};

/// Full-batch gradient descent. `labels[i]` lists the classes of row i
/// (exactly one in multiclass mode).
LogisticModel fit_logistic(const Tensor& x, std::span<const std::vector<int>> labels,
                           std::size_t classes, LabelMode mode, const LogisticConfig& cfg = {});

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// Macro averages over classes present in `truth`.
F1Scores f1_scores(std::span<const std::vector<int>> truth,
                   std::span<const std::vector<int>> predicted, std::size_t classes);

struct NodeClassResult {
  F1Scores f1;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  /// Classes with test rows but no training rows.
  std::vector<int> unseen_classes;
};

/// Seeded split of the rows, fit on the training part, F1 on the rest.
NodeClassResult evaluate_node_classification(const Tensor& x,
                                             std::span<const std::vector<int>> labels,
                                             std::size_t classes, LabelMode mode,
                                             double train_fraction, std::uint64_t seed);

/// Fraction of rankings whose true outsider is among the first k entries.
double outsider_topk_accuracy(std::span<const std::vector<NodeId>> rankings,
                              std::span<const NodeId> true_outsiders, std::size_t k);

struct Projection {
  Tensor coords;                     // n × 2
  std::vector<double> variance;      // eigenvalues of the top-2 components
  std::vector<double> variance_ratio;
  bool degenerate = false;           // zero total variance
};

/// Top-2 principal components by power iteration on the centered covariance.
Projection project_2d(const Tensor& x, std::uint64_t seed = 0);

struct MetricReport {
  std::string task;
  std::vector<std::pair<std::string, double>> metrics;
  std::map<std::string, std::string> metadata;
  std::map<std::string, std::vector<double>> per_run;

  void set(const std::string& name, double value);
  double get(const std::string& name) const;
};

/// Mean of every metric across runs; each run's values go to per_run.
/// Metadata comes from the first run.
MetricReport aggregate_reports(std::span<const MetricReport> runs);

/// "task: <name>" then indented "key: value" lines.
void write_report_text(std::ostream& out, std::span<const MetricReport> reports);
/// run,task,metric,value,seed
void write_report_csv(std::ostream& out, std::span<const MetricReport> reports);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_line_chart(std::span<const Series> series, const std::string& title,
                           const std::string& x_label, const std::string& y_label);
std::string svg_scatter(const Tensor& points, std::span<const int> groups,
                        const std::string& title);

}  // namespace hsagnn
