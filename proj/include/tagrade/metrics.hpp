#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tagrade {

// Probability that a positive (label > 0) outscores a negative, ties
// counting one half. Throws unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// Rows are actual classes, columns predictions (0-based class indices).
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);
  static ConfusionMatrix from_counts(const std::vector<std::vector<long>>& counts);

  void add(std::size_t actual, std::size_t predicted, long n = 1);
  std::size_t classes() const { return k_; }
  long count(std::size_t actual, std::size_t predicted) const { return counts_[actual * k_ + predicted]; }
  long total() const;
  long row_total(std::size_t actual) const;
  long col_total(std::size_t predicted) const;
  long trace() const;

  nlohmann::ordered_json to_json() const;
  // Actual rows against system output, with diagonal percentages and
  // Total/False columns.
  std::string format_table(const std::vector<std::string>& class_names) const;

 private:
  std::size_t k_;
  std::vector<long> counts_;
};

// Degenerate chance agreement (p_e = 1) gives 0.
double cohens_kappa(const ConfusionMatrix& cm);
double accuracy_percent(const ConfusionMatrix& cm);
// F1 of class `positive`; 0 when precision + recall is 0.
double f1_percent(const ConfusionMatrix& cm, std::size_t positive = 1);

// Outcomes of one subject: per-case scores, true and predicted class indices.
struct SubjectOutcome {
  std::string subject;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> predictions;
};

// Metric over pooled cases of a (re)sampled set of subjects; nullopt where
// undefined.
using PooledMetric = std::function<std::optional<double>(std::span<const SubjectOutcome* const>)>;

struct BootstrapResult {
  double lo = 0.0;
  double hi = 0.0;
  double median = 0.0;
  std::size_t valid = 0;
};

// Percentile bootstrap over subjects. An undefined resample is redrawn up to
// 10 times and then skipped.
BootstrapResult bootstrap_ci(std::span<const SubjectOutcome> subjects, const PooledMetric& metric,
                             std::size_t iterations = 1000, double level = 0.95, std::uint64_t seed = 0);

std::optional<double> pooled_auc(std::span<const SubjectOutcome* const> subjects);
std::optional<double> pooled_kappa(std::span<const SubjectOutcome* const> subjects, std::size_t classes = 2);
std::optional<double> pooled_accuracy(std::span<const SubjectOutcome* const> subjects, std::size_t classes = 2);
std::optional<double> pooled_f1(std::span<const SubjectOutcome* const> subjects);

ConfusionMatrix pooled_confusion(std::span<const SubjectOutcome> subjects, std::size_t classes);

struct MetricSummary {
  double pooled = 0.0;   // over all cases
  double median = 0.0;   // bootstrap median
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// AUC, kappa, accuracy (%) and F1 (%) with per-subject bootstrap intervals.
struct MetricsReport {
  MetricSummary auc;
  MetricSummary kappa;
  MetricSummary accuracy;
  MetricSummary f1;

  nlohmann::ordered_json to_json() const;
  std::string format_table(const std::string& title) const;
};

MetricsReport binary_metrics_report(std::span<const SubjectOutcome> subjects, std::size_t iterations = 1000,
                                    std::uint64_t seed = 0);

}  // namespace tagrade
