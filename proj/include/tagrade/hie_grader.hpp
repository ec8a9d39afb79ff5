#pragma once

#include <json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/ml/cross_validation.hpp"
#include "tagrade/ml/scaler.hpp"
#include "tagrade/ml/svm.hpp"
#include "tagrade/ta_detector.hpp"

namespace tagrade {

inline constexpr double kCovClamp = 20.0;
inline constexpr double kMinTaRun_s = 60.0;

struct GradeFeatures {
  double cs_median = 0.0;
  double cs_cov = 0.0;
  double ta_pct = 0.0;
  int ta_count = 0;
  double ta_max_min = 0.0;

  std::array<double, 5> as_array() const { return {cs_median, cs_cov, ta_pct, static_cast<double>(ta_count), ta_max_min}; }
  nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& grade_feature_names();

double compute_cs_median(std::span<const double> cs);
// ln|std / mean| (population std); -20 when std is 0, +20 when the mean is 0.
double compute_cs_cov(std::span<const double> cs);
double compute_ta_percentage(const SampleMask& mask);
// Runs of at least min_run_s only.
int count_ta_instances(const SampleMask& mask, double min_run_s = kMinTaRun_s);
// Longest minus shortest run in minutes; a single run gives its own length.
double compute_ta_max(const SampleMask& mask, double min_run_s = kMinTaRun_s);

GradeFeatures grade_features_from(const TaMask& ta, double min_run_s = kMinTaRun_s);

inline constexpr double kMinGradeEpoch_s = 1800.0;

GradeFeatures extract_grade_features(const EegRecording& rec, const IbiDetector& detector, const TaModel& ta_model,
                                     const SampleMask* exclude = nullptr);

struct PairwiseDecision {
  int lower = 0;
  int higher = 0;
  double value = 0.0;  // > 0 votes for the lower grade
  int winner() const { return value > 0.0 ? lower : higher; }
};

// Vote over pairwise decisions; ties go to the larger summed winning margin,
// then to the more severe grade.
int resolve_votes(std::span<const PairwiseDecision> decisions);

// One-vs-one RBF SVMs behind a shared scaler.
class OvoModel {
 public:
  struct Pair {
    int lower;
    int higher;
    ml::SvmModel svm;
  };

  OvoModel(ml::Scaler scaler, std::vector<Pair> pairs);

  int predict(const GradeFeatures& f, std::vector<PairwiseDecision>* decisions = nullptr) const;
  const std::vector<Pair>& pairs() const { return pairs_; }
  const ml::Scaler& scaler() const { return scaler_; }
  std::vector<int> grades() const;

  nlohmann::ordered_json to_json() const;
  static OvoModel from_json(const nlohmann::json& j);

 private:
  ml::Scaler scaler_;
  std::vector<Pair> pairs_;
};

struct GradeSample {
  GradeFeatures features;
  int grade = 0;
  std::string subject;
};

struct GraderOptions {
  ml::HyperGrid grid = ml::HyperGrid::standard();
  std::size_t inner_folds = 5;
  std::uint64_t seed = 0;
};

OvoModel train_grader(std::span<const GradeSample> samples, const GraderOptions& options = {});

}  // namespace tagrade
