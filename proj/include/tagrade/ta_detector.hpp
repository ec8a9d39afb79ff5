#pragma once

#include <json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/ibi_detector.hpp"
#include "tagrade/ibi_features.hpp"
#include "tagrade/ml/classifier.hpp"

namespace tagrade {

// Per-channel inter-burst scores on the sample grid.
struct ConfidenceSeries {
  std::vector<std::vector<double>> channels;
  double fs = 0.0;
  std::size_t size() const { return channels.empty() ? 0 : channels.front().size(); }
};

// Values in [0, 1] on the sample grid.
struct EnvelopeSeries {
  std::vector<double> values;
  double fs = 0.0;
};

// Each sample takes the score of the frame whose centre is nearest.
std::vector<double> expand_frame_scores(std::span<const double> frame_scores, const FeatureMatrix& frames,
                                        std::size_t n_samples);

ConfidenceSeries confidence_series(const EegRecording& rec, const IbiDetector& detector,
                                   const SampleMask* exclude = nullptr);
ConfidenceSeries confidence_from_features(std::span<const FeatureMatrix> channels, const IbiDetector& detector,
                                          std::size_t n_samples);

// Centered median over an odd window of about window_s seconds; the window
// shrinks to the valid range at the edges.
std::vector<double> moving_median(std::span<const double> x, double window_s, double fs);

std::vector<double> sigmoid_standardize(std::span<const double> x);

// Natural cubic spline through the retained local maxima (plateaus count as
// one maximum at their centre). Peaks closer than min_sep_s are resolved in
// favour of the larger, then the earlier. Without peaks the envelope is the
// series maximum.
EnvelopeSeries envelope_from_peaks(std::span<const double> x, double fs, double min_sep_s);

EnvelopeSeries summarize_channels(std::span<const EnvelopeSeries> envelopes);

// Median filter then sigmoid, per channel: the part of the envelope pipeline
// that does not depend on the peak separation.
ConfidenceSeries smooth_confidence(const ConfidenceSeries& cs, double median_window_s = 3.0);
EnvelopeSeries envelope_from_smoothed(const ConfidenceSeries& smoothed, double min_sep_s);

struct TaEpochFeatures {
  double rms = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::array<double, 3> as_array() const { return {rms, median, max}; }
};

inline constexpr std::size_t kNumTaFeatures = 3;
const std::vector<std::string>& ta_feature_names();

TaEpochFeatures epoch_features(std::span<const double> envelope);

struct EpochSpec {
  double epoch_s = 300.0;
  double overlap_s = 270.0;
  void validate() const;
};

struct TaEpoch {
  std::size_t start = 0;
  TaEpochFeatures features;
  int label = 0;  // +1 TA, -1 non-TA
};

// Pure epochs only: those straddling a TA boundary are dropped.
std::vector<TaEpoch> make_epochs(const EnvelopeSeries& env, const SampleMask& ta_truth, const EpochSpec& spec = {});
std::vector<TaEpoch> make_epochs(const EnvelopeSeries& env, const AnnotationTrack& annotations,
                                 const EpochSpec& spec = {});

SampleMask threshold_detector(const EnvelopeSeries& env, double threshold = 0.93);

// Clear true runs shorter than min_run_s.
SampleMask suppress_short_runs(const SampleMask& mask, double min_run_s);

// Standard peak-separation grid: 2.5 s to 50 s in 2.5 s steps.
std::vector<double> min_sep_grid();

class TaModel {
 public:
  TaModel(double min_sep_s, ml::Classifier classifier, EpochSpec epochs = {}, double median_window_s = 3.0,
          double min_run_s = 60.0);

  double min_sep_s() const { return min_sep_s_; }
  const EpochSpec& epochs() const { return epochs_; }
  double median_window_s() const { return median_window_s_; }
  double min_run_s() const { return min_run_s_; }
  const ml::Classifier& classifier() const { return classifier_; }
  double decision_value(const TaEpochFeatures& f) const;

  nlohmann::ordered_json to_json() const;
  static TaModel from_json(const nlohmann::json& j);

 private:
  double min_sep_s_;
  ml::Classifier classifier_;
  EpochSpec epochs_;
  double median_window_s_;
  double min_run_s_;
};

// Epochs of one subject at every value of a min_sep grid.
struct SubjectEpochs {
  std::string subject;
  std::vector<std::vector<TaEpoch>> by_min_sep;
};

SubjectEpochs build_subject_epochs(const std::string& subject, const ConfidenceSeries& smoothed,
                                   const SampleMask& ta_truth, std::span<const double> grid,
                                   const EpochSpec& spec = {});

ml::Dataset epoch_dataset(std::span<const SubjectEpochs> subjects, std::size_t grid_index);

struct TaTrainingOptions {
  ml::ClassifierOptions classifier;
  std::size_t inner_folds = 5;
  std::uint64_t seed = 0;
};

struct TaTrainingReport {
  double min_sep_s = 0.0;
  std::vector<double> min_sep_auc;  // inner-CV AUC per grid value
  ml::GridChoice hyper;             // svm_rbf only
};

// Chooses min_sep by inner grouped-CV AUC with default hyperparameters, then
// trains on the chosen epochs (svm_rbf tuned by nested grid search).
TaModel train_ta_classifier(std::span<const SubjectEpochs> subjects, std::span<const double> grid,
                            ml::ClassifierKind kind, const TaTrainingOptions& options = {},
                            TaTrainingReport* report = nullptr);

struct TaMask {
  SampleMask mask;
  std::vector<double> window_cs;   // classifier score per sliding window
  std::vector<double> sample_cs;   // mean score of the windows covering each sample
  EnvelopeSeries envelope;
  std::vector<double> smoothed_cs; // channel mean of the sigmoid-scaled CS
  double window_step_s = 1.0;
};

TaMask detect_ta_from_confidence(const ConfidenceSeries& cs, const TaModel& model, double step_s = 1.0);
TaMask detect_ta(const EegRecording& rec, const IbiDetector& detector, const TaModel& model,
                 const SampleMask* exclude = nullptr);

}  // namespace tagrade
