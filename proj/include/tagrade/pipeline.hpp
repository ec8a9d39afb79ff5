#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/hie_grader.hpp"
#include "tagrade/ibi_detector.hpp"
#include "tagrade/ibi_features.hpp"
#include "tagrade/metrics.hpp"
#include "tagrade/ta_detector.hpp"

namespace tagrade {

struct PrepOptions {
  double target_fs = 64.0;
  double cutoff_hz = 30.0;
  std::size_t taps = 4001;
  double artifact_uv = 1500.0;
  double collar_s = 0.5;
};

// A bipolar recording at the analysis rate with its exclusion mask.
struct PreparedRecording {
  std::string subject;
  EegRecording eeg;
  SampleMask exclude;
  AnnotationTrack annotations;
  std::optional<int> grade;
};

// The HIE montage when every electrode it needs is present, else the sleep
// montage.
const std::vector<ElectrodePair>& montage_for(const EegRecording& referential);

// Montage, artifact mask, 30 Hz low-pass and decimation.
PreparedRecording prepare_recording(const EegRecording& referential, std::span<const ElectrodePair> montage,
                                    AnnotationTrack annotations, std::string subject, const PrepOptions& options = {});

// Frame features of every channel.
std::vector<FeatureMatrix> recording_features(const PreparedRecording& rec, const FrameSpec& spec);

// Labelled burst / inter-burst frames of one recording.
void append_recording_frames(const PreparedRecording& rec, std::span<const FeatureMatrix> features, ml::Dataset& out);

struct IbiLosoResult {
  std::vector<ConfidenceSeries> out_of_fold;  // per recording
  std::vector<SubjectOutcome> outcomes;       // labelled frames, 1 = inter-burst
  MetricsReport report;
  IbiDetector final_model;
};

IbiLosoResult train_ibi_loso(std::span<const PreparedRecording> recs,
                             std::span<const std::vector<FeatureMatrix>> features, const IbiTrainingOptions& options,
                             std::size_t bootstrap_iterations = 1000);

struct TaLosoResult {
  std::vector<SubjectOutcome> outcomes;  // labels 1 = TA
  MetricsReport report;
  std::vector<double> fold_min_sep;
  std::map<std::string, double> single_feature_auc;
  double threshold_kappa = 0.0;  // envelope median above 0.93
  TaModel final_model;
  TaTrainingReport final_training;
};

// Ground-truth TA mask of a prepared recording.
SampleMask ta_truth(const PreparedRecording& rec);

TaLosoResult train_ta_loso(std::span<const SubjectEpochs> subjects, std::span<const double> grid,
                           ml::ClassifierKind kind, const TaTrainingOptions& options,
                           std::size_t bootstrap_iterations = 1000);

struct GraderLosoResult {
  std::vector<int> actual;
  std::vector<int> predicted;
  ConfusionMatrix confusion{4};
  double accuracy_pct = 0.0;
  double kappa = 0.0;
  OvoModel final_model;
};

GraderLosoResult train_grader_loso(std::span<const GradeSample> samples, const GraderOptions& options = {});

nlohmann::ordered_json grader_report_json(const GraderLosoResult& r, std::span<const GradeSample> samples);

}  // namespace tagrade
