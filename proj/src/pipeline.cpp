#include "tagrade/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tagrade/ml/cross_validation.hpp"
#include "tagrade/preprocess.hpp"
#include "tagrade/random.hpp"

namespace tagrade {

const std::vector<ElectrodePair>& montage_for(const EegRecording& referential) {
  for (const auto& p : hie_montage()) {
    if (!referential.find(p.anode) || !referential.find(p.cathode)) return sleep_montage();
  }
  return hie_montage();
}

PreparedRecording prepare_recording(const EegRecording& referential, std::span<const ElectrodePair> montage,
                                    AnnotationTrack annotations, std::string subject, const PrepOptions& options) {
  const EegRecording bipolar = derive_montage(referential, montage);
  const double ratio = bipolar.fs() / options.target_fs;
  const auto factor = static_cast<int>(std::llround(ratio));
  if (factor < 1 || std::abs(ratio - factor) > 1e-9) {
    throw std::invalid_argument("sampling rate must be an integer multiple of the analysis rate");
  }
  const SampleMask artifacts = artifact_mask(bipolar, options.artifact_uv, options.collar_s);
  const FirFilter lowpass = design_fir_lowpass(options.cutoff_hz, bipolar.fs(), options.taps);
  EegRecording eeg = filter_downsample(bipolar, lowpass, factor);
  SampleMask exclude = downsample_mask(artifacts, factor);
  return {std::move(subject), std::move(eeg), std::move(exclude), std::move(annotations), std::nullopt};
}

std::vector<FeatureMatrix> recording_features(const PreparedRecording& rec, const FrameSpec& spec) {
  std::vector<FeatureMatrix> out;
  for (const auto& ch : rec.eeg.channels()) out.push_back(build_feature_matrix(ch.samples, rec.eeg.fs(), spec, &rec.exclude));
  return out;
}

void append_recording_frames(const PreparedRecording& rec, std::span<const FeatureMatrix> features, ml::Dataset& out) {
  const double fs = rec.eeg.fs();
  const std::size_t n = rec.eeg.num_samples();
  const SampleMask burst = annotations_to_mask(rec.annotations, EventLabel::Burst, fs, n);
  const SampleMask ibi = annotations_to_mask(rec.annotations, EventLabel::InterBurst, fs, n);
  for (const auto& fm : features) append_training_frames(fm, burst, ibi, rec.subject, out);
}

SampleMask ta_truth(const PreparedRecording& rec) {
  return annotations_to_mask(rec.annotations, EventLabel::Ta, rec.eeg.fs(), rec.eeg.num_samples());
}

namespace {

SubjectOutcome binary_outcome(const std::string& subject, const std::vector<double>& scores,
                              const std::vector<int>& signed_labels) {
  SubjectOutcome o;
  o.subject = subject;
  o.scores = scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    o.labels.push_back(signed_labels[i] > 0 ? 1 : 0);
    o.predictions.push_back(scores[i] > 0.0 ? 1 : 0);
  }
  return o;
}

}  // namespace

IbiLosoResult train_ibi_loso(std::span<const PreparedRecording> recs,
                             std::span<const std::vector<FeatureMatrix>> features, const IbiTrainingOptions& options,
                             std::size_t bootstrap_iterations) {
  if (recs.size() != features.size()) throw std::invalid_argument("one feature set per recording expected");
  if (recs.size() < 2) throw std::invalid_argument("IBI training needs at least 2 recordings");
  std::vector<ml::Dataset> per_rec(recs.size());
  for (std::size_t r = 0; r < recs.size(); ++r) append_recording_frames(recs[r], features[r], per_rec[r]);

  std::vector<ConfidenceSeries> oof;
  std::vector<SubjectOutcome> outcomes;
  for (std::size_t held = 0; held < recs.size(); ++held) {
    ml::Dataset train;
    for (std::size_t r = 0; r < recs.size(); ++r) {
      if (r == held || recs[r].subject == recs[held].subject) continue;
      for (std::size_t i = 0; i < per_rec[r].size(); ++i) {
        train.x.push_row(per_rec[r].x.row(i));
        train.y.push_back(per_rec[r].y[i]);
        train.subjects.push_back(per_rec[r].subjects[i]);
      }
    }
    IbiTrainingOptions fold_opt = options;
    fold_opt.seed = mix_seed(options.seed, held);
    const IbiDetector det = train_ibi_detector(train, fold_opt);
    oof.push_back(confidence_from_features(features[held], det, recs[held].eeg.num_samples()));
    std::vector<double> scores;
    for (std::size_t i = 0; i < per_rec[held].size(); ++i) scores.push_back(det.model().decision_value(per_rec[held].x.row(i)));
    if (!scores.empty()) outcomes.push_back(binary_outcome(recs[held].subject, scores, per_rec[held].y));
  }

  ml::Dataset all;
  for (const auto& d : per_rec) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      all.x.push_row(d.x.row(i));
      all.y.push_back(d.y[i]);
      all.subjects.push_back(d.subjects[i]);
    }
  }
  IbiTrainingOptions final_opt = options;
  final_opt.seed = mix_seed(options.seed, 0xf1a1);
  IbiDetector final_model = train_ibi_detector(all, final_opt);
  MetricsReport report = binary_metrics_report(outcomes, bootstrap_iterations, options.seed);
  return {std::move(oof), std::move(outcomes), report, std::move(final_model)};
}

namespace {

// Index of the grid value whose epochs give the best AUC for one feature.
std::size_t best_single_feature_sep(std::span<const SubjectEpochs> subjects, std::size_t n_grid, std::size_t feature) {
  std::size_t best = 0;
  double best_auc = -1.0;
  for (std::size_t g = 0; g < n_grid; ++g) {
    std::vector<double> s;
    std::vector<int> l;
    for (const auto& sub : subjects) {
      for (const auto& e : sub.by_min_sep[g]) {
        s.push_back(e.features.as_array()[feature]);
        l.push_back(e.label);
      }
    }
    const double auc = roc_auc(s, l);
    if (auc > best_auc) {
      best_auc = auc;
      best = g;
    }
  }
  return best;
}

}  // namespace

TaLosoResult train_ta_loso(std::span<const SubjectEpochs> subjects, std::span<const double> grid,
                           ml::ClassifierKind kind, const TaTrainingOptions& options,
                           std::size_t bootstrap_iterations) {
  if (subjects.size() < 2) throw std::invalid_argument("TA training needs at least 2 subjects");
  std::vector<SubjectOutcome> outcomes;
  std::vector<double> fold_sep;
  std::vector<std::vector<double>> feat_scores(kNumTaFeatures);
  std::vector<int> feat_labels;
  std::vector<SubjectOutcome> threshold_outcomes;

  for (std::size_t held = 0; held < subjects.size(); ++held) {
    std::vector<SubjectEpochs> train;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
      if (subjects[s].subject != subjects[held].subject) train.push_back(subjects[s]);
    }
    TaTrainingOptions fold_opt = options;
    fold_opt.seed = mix_seed(options.seed, held);
    TaTrainingReport rep;
    const TaModel model = train_ta_classifier(train, grid, kind, fold_opt, &rep);
    fold_sep.push_back(rep.min_sep_s);
    const std::size_t g = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), rep.min_sep_s) - grid.begin());
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& e : subjects[held].by_min_sep[g]) {
      scores.push_back(model.decision_value(e.features));
      labels.push_back(e.label);
    }
    if (!scores.empty()) outcomes.push_back(binary_outcome(subjects[held].subject, scores, labels));

    for (std::size_t f = 0; f < kNumTaFeatures; ++f) {
      const std::size_t fg = best_single_feature_sep(train, grid.size(), f);
      std::vector<double> thr_scores;
      for (const auto& e : subjects[held].by_min_sep[fg]) {
        feat_scores[f].push_back(e.features.as_array()[f]);
        if (f == 1) thr_scores.push_back(e.features.median - 0.93);
      }
      if (f == 1 && !thr_scores.empty()) {
        std::vector<int> l;
        for (const auto& e : subjects[held].by_min_sep[fg]) l.push_back(e.label);
        threshold_outcomes.push_back(binary_outcome(subjects[held].subject, thr_scores, l));
      }
    }
    for (const auto& e : subjects[held].by_min_sep[0]) feat_labels.push_back(e.label);
  }

  TaTrainingReport final_rep;
  TaTrainingOptions final_opt = options;
  final_opt.seed = mix_seed(options.seed, 0xf1a1);
  TaModel final_model = train_ta_classifier(subjects, grid, kind, final_opt, &final_rep);

  TaLosoResult r{std::move(outcomes), {}, std::move(fold_sep), {}, 0.0, std::move(final_model), std::move(final_rep)};
  r.report = binary_metrics_report(r.outcomes, bootstrap_iterations, options.seed);
  // Epoch counts per subject do not depend on the peak separation, so the
  // labels line up with every feature's scores.
  for (std::size_t f = 0; f < kNumTaFeatures; ++f) r.single_feature_auc[ta_feature_names()[f]] = roc_auc(feat_scores[f], feat_labels);
  r.threshold_kappa = cohens_kappa(pooled_confusion(threshold_outcomes, 2));
  return r;
}

GraderLosoResult train_grader_loso(std::span<const GradeSample> samples, const GraderOptions& options) {
  std::vector<std::string> subjects;
  for (const auto& s : samples) subjects.push_back(s.subject);
  const auto folds = ml::loso_folds(subjects);
  std::vector<int> predicted(samples.size(), 0);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<GradeSample> train;
    for (auto i : folds[f].train) train.push_back(samples[i]);
    GraderOptions fold_opt = options;
    fold_opt.seed = mix_seed(options.seed, f);
    const OvoModel model = train_grader(train, fold_opt);
    for (auto i : folds[f].test) predicted[i] = model.predict(samples[i].features);
  }
  GraderOptions final_opt = options;
  final_opt.seed = mix_seed(options.seed, 0xf1a1);
  OvoModel final_model = train_grader(samples, final_opt);
  GraderLosoResult r{{}, std::move(predicted), ConfusionMatrix(4), 0.0, 0.0, std::move(final_model)};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.actual.push_back(samples[i].grade);
    r.confusion.add(static_cast<std::size_t>(samples[i].grade - 1), static_cast<std::size_t>(r.predicted[i] - 1));
  }
  r.accuracy_pct = accuracy_percent(r.confusion);
  r.kappa = cohens_kappa(r.confusion);
  return r;
}

nlohmann::ordered_json grader_report_json(const GraderLosoResult& r, std::span<const GradeSample> samples) {
  nlohmann::ordered_json j;
  j["accuracy_pct"] = r.accuracy_pct;
  j["kappa"] = r.kappa;
  j["confusion"] = r.confusion.to_json();
  j["confusion_table"] = r.confusion.format_table({"1", "2", "3", "4"});
  auto recs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    nlohmann::ordered_json e;
    e["subject"] = samples[i].subject;
    e["grade"] = samples[i].grade;
    e["predicted"] = r.predicted[i];
    e["features"] = samples[i].features.to_json();
    recs.push_back(e);
  }
  j["recordings"] = recs;
  return j;
}

}  // namespace tagrade
