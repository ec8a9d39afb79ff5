#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/hie_grader.hpp"
#include "tagrade/ibi_detector.hpp"
#include "tagrade/metrics.hpp"
#include "tagrade/pipeline.hpp"
#include "tagrade/report.hpp"
#include "tagrade/synth.hpp"
#include "tagrade/ta_detector.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tagrade;

namespace {

// Bad flags, values or missing inputs: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CorpusEntry {
  std::string subject;
  fs::path recording;
  fs::path annotations;
  std::optional<int> grade;
};

std::vector<CorpusEntry> load_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw UsageError("no manifest.json in " + dir.string());
  const auto j = read_json(path);
  std::vector<CorpusEntry> out;
  for (const auto& r : j.at("recordings")) {
    CorpusEntry e;
    e.subject = r.at("subject").get<std::string>();
    e.recording = dir / r.at("recording").get<std::string>();
    if (r.contains("annotations") && !r.at("annotations").is_null()) e.annotations = dir / r.at("annotations").get<std::string>();
    if (r.contains("grade") && !r.at("grade").is_null()) e.grade = r.at("grade").get<int>();
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error("corpus manifest lists no recordings");
  return out;
}

PreparedRecording load_prepared(const CorpusEntry& e, bool need_annotations) {
  const EegRecording raw = load_recording(e.recording);
  AnnotationTrack ann;
  if (!e.annotations.empty() && fs::exists(e.annotations)) {
    ann = load_annotations(e.annotations);
  } else if (need_annotations) {
    throw std::runtime_error("missing annotations for " + e.subject);
  }
  PreparedRecording p = prepare_recording(raw, montage_for(raw), std::move(ann), e.subject);
  p.grade = e.grade;
  return p;
}

void require_file(const fs::path& p, const char* what) {
  if (p.empty() || !fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

std::vector<int> parse_grades(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    int g = 0;
    try {
      std::size_t used = 0;
      g = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid grade: " + item);
    }
    if (g < 1 || g > 4) throw UsageError("invalid grade " + std::to_string(g) + " (grades are 1-4)");
    out.push_back(g);
  }
  if (out.empty()) throw UsageError("no grades given");
  return out;
}

ordered_json fold_list(const std::vector<SubjectOutcome>& outcomes) {
  auto folds = ordered_json::array();
  for (const auto& o : outcomes) {
    ordered_json f;
    f["subject"] = o.subject;
    f["cases"] = o.scores.size();
    const SubjectOutcome* one[] = {&o};
    const auto auc = pooled_auc(one);
    f["auc"] = auc ? ordered_json(*auc) : ordered_json(nullptr);
    folds.push_back(f);
  }
  return folds;
}

struct Common {
  std::uint64_t seed = 0;
  std::size_t bootstrap = 1000;
};

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::string kind = "hie";
  std::string grades = "1,2,3,4";
  int per_grade = 10;
  int count = 30;
  double duration_s = 0.0;
  double artifacts_per_hour = 0.0;
};

int run_synth(const SynthArgs& a, const Common& c) {
  if (a.kind != "hie" && a.kind != "sleep") throw UsageError("--kind must be hie or sleep");
  if (a.per_grade < 1 || a.count < 1) throw UsageError("recording counts must be positive");
  std::vector<int> grades;
  if (a.kind == "hie") grades = parse_grades(a.grades);
  fs::create_directories(a.out);
  ordered_json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = a.kind;
  manifest["seed"] = c.seed;
  auto recs = ordered_json::array();
  const auto emit = [&](const SynthOutput& o, const std::string& name, std::uint64_t seed) {
    save_recording(o.recording, a.out / (name + ".csv"));
    save_annotations(o.annotations, a.out / (name + ".events.jsonl"));
    ordered_json r;
    r["subject"] = name;
    r["recording"] = name + ".csv";
    r["annotations"] = name + ".events.jsonl";
    r["grade"] = o.grade ? ordered_json(*o.grade) : ordered_json(nullptr);
    r["seed"] = seed;
    r["duration_s"] = o.recording.duration_s();
    r["digest"] = file_digest(a.out / (name + ".csv"));
    recs.push_back(r);
  };
  char name[64];
  if (a.kind == "sleep") {
    const double dur = a.duration_s > 0.0 ? a.duration_s : 2400.0;
    for (int i = 0; i < a.count; ++i) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
      SynthConfig cfg = sleep_config(seed, dur);
      cfg.artifacts_per_hour = a.artifacts_per_hour;
      std::snprintf(name, sizeof(name), "sleep_%03d", i);
      emit(gen_recording(cfg), name, seed);
    }
  } else {
    const double dur = a.duration_s > 0.0 ? a.duration_s : 3600.0;
    for (int g : grades) {
      for (int i = 0; i < a.per_grade; ++i) {
        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
        SynthConfig cfg = hie_config(g, dur, seed);
        cfg.artifacts_per_hour = a.artifacts_per_hour;
        std::snprintf(name, sizeof(name), "hie_g%d_%03d", g, i);
        emit(gen_recording(cfg), name, seed);
      }
    }
  }
  manifest["recordings"] = recs;
  write_json(a.out / "manifest.json", manifest);
  std::cout << "wrote " << recs.size() << " recordings to " << a.out.string() << '\n';
  return 0;
}

// ---- training ---------------------------------------------------------------

struct IbiArgs {
  fs::path corpus;
  fs::path out;
  double C = 1.0;
  std::size_t max_frames = 3000;
  double win_s = 2.0;
  double step_s = 0.5;
};

struct IbiRun {
  std::vector<PreparedRecording> recs;
  IbiLosoResult result;
};

IbiRun ibi_loso(const IbiArgs& a, const Common& c) {
  const auto entries = load_manifest(a.corpus);
  IbiTrainingOptions opt;
  opt.spec = FrameSpec{a.win_s, a.step_s};
  opt.spec.validate();
  opt.C = a.C;
  opt.max_frames = a.max_frames;
  opt.seed = c.seed;
  std::vector<PreparedRecording> recs;
  std::vector<std::vector<FeatureMatrix>> feats;
  for (const auto& e : entries) {
    recs.push_back(load_prepared(e, true));
    feats.push_back(recording_features(recs.back(), opt.spec));
  }
  IbiLosoResult r = train_ibi_loso(recs, feats, opt, c.bootstrap);
  return {std::move(recs), std::move(r)};
}

int run_train_ibi(const IbiArgs& a, const Common& c) {
  const IbiRun run = ibi_loso(a, c);
  fs::create_directories(a.out);
  write_json(a.out / "ibi_model.json", run.result.final_model.to_json());
  ordered_json rep;
  rep["task"] = "inter-burst detection (frame level)";
  rep["seed"] = c.seed;
  rep["metrics"] = run.result.report.to_json();
  rep["table"] = run.result.report.format_table("IBI detector");
  rep["folds"] = fold_list(run.result.outcomes);
  write_json(a.out / "ibi_report.json", rep);
  std::cout << run.result.report.format_table("IBI detector");
  return 0;
}

struct TaArgs {
  IbiArgs ibi;
  std::string classifier = "svm_rbf";
};

int run_train_ta(const TaArgs& a, const Common& c) {
  const auto kind = [&] {
    try {
      return ml::parse_classifier_kind(a.classifier);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  const IbiRun run = ibi_loso(a.ibi, c);
  const auto grid = min_sep_grid();
  std::vector<SubjectEpochs> subjects;
  for (std::size_t r = 0; r < run.recs.size(); ++r) {
    subjects.push_back(build_subject_epochs(run.recs[r].subject, smooth_confidence(run.result.out_of_fold[r]),
                                            ta_truth(run.recs[r]), grid));
  }
  TaTrainingOptions opt;
  opt.seed = c.seed;
  const TaLosoResult res = train_ta_loso(subjects, grid, kind, opt, c.bootstrap);
  fs::create_directories(a.ibi.out);
  write_json(a.ibi.out / "ta_model.json", res.final_model.to_json());
  ordered_json rep;
  rep["task"] = "TA detection (epoch level)";
  rep["classifier"] = a.classifier;
  rep["seed"] = c.seed;
  rep["metrics"] = res.report.to_json();
  rep["table"] = res.report.format_table("TA detector");
  rep["single_feature_auc"] = res.single_feature_auc;
  rep["envelope_threshold_kappa"] = res.threshold_kappa;
  rep["min_sep_s"] = res.final_model.min_sep_s();
  auto folds = fold_list(res.outcomes);
  for (std::size_t i = 0; i < folds.size() && i < res.fold_min_sep.size(); ++i) folds[i]["min_sep_s"] = res.fold_min_sep[i];
  rep["folds"] = folds;
  write_json(a.ibi.out / "ta_report.json", rep);
  std::cout << res.report.format_table("TA detector");
  return 0;
}

struct ModelArgs {
  fs::path ibi_model;
  fs::path ta_model;
  fs::path grader_model;
};

struct LoadedModels {
  std::optional<IbiDetector> ibi;
  std::optional<TaModel> ta;
  std::optional<OvoModel> grader;
};

LoadedModels load_models(const ModelArgs& m, bool need_grader) {
  require_file(m.ibi_model, "IBI model");
  require_file(m.ta_model, "TA model");
  if (need_grader) require_file(m.grader_model, "grader model");
  LoadedModels out;
  out.ibi.emplace(IbiDetector::from_json(read_json(m.ibi_model)));
  out.ta.emplace(TaModel::from_json(read_json(m.ta_model)));
  if (need_grader) out.grader.emplace(OvoModel::from_json(read_json(m.grader_model)));
  return out;
}

std::vector<GradeSample> grade_samples(const std::vector<CorpusEntry>& entries, const LoadedModels& m) {
  std::vector<GradeSample> out;
  for (const auto& e : entries) {
    if (!e.grade) throw std::runtime_error("recording " + e.subject + " has no grade");
    const PreparedRecording p = load_prepared(e, false);
    if (p.eeg.duration_s() < kMinGradeEpoch_s - 1e-9) throw std::runtime_error(e.subject + ": grading needs at least 30 min");
    const TaMask ta = detect_ta(p.eeg, *m.ibi, *m.ta, &p.exclude);
    out.push_back({grade_features_from(ta, m.ta->min_run_s()), *e.grade, e.subject});
  }
  return out;
}

struct GraderArgs {
  fs::path corpus;
  fs::path out;
  ModelArgs models;
};

int run_train_grader(const GraderArgs& a, const Common& c) {
  const LoadedModels m = load_models(a.models, false);
  const auto samples = grade_samples(load_manifest(a.corpus), m);
  GraderOptions opt;
  opt.seed = c.seed;
  const GraderLosoResult r = train_grader_loso(samples, opt);
  fs::create_directories(a.out);
  write_json(a.out / "grader_model.json", r.final_model.to_json());
  ordered_json rep = grader_report_json(r, samples);
  rep = ordered_json{{"task", "HIE grading (recording level)"}, {"seed", c.seed}, {"report", rep}};
  write_json(a.out / "grader_report.json", rep);
  std::cout << r.confusion.format_table({"1", "2", "3", "4"});
  return 0;
}

// ---- single recordings ------------------------------------------------------

struct RecordingArgs {
  fs::path recording;
  fs::path out;
  ModelArgs models;
  bool plot = false;
};

int run_detect(const RecordingArgs& a, bool grade) {
  require_file(a.recording, "recording");
  const LoadedModels m = load_models(a.models, grade);
  const EegRecording raw = load_recording(a.recording);
  const PreparedRecording p = prepare_recording(raw, montage_for(raw), {}, a.recording.stem().string());
  const TaMask ta = detect_ta(p.eeg, *m.ibi, *m.ta, &p.exclude);
  fs::create_directories(a.out);
  save_annotations(AnnotationTrack(mask_to_events(ta.mask, EventLabel::Ta)), a.out / "ta_mask.events.jsonl");
  const GradeFeatures f = grade_features_from(ta, m.ta->min_run_s());
  ordered_json rep;
  rep["recording"] = a.recording.filename().string();
  rep["duration_s"] = p.eeg.duration_s();
  rep["features"] = f.to_json();
  rep["ta_events"] = true_runs(ta.mask).size();
  if (grade) {
    if (p.eeg.duration_s() < kMinGradeEpoch_s - 1e-9) throw std::runtime_error("grading needs at least 30 min");
    std::vector<PairwiseDecision> decisions;
    const int g = m.grader->predict(f, &decisions);
    auto pj = ordered_json::array();
    for (const auto& d : decisions) pj.push_back({{"pair", std::to_string(d.lower) + "v" + std::to_string(d.higher)}, {"decision", d.value}, {"winner", d.winner()}});
    rep["pairwise"] = pj;
    rep["grade"] = g;
  }
  write_json(a.out / (grade ? "grade_report.json" : "detect_report.json"), rep);
  if (a.plot) {
    std::ofstream svg(a.out / "ta_plot.svg", std::ios::binary);
    svg << render_ta_svg(ta, p.eeg.fs(), a.recording.stem().string());
  }
  if (grade) std::cout << "grade " << rep["grade"].get<int>() << '\n';
  std::cout << "TA " << f.ta_pct << " %\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  fs::path corpus;
  fs::path out;
  ModelArgs models;
};

int run_eval(const EvalArgs& a, const Common& c) {
  const auto entries = load_manifest(a.corpus);
  const bool graded = std::all_of(entries.begin(), entries.end(), [](const CorpusEntry& e) { return e.grade.has_value(); });
  const LoadedModels m = load_models(a.models, graded && !a.models.grader_model.empty());
  ordered_json rep;
  rep["seed"] = c.seed;
  if (m.grader) {
    const auto samples = grade_samples(entries, m);
    ConfusionMatrix cm(4);
    for (const auto& s : samples) cm.add(static_cast<std::size_t>(s.grade - 1), static_cast<std::size_t>(m.grader->predict(s.features) - 1));
    rep["task"] = "HIE grading (recording level)";
    rep["accuracy_pct"] = accuracy_percent(cm);
    rep["kappa"] = cohens_kappa(cm);
    rep["confusion"] = cm.to_json();
    rep["confusion_table"] = cm.format_table({"1", "2", "3", "4"});
    std::cout << cm.format_table({"1", "2", "3", "4"});
  } else {
    std::vector<SubjectOutcome> outcomes;
    for (const auto& e : entries) {
      const PreparedRecording p = load_prepared(e, true);
      const ConfidenceSeries cs = confidence_series(p.eeg, *m.ibi, &p.exclude);
      const EnvelopeSeries env = envelope_from_smoothed(smooth_confidence(cs, m.ta->median_window_s()), m.ta->min_sep_s());
      SubjectOutcome o;
      o.subject = e.subject;
      for (const auto& ep : make_epochs(env, ta_truth(p), m.ta->epochs())) {
        const double d = m.ta->decision_value(ep.features);
        o.scores.push_back(d);
        o.labels.push_back(ep.label > 0 ? 1 : 0);
        o.predictions.push_back(d > 0.0 ? 1 : 0);
      }
      if (!o.scores.empty()) outcomes.push_back(std::move(o));
    }
    const MetricsReport r = binary_metrics_report(outcomes, c.bootstrap, c.seed);
    rep["task"] = "TA detection (epoch level)";
    rep["metrics"] = r.to_json();
    rep["table"] = r.format_table("TA detector");
    rep["folds"] = fold_list(outcomes);
    std::cout << r.format_table("TA detector");
  }
  fs::create_directories(a.out);
  write_json(a.out / "eval_report.json", rep);
  return 0;
}

void add_models(CLI::App* cmd, ModelArgs& m, bool grader) {
  cmd->add_option("--ibi-model", m.ibi_model, "IBI detector JSON")->required();
  cmd->add_option("--ta-model", m.ta_model, "TA detector JSON")->required();
  if (grader) cmd->add_option("--grader-model", m.grader_model, "HIE grader JSON");
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "random seed")->envname("TA_GRADE_SEED");
  cmd->add_option("--bootstrap", c.bootstrap, "bootstrap iterations")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-alternant detection and HIE grading for neonatal EEG"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file read before the subcommand; keys go under [<subcommand>], flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Common common;
  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate an annotated synthetic corpus");
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--kind", synth.kind, "hie or sleep")->capture_default_str();
  c_synth->add_option("--grades", synth.grades, "comma-separated HIE grades")->capture_default_str();
  c_synth->add_option("--per-grade", synth.per_grade, "recordings per grade")->capture_default_str();
  c_synth->add_option("--count", synth.count, "sleep recordings")->capture_default_str();
  c_synth->add_option("--duration", synth.duration_s, "seconds per recording (default 2400 sleep, 3600 hie)");
  c_synth->add_option("--artifacts-per-hour", synth.artifacts_per_hour, "electrode spike rate");
  add_common(c_synth, common);

  TaArgs ta;
  IbiArgs& ibi = ta.ibi;
  auto* c_ibi = app.add_subcommand("train-ibi", "train the inter-burst detector with a LOSO report");
  auto* c_ta = app.add_subcommand("train-ta", "train the TA epoch classifier with a LOSO report");
  for (auto* cmd : {c_ibi, c_ta}) {
    cmd->add_option("--corpus", ibi.corpus, "corpus directory with manifest.json")->required();
    cmd->add_option("--out", ibi.out, "output directory")->required();
    cmd->add_option("--C", ibi.C, "IBI SVM box constraint")->check(CLI::PositiveNumber);
    cmd->add_option("--max-frames", ibi.max_frames, "IBI training frame cap")->check(CLI::PositiveNumber);
    cmd->add_option("--win", ibi.win_s, "frame length (s)")->check(CLI::PositiveNumber);
    cmd->add_option("--step", ibi.step_s, "frame step (s)")->check(CLI::PositiveNumber);
    add_common(cmd, common);
  }
  c_ta->add_option("--classifier", ta.classifier, "dt, nb, svm_linear or svm_rbf")->capture_default_str();

  GraderArgs grader;
  auto* c_grader = app.add_subcommand("train-grader", "train the HIE grader with a LOSO report");
  c_grader->add_option("--corpus", grader.corpus, "graded corpus directory")->required();
  c_grader->add_option("--out", grader.out, "output directory")->required();
  add_models(c_grader, grader.models, false);
  add_common(c_grader, common);

  RecordingArgs rec;
  auto* c_detect = app.add_subcommand("detect-ta", "TA mask for one recording");
  auto* c_grade = app.add_subcommand("grade", "HIE grade for one recording");
  for (auto* cmd : {c_detect, c_grade}) {
    cmd->add_option("--recording", rec.recording, "CSV recording")->required();
    cmd->add_option("--out", rec.out, "output directory")->required();
    cmd->add_flag("--plot", rec.plot, "write an SVG of CS, envelope and TA mask");
    add_models(cmd, rec.models, cmd == c_grade);
  }
  c_grade->get_option("--grader-model")->required();

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "evaluate trained models on a corpus");
  c_eval->add_option("--corpus", eval.corpus, "corpus directory")->required();
  c_eval->add_option("--out", eval.out, "output directory")->required();
  add_models(c_eval, eval.models, true);
  add_common(c_eval, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_synth->parsed()) return run_synth(synth, common);
    if (c_ibi->parsed()) return run_train_ibi(ibi, common);
    if (c_ta->parsed()) return run_train_ta(ta, common);
    if (c_grader->parsed()) return run_train_grader(grader, common);
    if (c_detect->parsed()) return run_detect(rec, false);
    if (c_grade->parsed()) return run_detect(rec, true);
    if (c_eval->parsed()) return run_eval(eval, common);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
