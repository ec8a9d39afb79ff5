#include "tagrade/ta_detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tagrade/metrics.hpp"

namespace tagrade {

std::vector<double> expand_frame_scores(std::span<const double> frame_scores, const FeatureMatrix& frames,
                                        std::size_t n_samples) {
  if (frame_scores.size() != frames.size()) throw std::invalid_argument("one score per frame expected");
  std::vector<double> out(n_samples, 0.0);
  if (frames.size() == 0) return out;
  const double half = 0.5 * static_cast<double>(frames.frame_len);
  const double step = static_cast<double>(frames.step_len);
  for (std::size_t k = 0; k < n_samples; ++k) {
    // Frame f is centred at f * step + half; take the nearest, lower on ties.
    const double pos = (static_cast<double>(k) + 0.5 - half) / step;
    double f = std::ceil(pos - 0.5);
    f = std::clamp(f, 0.0, static_cast<double>(frames.size() - 1));
    out[k] = frame_scores[static_cast<std::size_t>(f)];
  }
  return out;
}

ConfidenceSeries confidence_from_features(std::span<const FeatureMatrix> channels, const IbiDetector& detector,
                                          std::size_t n_samples) {
  ConfidenceSeries cs;
  for (const auto& fm : channels) {
    if (cs.fs == 0.0) cs.fs = fm.fs;
    cs.channels.push_back(expand_frame_scores(detector.frame_scores(fm), fm, n_samples));
  }
  return cs;
}

ConfidenceSeries confidence_series(const EegRecording& rec, const IbiDetector& detector, const SampleMask* exclude) {
  const auto frame_len = static_cast<std::size_t>(std::llround(detector.spec().win_s * rec.fs()));
  if (rec.num_samples() < frame_len) throw std::invalid_argument("recording shorter than one frame");
  std::vector<FeatureMatrix> fms;
  for (const auto& ch : rec.channels()) {
    fms.push_back(build_feature_matrix(ch.samples, rec.fs(), detector.spec(), exclude));
  }
  return confidence_from_features(fms, detector, rec.num_samples());
}

std::vector<double> moving_median(std::span<const double> x, double window_s, double fs) {
  if (!(window_s > 0.0) || !(fs > 0.0)) throw std::invalid_argument("median window must be positive");
  const std::size_t n = x.size();
  std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(window_s * fs)));
  if (w % 2 == 0) ++w;
  const std::size_t half = w / 2;
  std::vector<double> out(n);
  std::vector<double> win;  // sorted contents of [lo, hi)
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t want_lo = i >= half ? i - half : 0;
    const std::size_t want_hi = std::min(n, i + half + 1);
    while (hi < want_hi) {
      win.insert(std::upper_bound(win.begin(), win.end(), x[hi]), x[hi]);
      ++hi;
    }
    while (lo < want_lo) {
      win.erase(std::lower_bound(win.begin(), win.end(), x[lo]));
      ++lo;
    }
    const std::size_t m = win.size();
    out[i] = m % 2 ? win[m / 2] : 0.5 * (win[m / 2 - 1] + win[m / 2]);
  }
  return out;
}

std::vector<double> sigmoid_standardize(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
  }
  return out;
}

namespace {

// Second derivatives of the natural cubic spline through (xs, ys).
std::vector<double> spline_moments(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t k = xs.size();
  std::vector<double> m(k, 0.0);
  if (k < 3) return m;
  const std::size_t n = k - 2;
  std::vector<double> diag(n), upper(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double h0 = xs[i + 1] - xs[i];
    const double h1 = xs[i + 2] - xs[i + 1];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
  }
  // Thomas algorithm; the sub-diagonal equals the previous row's upper entry.
  for (std::size_t i = 1; i < n; ++i) {
    const double w = upper[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> sol(n);
  sol[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
  for (std::size_t i = 0; i < n; ++i) m[i + 1] = sol[i];
  return m;
}

}  // namespace

EnvelopeSeries envelope_from_peaks(std::span<const double> x, double fs, double min_sep_s) {
  if (!(min_sep_s > 0.0)) throw std::invalid_argument("min_sep_s must be positive");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("envelope needs at least 3 samples");

  struct Peak {
    std::size_t pos;
    double value;
  };
  std::vector<Peak> peaks;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (x[i] > x[i - 1]) {
      std::size_t j = i;
      while (j + 1 < n && x[j + 1] == x[i]) ++j;
      if (j + 1 < n && x[j + 1] < x[i]) peaks.push_back({i + (j - i) / 2, x[i]});
      i = j + 1;
    } else {
      ++i;
    }
  }

  EnvelopeSeries env;
  env.fs = fs;
  if (peaks.empty()) {
    env.values.assign(n, std::clamp(*std::max_element(x.begin(), x.end()), 0.0, 1.0));
    return env;
  }

  std::vector<std::size_t> order(peaks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return peaks[a].value > peaks[b].value; });
  const double min_gap = min_sep_s * fs;
  std::set<std::size_t> kept;
  for (std::size_t o : order) {
    const std::size_t p = peaks[o].pos;
    auto next = kept.lower_bound(p);
    if (next != kept.end() && static_cast<double>(*next - p) < min_gap) continue;
    if (next != kept.begin() && static_cast<double>(p - *std::prev(next)) < min_gap) continue;
    kept.insert(p);
  }

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t p : kept) {
    xs.push_back(static_cast<double>(p));
    ys.push_back(x[p]);
  }
  const auto m = spline_moments(xs, ys);
  env.values.resize(n);
  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k);
    double v;
    if (t <= xs.front()) {
      v = ys.front();
    } else if (t >= xs.back()) {
      v = ys.back();
    } else {
      while (xs[seg + 1] < t) ++seg;
      const double h = xs[seg + 1] - xs[seg];
      const double a = (xs[seg + 1] - t) / h;
      const double b = (t - xs[seg]) / h;
      v = a * ys[seg] + b * ys[seg + 1] + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0;
    }
    env.values[k] = std::clamp(v, 0.0, 1.0);
  }
  return env;
}

EnvelopeSeries summarize_channels(std::span<const EnvelopeSeries> envelopes) {
  if (envelopes.empty()) throw std::invalid_argument("no envelopes to summarize");
  EnvelopeSeries out;
  out.fs = envelopes.front().fs;
  out.values.assign(envelopes.front().values.size(), 0.0);
  for (const auto& e : envelopes) {
    if (e.values.size() != out.values.size()) throw std::invalid_argument("envelope lengths differ");
    for (std::size_t k = 0; k < e.values.size(); ++k) out.values[k] += e.values[k];
  }
  const double inv = 1.0 / static_cast<double>(envelopes.size());
  for (auto& v : out.values) v = std::clamp(v * inv, 0.0, 1.0);
  return out;
}

ConfidenceSeries smooth_confidence(const ConfidenceSeries& cs, double median_window_s) {
  ConfidenceSeries out;
  out.fs = cs.fs;
  for (const auto& ch : cs.channels) out.channels.push_back(sigmoid_standardize(moving_median(ch, median_window_s, cs.fs)));
  return out;
}

EnvelopeSeries envelope_from_smoothed(const ConfidenceSeries& smoothed, double min_sep_s) {
  std::vector<EnvelopeSeries> envs;
  for (const auto& ch : smoothed.channels) envs.push_back(envelope_from_peaks(ch, smoothed.fs, min_sep_s));
  return summarize_channels(envs);
}

const std::vector<std::string>& ta_feature_names() {
  static const std::vector<std::string> names{"rms", "median", "max"};
  return names;
}

TaEpochFeatures epoch_features(std::span<const double> envelope) {
  if (envelope.empty()) throw std::invalid_argument("empty epoch");
  TaEpochFeatures f;
  double ss = 0.0;
  for (double v : envelope) ss += v * v;
  f.rms = std::sqrt(ss / static_cast<double>(envelope.size()));
  std::vector<double> tmp(envelope.begin(), envelope.end());
  const std::size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
  f.median = tmp[mid];
  if (tmp.size() % 2 == 0) {
    f.median = 0.5 * (f.median + *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  f.max = *std::max_element(envelope.begin(), envelope.end());
  f.rms = std::min(f.rms, f.max);
  return f;
}

void EpochSpec::validate() const {
  if (!(epoch_s > 0.0) || !(overlap_s >= 0.0) || !(overlap_s < epoch_s)) {
    throw std::invalid_argument("epoch length must be positive and exceed the overlap");
  }
}

std::vector<TaEpoch> make_epochs(const EnvelopeSeries& env, const SampleMask& ta_truth, const EpochSpec& spec) {
  spec.validate();
  const std::size_t n = env.values.size();
  if (ta_truth.size() != n) throw std::invalid_argument("TA mask and envelope lengths differ");
  const auto len = static_cast<std::size_t>(std::llround(spec.epoch_s * env.fs));
  const auto step = static_cast<std::size_t>(std::llround((spec.epoch_s - spec.overlap_s) * env.fs));
  if (n < len) throw std::invalid_argument("envelope shorter than one epoch");
  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + (ta_truth[k] ? 1 : 0);
  std::vector<TaEpoch> out;
  for (std::size_t s = 0; s + len <= n; s += step) {
    const std::size_t ta = prefix[s + len] - prefix[s];
    if (ta != 0 && ta != len) continue;
    TaEpoch e;
    e.start = s;
    e.label = ta == len ? 1 : -1;
    e.features = epoch_features(std::span<const double>(env.values).subspan(s, len));
    out.push_back(e);
  }
  return out;
}

std::vector<TaEpoch> make_epochs(const EnvelopeSeries& env, const AnnotationTrack& annotations,
                                 const EpochSpec& spec) {
  return make_epochs(env, annotations_to_mask(annotations, EventLabel::Ta, env.fs, env.values.size()), spec);
}

SampleMask threshold_detector(const EnvelopeSeries& env, double threshold) {
  SampleMask m(env.values.size(), env.fs);
  for (std::size_t k = 0; k < env.values.size(); ++k) {
    if (env.values[k] > threshold) m.set(k);
  }
  return m;
}

SampleMask suppress_short_runs(const SampleMask& mask, double min_run_s) {
  SampleMask out = mask;
  const double min_len = min_run_s * mask.fs();
  for (const auto& r : true_runs(mask)) {
    if (static_cast<double>(r.length) < min_len) {
      for (std::size_t k = r.start; k < r.start + r.length; ++k) out.set(k, false);
    }
  }
  return out;
}

std::vector<double> min_sep_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 20; ++i) g.push_back(2.5 * i);
  return g;
}

TaModel::TaModel(double min_sep_s, ml::Classifier classifier, EpochSpec epochs, double median_window_s,
                 double min_run_s)
    : min_sep_s_(min_sep_s),
      classifier_(std::move(classifier)),
      epochs_(epochs),
      median_window_s_(median_window_s),
      min_run_s_(min_run_s) {
  if (!(min_sep_s > 0.0)) throw std::invalid_argument("min_sep_s must be positive");
  epochs_.validate();
}

double TaModel::decision_value(const TaEpochFeatures& f) const {
  const auto a = f.as_array();
  return classifier_.decision_value(a);
}

nlohmann::ordered_json TaModel::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "ta_detector";
  j["min_sep_s"] = min_sep_s_;
  j["epoch_s"] = epochs_.epoch_s;
  j["overlap_s"] = epochs_.overlap_s;
  j["median_window_s"] = median_window_s_;
  j["min_run_s"] = min_run_s_;
  j["features"] = ta_feature_names();
  j["classifier"] = classifier_.to_json();
  return j;
}

TaModel TaModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) throw std::runtime_error("ta_detector: unsupported format_version");
  if (j.at("type").get<std::string>() != "ta_detector") throw std::runtime_error("not a ta_detector model");
  EpochSpec e{j.at("epoch_s").get<double>(), j.at("overlap_s").get<double>()};
  return TaModel(j.at("min_sep_s").get<double>(), ml::Classifier::from_json(j.at("classifier")), e,
                 j.at("median_window_s").get<double>(), j.at("min_run_s").get<double>());
}

SubjectEpochs build_subject_epochs(const std::string& subject, const ConfidenceSeries& smoothed,
                                   const SampleMask& ta_truth, std::span<const double> grid, const EpochSpec& spec) {
  SubjectEpochs out;
  out.subject = subject;
  for (double sep : grid) out.by_min_sep.push_back(make_epochs(envelope_from_smoothed(smoothed, sep), ta_truth, spec));
  return out;
}

ml::Dataset epoch_dataset(std::span<const SubjectEpochs> subjects, std::size_t grid_index) {
  ml::Dataset d;
  for (const auto& s : subjects) {
    for (const auto& e : s.by_min_sep.at(grid_index)) {
      const auto a = e.features.as_array();
      d.x.push_row(a);
      d.y.push_back(e.label);
      d.subjects.push_back(s.subject);
    }
  }
  return d;
}

namespace {

// Pooled out-of-fold AUC of a classifier trained with default settings.
double inner_cv_auc(const ml::Dataset& data, ml::ClassifierKind kind, const TaTrainingOptions& options) {
  const auto folds = ml::grouped_kfold(data.subjects, options.inner_folds, options.seed);
  ml::ClassifierOptions copt = options.classifier;
  copt.tune = false;
  std::vector<double> scores(data.size(), 0.0);
  for (const auto& fold : folds) {
    const ml::Dataset train = data.subset(fold.train);
    if (train.count_label(1) == 0 || train.count_label(-1) == 0) return 0.5;
    const ml::Classifier c = ml::train_classifier(train, kind, copt);
    for (auto t : fold.test) scores[t] = c.decision_value(data.x.row(t));
  }
  return roc_auc(scores, data.y);
}

}  // namespace

TaModel train_ta_classifier(std::span<const SubjectEpochs> subjects, std::span<const double> grid,
                            ml::ClassifierKind kind, const TaTrainingOptions& options, TaTrainingReport* report) {
  if (grid.empty()) throw std::invalid_argument("min_sep grid is empty");
  TaTrainingReport rep;
  std::size_t best = 0;
  if (grid.size() > 1) {
    double best_auc = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const ml::Dataset d = epoch_dataset(subjects, g);
      ml::check_binary_labels(d.y);
      const double auc = inner_cv_auc(d, kind, options);
      rep.min_sep_auc.push_back(auc);
      if (auc > best_auc) {
        best_auc = auc;
        best = g;
      }
    }
  }
  const ml::Dataset chosen = epoch_dataset(subjects, best);
  ml::check_binary_labels(chosen.y);
  ml::ClassifierOptions copt = options.classifier;
  copt.seed = options.seed;
  copt.inner_folds = options.inner_folds;
  rep.min_sep_s = grid[best];
  TaModel model(grid[best], ml::train_classifier(chosen, kind, copt, &rep.hyper));
  if (report) *report = std::move(rep);
  return model;
}

TaMask detect_ta_from_confidence(const ConfidenceSeries& cs, const TaModel& model, double step_s) {
  const std::size_t n = cs.size();
  const auto len = static_cast<std::size_t>(std::llround(model.epochs().epoch_s * cs.fs));
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(step_s * cs.fs)));
  if (n < len) throw std::invalid_argument("recording shorter than one TA epoch");

  TaMask out;
  out.window_step_s = step_s;
  const ConfidenceSeries smoothed = smooth_confidence(cs, model.median_window_s());
  out.envelope = envelope_from_smoothed(smoothed, model.min_sep_s());
  out.smoothed_cs.assign(n, 0.0);
  for (const auto& ch : smoothed.channels) {
    for (std::size_t k = 0; k < n; ++k) out.smoothed_cs[k] += ch[k] / static_cast<double>(smoothed.channels.size());
  }

  std::vector<double> sum(n + 1, 0.0);
  std::vector<long> cover(n + 1, 0);
  const std::span<const double> env(out.envelope.values);
  for (std::size_t s = 0; s + len <= n; s += step) {
    const double d = model.decision_value(epoch_features(env.subspan(s, len)));
    out.window_cs.push_back(d);
    sum[s] += d;
    sum[s + len] -= d;
    cover[s] += 1;
    cover[s + len] -= 1;
  }
  out.sample_cs.assign(n, 0.0);
  double acc = 0.0;
  long cov = 0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += sum[k];
    cov += cover[k];
    out.sample_cs[k] = cov > 0 ? acc / static_cast<double>(cov) : out.window_cs.back();
  }
  SampleMask raw(n, cs.fs);
  for (std::size_t k = 0; k < n; ++k) {
    if (out.sample_cs[k] > 0.0) raw.set(k);
  }
  out.mask = suppress_short_runs(raw, model.min_run_s());
  return out;
}

TaMask detect_ta(const EegRecording& rec, const IbiDetector& detector, const TaModel& model,
                 const SampleMask* exclude) {
  const auto len = static_cast<std::size_t>(std::llround(model.epochs().epoch_s * rec.fs()));
  if (rec.num_samples() < len) throw std::invalid_argument("recording shorter than one TA epoch");
  return detect_ta_from_confidence(confidence_series(rec, detector, exclude), model);
}

}  // namespace tagrade
