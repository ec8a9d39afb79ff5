#include "tagrade/hie_grader.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "tagrade/random.hpp"

namespace tagrade {

nlohmann::ordered_json GradeFeatures::to_json() const {
  nlohmann::ordered_json j;
  j["cs_median"] = cs_median;
  j["cs_cov"] = cs_cov;
  j["ta_pct"] = ta_pct;
  j["ta_count"] = ta_count;
  j["ta_max_min"] = ta_max_min;
  return j;
}

const std::vector<std::string>& grade_feature_names() {
  static const std::vector<std::string> names{"cs_median", "cs_cov", "ta_pct", "ta_count", "ta_max_min"};
  return names;
}

double compute_cs_median(std::span<const double> cs) {
  if (cs.empty()) throw std::invalid_argument("CS median of an empty epoch");
  std::vector<double> v(cs.begin(), cs.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double compute_cs_cov(std::span<const double> cs) {
  if (cs.empty()) throw std::invalid_argument("CS variability of an empty epoch");
  const double n = static_cast<double>(cs.size());
  double mean = 0.0;
  for (double v : cs) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : cs) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) return -kCovClamp;
  if (mean == 0.0) return kCovClamp;
  return std::clamp(std::log(std::abs(sd / mean)), -kCovClamp, kCovClamp);
}

double compute_ta_percentage(const SampleMask& mask) {
  if (mask.size() == 0) throw std::invalid_argument("TA percentage of an empty mask");
  return 100.0 * static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

namespace {

std::vector<std::size_t> long_runs(const SampleMask& mask, double min_run_s) {
  std::vector<std::size_t> lengths;
  for (const auto& r : true_runs(mask)) {
    if (static_cast<double>(r.length) >= min_run_s * mask.fs()) lengths.push_back(r.length);
  }
  return lengths;
}

}  // namespace

int count_ta_instances(const SampleMask& mask, double min_run_s) {
  return static_cast<int>(long_runs(mask, min_run_s).size());
}

double compute_ta_max(const SampleMask& mask, double min_run_s) {
  const auto runs = long_runs(mask, min_run_s);
  if (runs.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(runs.begin(), runs.end());
  const double samples = runs.size() == 1 ? static_cast<double>(*hi) : static_cast<double>(*hi - *lo);
  return samples / mask.fs() / 60.0;
}

GradeFeatures grade_features_from(const TaMask& ta, double min_run_s) {
  GradeFeatures f;
  f.cs_median = compute_cs_median(ta.window_cs);
  f.cs_cov = compute_cs_cov(ta.window_cs);
  f.ta_pct = compute_ta_percentage(ta.mask);
  f.ta_count = count_ta_instances(ta.mask, min_run_s);
  f.ta_max_min = compute_ta_max(ta.mask, min_run_s);
  return f;
}

GradeFeatures extract_grade_features(const EegRecording& rec, const IbiDetector& detector, const TaModel& ta_model,
                                     const SampleMask* exclude) {
  if (rec.duration_s() < kMinGradeEpoch_s - 1e-9) throw std::invalid_argument("grading epoch shorter than 30 min");
  return grade_features_from(detect_ta(rec, detector, ta_model, exclude), ta_model.min_run_s());
}

int resolve_votes(std::span<const PairwiseDecision> decisions) {
  if (decisions.empty()) throw std::invalid_argument("no pairwise decisions to vote on");
  std::map<int, std::pair<int, double>> tally;  // grade -> (votes, summed winning margin)
  for (const auto& d : decisions) {
    tally[d.lower];
    tally[d.higher];
    auto& t = tally[d.winner()];
    t.first += 1;
    t.second += std::abs(d.value);
  }
  int best = 0;
  std::pair<int, double> best_t{-1, -1.0};
  for (const auto& [grade, t] : tally) {
    // Ascending grade order, so >= hands exact ties to the more severe grade.
    if (t.first > best_t.first || (t.first == best_t.first && t.second >= best_t.second)) {
      best = grade;
      best_t = t;
    }
  }
  return best;
}

OvoModel::OvoModel(ml::Scaler scaler, std::vector<Pair> pairs) : scaler_(std::move(scaler)), pairs_(std::move(pairs)) {
  if (pairs_.empty()) throw std::invalid_argument("grader needs at least one pairwise model");
  if (scaler_.dims() != 5) throw std::invalid_argument("grader scaler must cover the 5 grade features");
}

std::vector<int> OvoModel::grades() const {
  std::set<int> g;
  for (const auto& p : pairs_) {
    g.insert(p.lower);
    g.insert(p.higher);
  }
  return {g.begin(), g.end()};
}

int OvoModel::predict(const GradeFeatures& f, std::vector<PairwiseDecision>* decisions) const {
  const auto a = f.as_array();
  const auto z = scaler_.apply(a);
  std::vector<PairwiseDecision> d;
  for (const auto& p : pairs_) d.push_back({p.lower, p.higher, p.svm.decision_value(z)});
  const int grade = resolve_votes(d);
  if (decisions) *decisions = std::move(d);
  return grade;
}

nlohmann::ordered_json OvoModel::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "hie_grader";
  j["features"] = grade_feature_names();
  j["scaler"] = scaler_.to_json();
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : pairs_) {
    nlohmann::ordered_json pj;
    pj["lower"] = p.lower;
    pj["higher"] = p.higher;
    pj["svm"] = p.svm.to_json();
    arr.push_back(pj);
  }
  j["pairs"] = arr;
  return j;
}

OvoModel OvoModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) throw std::runtime_error("hie_grader: unsupported format_version");
  if (j.at("type").get<std::string>() != "hie_grader") throw std::runtime_error("not a hie_grader model");
  std::vector<Pair> pairs;
  for (const auto& pj : j.at("pairs")) {
    pairs.push_back({pj.at("lower").get<int>(), pj.at("higher").get<int>(), ml::SvmModel::from_json(pj.at("svm"))});
  }
  return OvoModel(ml::Scaler::from_json(j.at("scaler")), std::move(pairs));
}

OvoModel train_grader(std::span<const GradeSample> samples, const GraderOptions& options) {
  ml::Dataset all;
  std::set<int> grades;
  std::set<std::string> subjects;
  for (const auto& s : samples) {
    if (s.grade < 1 || s.grade > 4) throw std::invalid_argument("grades must lie in 1..4");
    const auto a = s.features.as_array();
    all.x.push_row(a);
    all.y.push_back(s.grade);
    all.subjects.push_back(s.subject);
    grades.insert(s.grade);
    subjects.insert(s.subject);
  }
  if (grades.size() < 2) throw std::invalid_argument("grader needs at least 2 grades");
  if (subjects.size() < 2) throw std::invalid_argument("grader needs at least 2 subjects");

  const ml::Scaler scaler = ml::fit_scaler(all.x);
  const ml::Matrix z = scaler.apply(all.x);
  std::vector<OvoModel::Pair> pairs;
  for (auto lo = grades.begin(); lo != grades.end(); ++lo) {
    for (auto hi = std::next(lo); hi != grades.end(); ++hi) {
      ml::Dataset d;
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (all.y[i] != *lo && all.y[i] != *hi) continue;
        d.x.push_row(z.row(i));
        d.y.push_back(all.y[i] == *lo ? 1 : -1);
        d.subjects.push_back(all.subjects[i]);
      }
      ml::SvmParams p;
      p.kernel = ml::KernelType::Rbf;
      p.standardize = false;
      p.balanced = true;
      ml::GridSearchOptions g;
      g.balanced = true;
      g.folds = options.inner_folds;
      g.seed = mix_seed(options.seed, static_cast<std::uint64_t>(*lo * 10 + *hi));
      const auto choice = ml::nested_grid_search(d, ml::KernelType::Rbf, options.grid, g);
      p.C = choice.C;
      p.gamma = choice.gamma;
      pairs.push_back({*lo, *hi, ml::train_svm(d, p)});
    }
  }
  return OvoModel(scaler, std::move(pairs));
}

}  // namespace tagrade
