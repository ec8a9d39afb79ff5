#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "tagrade/hie_grader.hpp"
#include "tagrade/pipeline.hpp"
#include "tagrade/random.hpp"

using namespace tagrade;

namespace {

constexpr double kFs = 4.0;  // coarse grid keeps the masks small

SampleMask mask_with_runs(double total_s, const std::vector<std::pair<double, double>>& runs_s) {
  SampleMask m(static_cast<std::size_t>(total_s * kFs), kFs);
  for (const auto& [a, b] : runs_s) {
    for (auto i = static_cast<std::size_t>(a * kFs); i < static_cast<std::size_t>(b * kFs); ++i) m.set(i);
  }
  return m;
}

// Grade clusters in feature space: milder grades have more and longer TA.
GradeFeatures grade_centre(int grade, Rng& rng) {
  GradeFeatures f;
  const double g = static_cast<double>(grade);
  f.cs_median = -1.5 + 0.8 * g + 0.1 * rng.normal();
  f.cs_cov = 1.0 - 0.4 * g + 0.1 * rng.normal();
  f.ta_pct = std::max(0.0, 60.0 - 18.0 * g + 2.0 * rng.normal());
  f.ta_count = std::max(0, 5 - grade + static_cast<int>(rng.index(2)));
  f.ta_max_min = std::max(0.0, 12.0 - 3.0 * g + 0.5 * rng.normal());
  return f;
}

std::vector<GradeSample> clustered_samples(int per_grade, std::uint64_t seed, std::vector<int> grades = {1, 2, 3, 4}) {
  Rng rng(seed);
  std::vector<GradeSample> out;
  int id = 0;
  for (int g : grades) {
    for (int i = 0; i < per_grade; ++i) out.push_back({grade_centre(g, rng), g, "p" + std::to_string(id++)});
  }
  return out;
}

// Inner AUC saturates on these clusters and ties go to the smallest C, so
// the grid starts at C = 1 where the margin still pins the bias.
GraderOptions small_grid() {
  GraderOptions o;
  o.grid.C = {1.0, 10.0, 100.0};
  o.grid.gamma = {0.1, 1.0};
  o.inner_folds = 3;
  return o;
}

}  // namespace

TEST_CASE("CS median and variability") {
  CHECK(compute_cs_median(std::vector<double>{3, 1, 2}) == 2.0);
  CHECK(compute_cs_median(std::vector<double>{4, 1, 3, 2}) == 2.5);
  CHECK_THROWS(compute_cs_median(std::vector<double>{}));

  CHECK(compute_cs_cov(std::vector<double>(10, -0.7)) == -kCovClamp);
  CHECK(compute_cs_cov(std::vector<double>{-1.0, 1.0}) == kCovClamp);
  // Population std equals |mean|: log 1 = 0.
  CHECK(compute_cs_cov(std::vector<double>{0.0, -2.0}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(compute_cs_cov(std::vector<double>{1.0, 3.0}) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
  CHECK(compute_cs_cov(std::vector<double>{1e-300, 1.0, -1.0}) == kCovClamp);
  CHECK_THROWS(compute_cs_cov(std::vector<double>{}));
}

TEST_CASE("TA percentage is exact") {
  CHECK(compute_ta_percentage(SampleMask(400, kFs, true)) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(compute_ta_percentage(SampleMask(400, kFs, false)) == 0.0);
  CHECK(compute_ta_percentage(mask_with_runs(100.0, {{0.0, 50.0}})) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(compute_ta_percentage(mask_with_runs(100.0, {{10.0, 20.0}, {30.0, 37.5}})) ==
        doctest::Approx(17.5).epsilon(1e-12));
  CHECK_THROWS(compute_ta_percentage(SampleMask(0, kFs)));
}

TEST_CASE("TA instances count runs of at least one minute") {
  CHECK(count_ta_instances(mask_with_runs(1800.0, {{100.0, 220.0}, {600.0, 780.0}})) == 2);
  CHECK(count_ta_instances(mask_with_runs(1800.0, {{100.0, 130.0}})) == 0);
  CHECK(count_ta_instances(mask_with_runs(1800.0, {{100.0, 160.0}})) == 1);
  CHECK(count_ta_instances(mask_with_runs(1800.0, {{100.0, 159.75}})) == 0);
  CHECK(count_ta_instances(mask_with_runs(1800.0, {{100.0, 130.0}, {300.0, 400.0}})) == 1);
}

TEST_CASE("TA max is the spread of run lengths") {
  CHECK(compute_ta_max(mask_with_runs(1800.0, {{0.0, 600.0}})) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(compute_ta_max(mask_with_runs(1800.0, {{0.0, 600.0}, {900.0, 1020.0}})) ==
        doctest::Approx(8.0).epsilon(1e-12));
  CHECK(compute_ta_max(mask_with_runs(1800.0, {{0.0, 30.0}})) == 0.0);
  CHECK(compute_ta_max(SampleMask(100, kFs)) == 0.0);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(77, seed));
    std::vector<std::uint8_t> bits(4000, 0);
    std::size_t i = 0;
    while (i < bits.size()) {
      const bool on = rng.uniform() < 0.5;
      const std::size_t len = 1 + rng.index(600);
      for (std::size_t k = i; k < std::min(bits.size(), i + len); ++k) bits[k] = on ? 1 : 0;
      i += len;
    }
    std::vector<std::size_t> long_runs;
    for (auto len : oracle::run_lengths(bits)) {
      if (static_cast<double>(len) >= kMinTaRun_s * kFs) long_runs.push_back(len);
    }
    const SampleMask m(bits, kFs);
    CHECK(count_ta_instances(m) == static_cast<int>(long_runs.size()));
    double expected = 0.0;
    if (long_runs.size() == 1) expected = static_cast<double>(long_runs[0]) / kFs / 60.0;
    if (long_runs.size() > 1) {
      const auto [lo, hi] = std::minmax_element(long_runs.begin(), long_runs.end());
      expected = static_cast<double>(*hi - *lo) / kFs / 60.0;
    }
    CHECK(compute_ta_max(m) == doctest::Approx(expected).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("features depend on the mask, not on how it was annotated") {
  const AnnotationTrack whole({{0.0, 600.0, EventLabel::Ta, ""}});
  const AnnotationTrack split({{0.0, 250.0, EventLabel::Ta, ""}, {250.0, 600.0, EventLabel::Ta, ""}});
  const auto a = annotations_to_mask(whole, EventLabel::Ta, kFs, 7200);
  const auto b = annotations_to_mask(split, EventLabel::Ta, kFs, 7200);
  CHECK(count_ta_instances(a) == count_ta_instances(b));
  CHECK(count_ta_instances(b) == 1);
  CHECK(compute_ta_max(a) == compute_ta_max(b));
  CHECK(compute_ta_percentage(a) == compute_ta_percentage(b));
}

TEST_CASE("no TA means no TA instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    TaMask ta;
    ta.mask = SampleMask(7200, kFs);
    if (seed % 3 != 0) {
      const auto start = rng.index(5000);
      const auto len = 1 + rng.index(2000);
      for (std::size_t i = start; i < std::min<std::size_t>(7200, start + len); ++i) ta.mask.set(i);
    }
    ta.window_cs.assign(1800, 0.0);
    for (auto& v : ta.window_cs) v = rng.normal();
    const auto f = grade_features_from(ta);
    CHECK((f.ta_pct == 0.0) == (ta.mask.count() == 0));
    if (f.ta_pct == 0.0) {
      CHECK(f.ta_count == 0);
      CHECK(f.ta_max_min == 0.0);
    }
    CHECK(f.ta_count <= static_cast<int>(true_runs(ta.mask).size()));
  }
}

TEST_CASE("vote resolution") {
  SUBCASE("plain majority") {
    const std::vector<PairwiseDecision> d{{1, 2, 0.5}, {1, 3, 0.2}, {2, 3, 1.0}};
    CHECK(resolve_votes(d) == 1);
  }
  SUBCASE("cycle resolved by summed margin") {
    // 1 beats 2, 2 beats 3, 3 beats 1: one vote each.
    const std::vector<PairwiseDecision> d{{1, 2, 0.4}, {2, 3, 2.0}, {1, 3, -0.9}};
    CHECK(resolve_votes(d) == 2);
  }
  SUBCASE("exact tie goes to the more severe grade") {
    const std::vector<PairwiseDecision> d{{1, 2, 0.5}, {2, 3, 0.5}, {1, 3, -0.5}};
    CHECK(resolve_votes(d) == 3);
    const std::vector<PairwiseDecision> two{{2, 4, 0.0}};
    CHECK(resolve_votes(two) == 4);
  }
  SUBCASE("a grade that never wins is never chosen") {
    const std::vector<PairwiseDecision> d{{1, 4, 3.0}, {2, 4, 3.0}, {3, 4, 3.0}, {1, 2, -1.0}, {1, 3, -1.0},
                                          {2, 3, 1.0}};
    CHECK(resolve_votes(d) == 2);
  }
  CHECK_THROWS(resolve_votes(std::vector<PairwiseDecision>{}));
}

TEST_CASE("grader trains one SVM per grade pair") {
  const auto two = clustered_samples(6, 5, {1, 2});
  const auto m2 = train_grader(two, small_grid());
  CHECK(m2.pairs().size() == 1);
  CHECK(m2.grades() == std::vector<int>{1, 2});
  for (const auto& s : two) {
    const int p = m2.predict(s.features);
    CHECK((p == 1 || p == 2));
  }

  const auto four = clustered_samples(5, 6);
  const auto m4 = train_grader(four, small_grid());
  CHECK(m4.pairs().size() == 6);
  std::vector<PairwiseDecision> d;
  m4.predict(four.front().features, &d);
  CHECK(d.size() == 6);

  auto bad = two;
  bad[0].grade = 5;
  CHECK_THROWS(train_grader(bad, small_grid()));
  auto one_grade = two;
  for (auto& s : one_grade) s.grade = 1;
  CHECK_THROWS(train_grader(one_grade, small_grid()));
}

TEST_CASE("grader is deterministic and serializes losslessly") {
  const auto samples = clustered_samples(5, 7);
  const auto a = train_grader(samples, small_grid());
  const auto b = train_grader(samples, small_grid());
  CHECK(a.to_json().dump() == b.to_json().dump());

  const auto back = OvoModel::from_json(nlohmann::json::parse(a.to_json().dump()));
  CHECK(back.to_json().dump() == a.to_json().dump());
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const auto f = grade_centre(1 + static_cast<int>(rng.index(4)), rng);
    CHECK(back.predict(f) == a.predict(f));
  }
  auto j = nlohmann::json::parse(a.to_json().dump());
  j["type"] = "ta_model";
  CHECK_THROWS(OvoModel::from_json(j));
}

TEST_CASE("LOSO grading of separated clusters") {
  const auto samples = clustered_samples(8, 8);
  const auto r = train_grader_loso(samples, small_grid());
  CHECK(r.accuracy_pct >= 90.0);
  CHECK(r.confusion.total() == static_cast<long>(samples.size()));
  CHECK(r.final_model.pairs().size() == 6);
}

TEST_CASE("positive affine rescaling of features leaves grades unchanged") {
  const auto samples = clustered_samples(5, 9);
  auto rescaled = samples;
  const auto rescale = [](GradeFeatures f) {
    f.cs_median = 4.0 * f.cs_median - 3.0;
    f.cs_cov = 0.25 * f.cs_cov + 10.0;
    f.ta_pct = 0.01 * f.ta_pct;
    f.ta_max_min = 60.0 * f.ta_max_min;
    return f;
  };
  for (auto& s : rescaled) s.features = rescale(s.features);
  const auto a = train_grader(samples, small_grid());
  const auto b = train_grader(rescaled, small_grid());
  Rng rng(10);
  for (int i = 0; i < 40; ++i) {
    const auto f = grade_centre(1 + static_cast<int>(rng.index(4)), rng);
    CHECK(a.predict(f) == b.predict(rescale(f)));
  }
}

TEST_CASE("grading needs a 30 minute epoch") {
  const IbiDetector det(FrameSpec{},
                        ml::SvmModel(ml::KernelType::Linear, 1.0, 1.0, ml::Scaler::identity(kNumIbiFeatures),
                                     ml::Matrix(1, kNumIbiFeatures, 0.0), {1.0}, 0.0));
  const TaModel ta(10.0, ml::Classifier(ml::TreeModel({ml::TreeModel::Node{}})));
  std::vector<Channel> ch{{"F3-T3", std::vector<double>(64 * 1200, 0.0)}};
  const EegRecording short_rec(64.0, ch);
  CHECK_THROWS(extract_grade_features(short_rec, det, ta));
}
