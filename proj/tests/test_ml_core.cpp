#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "svm_fuzz.hpp"
#include "tagrade/metrics.hpp"
#include "tagrade/ml/cart.hpp"
#include "tagrade/ml/classifier.hpp"
#include "tagrade/ml/cross_validation.hpp"
#include "tagrade/ml/naive_bayes.hpp"
#include "tagrade/ml/scaler.hpp"
#include "tagrade/ml/svm.hpp"
#include "tagrade/random.hpp"

using namespace tagrade;
using namespace tagrade::ml;

namespace {

Dataset make(std::initializer_list<std::initializer_list<double>> rows, std::vector<int> y) {
  Dataset d;
  for (const auto& r : rows) d.x.push_row(std::vector<double>(r));
  d.y = std::move(y);
  for (std::size_t i = 0; i < d.y.size(); ++i) d.subjects.push_back("s" + std::to_string(i));
  return d;
}

// Two Gaussian blobs in `dims` dimensions, `subjects` subjects.
Dataset blobs(std::size_t n, std::size_t dims, double shift, std::uint64_t seed, std::size_t subjects = 10) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    std::vector<double> row(dims);
    for (auto& v : row) v = rng.normal() + (label > 0 ? shift : 0.0);
    d.x.push_row(row);
    d.y.push_back(label);
    d.subjects.push_back("p" + std::to_string(i % subjects));
  }
  return d;
}

}  // namespace

TEST_CASE("scaler standardizes training columns") {
  Rng rng(1);
  Matrix x;
  for (int i = 0; i < 50; ++i) {
    const double row[3] = {rng.normal() * 5.0 + 3.0, 7.0, rng.uniform(-1.0, 1.0)};
    x.push_row(row);
  }
  const Scaler s = fit_scaler(x);
  const Matrix z = s.apply(x);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    double var = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) mean += z(r, c);
    mean /= static_cast<double>(z.rows());
    for (std::size_t r = 0; r < z.rows(); ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
    const double sd = std::sqrt(var / static_cast<double>(z.rows()));
    CHECK(std::abs(mean) < 1e-9);
    if (c == 1) {
      CHECK(s.std[1] == kScalerStdFloor);
      for (std::size_t r = 0; r < z.rows(); ++r) CHECK(z(r, 1) == 0.0);
    } else {
      CHECK(std::abs(sd - 1.0) < 1e-9);
    }
  }
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto back = s.inverse(z.row(r));
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(back[c] - x(r, c)) < 1e-9);
  }
  const auto roundtrip = Scaler::from_json(s.to_json());
  CHECK(roundtrip.mean == s.mean);
  CHECK(roundtrip.std == s.std);
}

TEST_CASE("a scaler fitted on one fold does not centre another") {
  const Dataset d = blobs(40, 2, 3.0, 7);
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  for (std::size_t i = 0; i < d.size(); ++i) (d.y[i] > 0 ? a : b).push_back(i);
  const Scaler s = fit_scaler(d.x.select_rows(a));
  const Matrix zb = s.apply(d.x.select_rows(b));
  double mean = 0.0;
  for (std::size_t r = 0; r < zb.rows(); ++r) mean += zb(r, 0);
  CHECK(std::abs(mean / static_cast<double>(zb.rows())) > 0.5);
}

TEST_CASE("separable symmetric problem puts the boundary at x = 1.5") {
  const Dataset d = make({{0, 0}, {0, 1}, {3, 0}, {3, 1}}, {-1, -1, 1, 1});
  SvmParams p;
  p.standardize = false;
  const SvmModel m = train_svm(d, p);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(m.predict(d.x.row(i)) == d.y[i]);
  const double at[2] = {1.5, 0.5};
  CHECK(std::abs(m.decision_value(at)) < 1e-3);
  const double left[2] = {1.4, 0.5};
  const double right[2] = {1.6, 0.5};
  CHECK(m.decision_value(left) < 0.0);
  CHECK(m.decision_value(right) > 0.0);
}

TEST_CASE("SMO matches the QP oracle on the fuzz corpus") {
  for (int i = 0; i < 100; ++i) {
    CAPTURE(i);
    const auto result = fuzz::check_svm_case(fuzz::svm_case(i));
    CHECK(result.objective_gap <= 1e-4);
    CHECK(result.prediction_mismatches == 0);
    CHECK(result.max_kkt_violation <= 1e-3);
    CHECK(result.equality_residual <= 1e-8);
    CHECK(result.box_ok);
    CHECK(result.monotone);
  }
}

TEST_CASE("flipping labels negates the decision function") {
  const Dataset d = blobs(60, 3, 1.0, 3);
  Dataset flipped = d;
  for (auto& y : flipped.y) y = -y;
  for (auto kernel : {KernelType::Linear, KernelType::Rbf}) {
    SvmParams p;
    p.kernel = kernel;
    p.gamma = 0.3;
    const SvmModel a = train_svm(d, p);
    const SvmModel b = train_svm(flipped, p);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(a.decision_value(d.x.row(i)) + b.decision_value(d.x.row(i))) < 1e-9);
  }
}

TEST_CASE("rbf decision values are bounded by the coefficients") {
  const Dataset d = blobs(60, 2, 1.0, 4);
  SvmParams p;
  p.kernel = KernelType::Rbf;
  p.C = 10.0;
  p.gamma = 2.0;
  const SvmModel m = train_svm(d, p);
  double bound = std::abs(m.bias());
  for (double c : m.coefficients()) bound += std::abs(c);
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const double x[2] = {rng.uniform(-4, 4), rng.uniform(-4, 4)};
    CHECK(std::abs(m.decision_value(x)) <= bound + 1e-12);
  }
}

TEST_CASE("svm rejects bad input") {
  const Dataset one = make({{0.0}, {1.0}}, {1, 1});
  CHECK_THROWS(train_svm(one, SvmParams{}));
  const Dataset bad = make({{0.0}, {1.0}}, {1, 2});
  CHECK_THROWS(train_svm(bad, SvmParams{}));
  const Dataset ok = make({{0.0}, {1.0}}, {1, -1});
  const SvmModel m = train_svm(ok, SvmParams{});
  const double wrong[2] = {1.0, 2.0};
  CHECK_THROWS(m.decision_value(wrong));
}

TEST_CASE("svm model json roundtrip preserves decisions") {
  const Dataset d = blobs(40, 3, 1.5, 5);
  SvmParams p;
  p.kernel = KernelType::Rbf;
  p.gamma = 0.5;
  const SvmModel m = train_svm(d, p);
  const auto j = m.to_json();
  CHECK(j.at("format_version") == 1);
  const SvmModel back = SvmModel::from_json(nlohmann::json::parse(j.dump()));
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.decision_value(d.x.row(i)) == m.decision_value(d.x.row(i)));
}

TEST_CASE("balanced bounds weight classes by inverse frequency") {
  const std::vector<int> y{1, -1, -1, -1};
  const auto plain = class_upper_bounds(y, 2.0, false);
  for (double u : plain) CHECK(u == 2.0);
  const auto bal = class_upper_bounds(y, 2.0, true);
  CHECK(bal[0] == doctest::Approx(2.0 * 4.0 / 2.0));
  CHECK(bal[1] == doctest::Approx(2.0 * 4.0 / 6.0));
}

TEST_CASE("shared gram rows match on-demand kernel rows") {
  const Dataset d = blobs(12, 2, 1.0, 6);
  const Matrix g = gram_matrix(d.x, KernelType::Rbf, 0.7);
  const std::vector<std::size_t> idx{3, 0, 7, 11};
  const GramSubset sub(g, idx);
  const Matrix picked = d.x.select_rows(idx);
  const DataKernel direct(picked, KernelType::Rbf, 0.7);
  std::vector<double> a(4);
  std::vector<double> b(4);
  for (std::size_t i = 0; i < 4; ++i) {
    sub.fill_row(i, a);
    direct.fill_row(i, b);
    for (std::size_t j = 0; j < 4; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-14));
    CHECK(sub.diagonal(i) == doctest::Approx(1.0));
  }
}

TEST_CASE("scaler in the pipeline makes training invariant to affine rescaling") {
  const Dataset d = blobs(80, 3, 1.2, 8);
  Dataset rescaled = d;
  for (std::size_t r = 0; r < d.size(); ++r) {
    rescaled.x(r, 0) = 1000.0 * d.x(r, 0) - 7.0;
    rescaled.x(r, 1) = 0.01 * d.x(r, 1) + 3.0;
    rescaled.x(r, 2) = 42.0 * d.x(r, 2);
  }
  SvmParams p;
  p.kernel = KernelType::Rbf;
  p.gamma = 0.4;
  const SvmModel a = train_svm(d, p);
  const SvmModel b = train_svm(rescaled, p);
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
    const std::vector<double> xr{1000.0 * x[0] - 7.0, 0.01 * x[1] + 3.0, 42.0 * x[2]};
    CHECK(a.predict(x) == b.predict(xr));
  }
}

TEST_CASE("naive Bayes boundary between two unit Gaussians") {
  Rng rng(10);
  Dataset d;
  for (int i = 0; i < 10000; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    const double v = rng.normal() + (label > 0 ? 2.0 : 0.0);
    d.x.push_row(std::span<const double>(&v, 1));
    d.y.push_back(label);
    d.subjects.push_back("x");
  }
  const NbModel m = train_naive_bayes(d);
  // Bisect the sign change of the decision on [0, 2].
  double lo = 0.0;
  double hi = 2.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (m.decision_value(std::span<const double>(&mid, 1)) > 0.0 ? hi : lo) = mid;
  }
  CHECK(std::abs(lo - 1.0) <= 0.1);
}

TEST_CASE("naive Bayes survives constant features") {
  const Dataset d = make({{1.0, 0.0}, {1.0, 0.1}, {1.0, 2.0}, {1.0, 2.2}}, {-1, -1, 1, 1});
  const NbModel m = train_naive_bayes(d);
  const double x[2] = {1.0, 2.1};
  CHECK(std::isfinite(m.decision_value(x)));
  CHECK(m.predict(x) == 1);
  const NbModel back = NbModel::from_json(m.to_json());
  CHECK(back.decision_value(x) == m.decision_value(x));
  CHECK_THROWS(train_naive_bayes(make({{0.0}, {1.0}}, {1, 1})));
}

TEST_CASE("CART fits axis-separable data") {
  Rng rng(11);
  Dataset d;
  for (int i = 0; i < 200; ++i) {
    const double row[2] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    d.x.push_row(row);
    d.y.push_back(row[0] > 0.2 && row[1] < 0.5 ? 1 : -1);
    d.subjects.push_back("x");
  }
  const TreeModel t = train_cart(d);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += t.predict(d.x.row(i)) == d.y[i];
  CHECK(correct == d.size());
  CHECK(t.depth() <= 4);
  const TreeModel back = TreeModel::from_json(t.to_json());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.decision_value(d.x.row(i)) == t.decision_value(d.x.row(i)));
}

TEST_CASE("CART respects depth and leaf size limits") {
  const Dataset d = blobs(300, 2, 0.3, 12);
  CartParams p;
  p.max_depth = 4;
  p.min_leaf = 5;
  const TreeModel t = train_cart(d, p);
  CHECK(t.depth() <= 4);
  // Count training rows reaching each leaf.
  std::vector<std::size_t> hits(t.nodes().size(), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    int node = 0;
    while (t.nodes()[node].feature >= 0) {
      const auto& n = t.nodes()[node];
      node = d.x(i, n.feature) <= n.threshold ? n.left : n.right;
    }
    ++hits[node];
  }
  for (std::size_t k = 0; k < t.nodes().size(); ++k) {
    if (t.nodes()[k].feature < 0) CHECK(hits[k] >= 5);
  }
}

TEST_CASE("LOSO folds") {
  const std::vector<std::string> s{"a", "a", "b", "c"};
  const auto folds = loso_folds(s);
  REQUIRE(folds.size() == 3);
  CHECK(folds[0].held_out == "a");
  CHECK(folds[0].test == std::vector<std::size_t>{0, 1});
  CHECK(folds[0].train == std::vector<std::size_t>{2, 3});
  std::vector<int> seen(4, 0);
  for (const auto& f : folds) {
    for (auto i : f.test) ++seen[i];
    for (auto i : f.test) CHECK(std::find(f.train.begin(), f.train.end(), i) == f.train.end());
  }
  for (int c : seen) CHECK(c == 1);
  CHECK_THROWS(loso_folds(std::vector<std::string>{"a", "a"}));

  std::vector<std::string> many;
  for (int i = 0; i < 71; ++i) many.push_back("baby" + std::to_string(i));
  CHECK(loso_folds(many).size() == 71);
}

TEST_CASE("grouped k-fold keeps subjects whole") {
  std::vector<std::string> s;
  for (int i = 0; i < 60; ++i) s.push_back("p" + std::to_string(i % 13));
  const auto folds = grouped_kfold(s, 5, 3);
  CHECK(folds.size() == 5);
  std::vector<int> seen(s.size(), 0);
  for (const auto& f : folds) {
    std::set<std::string> test_ids;
    std::set<std::string> train_ids;
    for (auto i : f.test) {
      ++seen[i];
      test_ids.insert(s[i]);
    }
    for (auto i : f.train) train_ids.insert(s[i]);
    for (const auto& id : test_ids) CHECK(train_ids.count(id) == 0);
  }
  for (int c : seen) CHECK(c == 1);
  CHECK(grouped_kfold(std::vector<std::string>{"a", "b", "c"}, 5, 0).size() == 3);
  const auto again = grouped_kfold(s, 5, 3);
  for (std::size_t f = 0; f < folds.size(); ++f) CHECK(again[f].test == folds[f].test);
}

TEST_CASE("standard grid is 10 gammas by 5 Cs") {
  const HyperGrid g = HyperGrid::standard();
  REQUIRE(g.gamma.size() == 10);
  CHECK(g.C == std::vector<double>{0.1, 1, 10, 100, 1000});
  CHECK(g.gamma.front() == doctest::Approx(1e-4));
  CHECK(g.gamma.back() == doctest::Approx(1.0));
  for (std::size_t i = 1; i < g.gamma.size(); ++i) CHECK(g.gamma[i] / g.gamma[i - 1] == doctest::Approx(std::pow(1e4, 1.0 / 9.0)));
  CHECK(g.cells() == 50);
}

TEST_CASE("grid search with one cell returns it") {
  const Dataset d = blobs(60, 2, 1.0, 13);
  HyperGrid g{{0.37}, {4.2}};
  const auto choice = nested_grid_search(d, KernelType::Rbf, g);
  CHECK(choice.gamma == 0.37);
  CHECK(choice.C == 4.2);
  CHECK(choice.cell_auc.size() == 1);
}

TEST_CASE("grid search ties go to the smaller C then the smaller gamma") {
  // Perfectly separable: every cell reaches AUC 1.
  Dataset d = blobs(60, 2, 20.0, 14);
  HyperGrid g{{0.5, 0.1}, {100.0, 1.0, 10.0}};
  const auto choice = nested_grid_search(d, KernelType::Rbf, g);
  for (double a : choice.cell_auc) CHECK(a == 1.0);
  CHECK(choice.C == 1.0);
  CHECK(choice.gamma == 0.1);
}

TEST_CASE("grid search picks the best cell by exhaustive check") {
  const Dataset d = blobs(120, 3, 0.8, 15, 12);
  const HyperGrid g = HyperGrid::standard();
  GridSearchOptions o;
  o.seed = 5;
  const auto choice = nested_grid_search(d, KernelType::Rbf, g, o);
  REQUIRE(choice.cell_auc.size() == 50);
  for (double a : choice.cell_auc) CHECK(choice.auc >= a);
  const auto again = nested_grid_search(d, KernelType::Rbf, g, o);
  CHECK(again.gamma == choice.gamma);
  CHECK(again.C == choice.C);
  CHECK(again.cell_auc == choice.cell_auc);
}

TEST_CASE("grid cell AUC equals a manual grouped cross-validation") {
  const Dataset d = blobs(60, 2, 0.7, 16, 6);
  HyperGrid g{{0.3}, {1.0}};
  GridSearchOptions o;
  o.seed = 2;
  const auto choice = nested_grid_search(d, KernelType::Rbf, g, o);

  // The search standardizes once on all rows, then scores out-of-fold.
  const Scaler s = fit_scaler(d.x);
  Dataset z = d;
  z.x = s.apply(d.x);
  std::vector<double> scores(d.size());
  for (const auto& f : grouped_kfold(d.subjects, o.folds, o.seed)) {
    SvmParams p;
    p.kernel = KernelType::Rbf;
    p.gamma = 0.3;
    p.standardize = false;
    const SvmModel m = train_svm(z.subset(f.train), p);
    for (auto i : f.test) scores[i] = m.decision_value(z.x.row(i));
  }
  CHECK(choice.auc == doctest::Approx(oracle::pairwise_auc(scores, d.y)).epsilon(1e-6));
}

TEST_CASE("classifier wrapper") {
  const Dataset d = blobs(100, 3, 2.0, 17);
  for (auto kind : {ClassifierKind::DecisionTree, ClassifierKind::NaiveBayes, ClassifierKind::SvmLinear, ClassifierKind::SvmRbf}) {
    CAPTURE(to_string(kind));
    CHECK(parse_classifier_kind(to_string(kind)) == kind);
    ClassifierOptions o;
    o.grid = HyperGrid{{0.1, 1.0}, {1.0, 10.0}};
    GridChoice gc;
    const Classifier c = train_classifier(d, kind, o, &gc);
    CHECK(c.kind() == kind);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) correct += c.predict(d.x.row(i)) == d.y[i];
    CHECK(correct >= 90);
    const Classifier back = Classifier::from_json(nlohmann::json::parse(c.to_json().dump()));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.decision_value(d.x.row(i)) == c.decision_value(d.x.row(i)));
    CHECK((c.svm() != nullptr) == (kind == ClassifierKind::SvmLinear || kind == ClassifierKind::SvmRbf));
  }
  CHECK_THROWS(parse_classifier_kind("knn"));

  ClassifierOptions untuned;
  untuned.tune = false;
  const Classifier r = train_classifier(d, ClassifierKind::SvmRbf, untuned);
  CHECK(r.svm()->C() == 1.0);
  CHECK(r.svm()->gamma() == doctest::Approx(1.0 / 3.0));
}
