#include "tagrade/ml/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "tagrade/metrics.hpp"
#include "tagrade/random.hpp"
#include "tagrade/ml/scaler.hpp"

namespace tagrade::ml {

namespace {

std::vector<std::string> distinct_in_order(std::span<const std::string> subjects) {
  std::vector<std::string> order;
  std::map<std::string, bool> seen;
  for (const auto& s : subjects) {
    if (seen.emplace(s, true).second) order.push_back(s);
  }
  return order;
}

}  // namespace

std::vector<Fold> loso_folds(std::span<const std::string> subjects) {
  const auto ids = distinct_in_order(subjects);
  if (ids.size() < 2) throw std::invalid_argument("LOSO needs at least 2 distinct subjects");
  std::vector<Fold> folds;
  folds.reserve(ids.size());
  for (const auto& id : ids) {
    Fold f;
    f.held_out = id;
    for (std::size_t i = 0; i < subjects.size(); ++i) (subjects[i] == id ? f.test : f.train).push_back(i);
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<Fold> grouped_kfold(std::span<const std::string> subjects, std::size_t k, std::uint64_t seed) {
  auto ids = distinct_in_order(subjects);
  if (ids.size() < 2) throw std::invalid_argument("grouped k-fold needs at least 2 distinct subjects");
  if (k < 2) throw std::invalid_argument("grouped k-fold needs k >= 2");
  Rng rng(seed);
  rng.shuffle(ids);
  const std::size_t n_folds = std::min(k, ids.size());
  std::map<std::string, std::size_t> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = i % n_folds;
  std::vector<Fold> folds(n_folds);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const std::size_t f = fold_of[subjects[i]];
    for (std::size_t g = 0; g < n_folds; ++g) (g == f ? folds[g].test : folds[g].train).push_back(i);
  }
  return folds;
}

HyperGrid HyperGrid::standard() {
  HyperGrid g;
  for (int i = 0; i < 10; ++i) g.gamma.push_back(std::pow(10.0, -4.0 + 4.0 * i / 9.0));
  g.C = {0.1, 1.0, 10.0, 100.0, 1000.0};
  return g;
}

GridChoice nested_grid_search(const Dataset& data, KernelType kernel, const HyperGrid& grid,
                              const GridSearchOptions& options) {
  if (grid.gamma.empty() || grid.C.empty()) throw std::invalid_argument("hyperparameter grid is empty");
  data.validate();
  check_binary_labels(data.y);

  GridChoice choice;
  choice.gamma = grid.gamma.front();
  choice.C = grid.C.front();
  choice.cell_auc.assign(grid.cells(), 0.5);
  const Scaler scaler = fit_scaler(data.x);
  const Matrix z = scaler.apply(data.x);
  const auto folds = grouped_kfold(data.subjects, options.folds, options.seed);
  SmoOptions smo;
  smo.tol = options.tol;

  const std::size_t n_gamma = kernel == KernelType::Linear ? 1 : grid.gamma.size();
  for (std::size_t gi = 0; gi < n_gamma; ++gi) {
    const Matrix gram = gram_matrix(z, kernel, grid.gamma[gi]);
    for (std::size_t ci = 0; ci < grid.C.size(); ++ci) {
      std::vector<double> scores(data.size(), 0.0);
      bool ok = true;
      for (const auto& fold : folds) {
        std::vector<int> y_train;
        for (auto i : fold.train) y_train.push_back(data.y[i]);
        bool pos = false;
        bool neg = false;
        for (int v : y_train) (v > 0 ? pos : neg) = true;
        if (!pos || !neg) {
          ok = false;
          break;
        }
        const GramSubset sub(gram, fold.train);
        const auto upper = class_upper_bounds(y_train, grid.C[ci], options.balanced);
        const SmoResult r = solve_smo(sub, y_train, upper, smo);
        for (auto t : fold.test) {
          double f = r.bias;
          for (std::size_t j = 0; j < fold.train.size(); ++j) {
            if (r.alpha[j] > 0.0) f += r.alpha[j] * y_train[j] * gram(fold.train[j], t);
          }
          scores[t] = f;
        }
      }
      const double auc = ok ? roc_auc(scores, data.y) : 0.5;
      if (kernel == KernelType::Linear) {
        for (std::size_t g = 0; g < grid.gamma.size(); ++g) choice.cell_auc[ci * grid.gamma.size() + g] = auc;
      } else {
        choice.cell_auc[ci * grid.gamma.size() + gi] = auc;
      }
    }
  }

  const auto ascending = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
  };
  choice.auc = -1.0;
  for (std::size_t ci : ascending(grid.C)) {
    for (std::size_t gi : ascending(grid.gamma)) {
      const double a = choice.cell_auc[ci * grid.gamma.size() + gi];
      if (a > choice.auc) {
        choice.auc = a;
        choice.C = grid.C[ci];
        choice.gamma = grid.gamma[gi];
      }
    }
  }
  return choice;
}

}  // namespace tagrade::ml
