#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagrade/ml/matrix.hpp"
#include "tagrade/ml/svm.hpp"

namespace tagrade::ml {

struct Fold {
  std::string held_out;  // subject id for LOSO folds, empty otherwise
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// One fold per distinct subject, in order of first appearance.
std::vector<Fold> loso_folds(std::span<const std::string> subjects);

// k folds of whole subjects, assigned after a seeded shuffle. With fewer
// subjects than k, each subject forms its own fold.
std::vector<Fold> grouped_kfold(std::span<const std::string> subjects, std::size_t k, std::uint64_t seed);

struct HyperGrid {
  std::vector<double> gamma;
  std::vector<double> C;

  // gamma at 10 log-spaced values over [1e-4, 1], C in {0.1, 1, 10, 100, 1000}.
  static HyperGrid standard();
  std::size_t cells() const { return gamma.size() * C.size(); }
};

struct GridChoice {
  double gamma = 1.0;
  double C = 1.0;
  double auc = 0.0;
  std::vector<double> cell_auc;  // C-major: cell_auc[ci * gamma.size() + gi]
};

struct GridSearchOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool balanced = false;
  double tol = 1e-3;
};

// Picks the cell with the highest pooled out-of-fold AUC over grouped inner
// folds. Ties go to the smaller C, then the smaller gamma. Features are
// standardized once on `data`, and each gamma's Gram matrix is shared by all
// folds and C values.
GridChoice nested_grid_search(const Dataset& data, KernelType kernel, const HyperGrid& grid,
                              const GridSearchOptions& options = {});

}  // namespace tagrade::ml
