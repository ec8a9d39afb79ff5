#pragma once

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "tagrade/ml/matrix.hpp"
#include "tagrade/ml/scaler.hpp"

namespace tagrade::ml {

enum class KernelType { Linear, Rbf };

std::string_view to_string(KernelType k);
KernelType parse_kernel(std::string_view text);

double kernel_value(KernelType kernel, double gamma, std::span<const double> a, std::span<const double> b);

// Rows of the kernel matrix of one training problem.
class KernelRowSource {
 public:
  virtual ~KernelRowSource() = default;
  virtual std::size_t size() const = 0;
  virtual double diagonal(std::size_t i) const = 0;
  virtual void fill_row(std::size_t i, std::span<double> out) const = 0;
};

// Kernel evaluated on demand from feature rows.
class DataKernel final : public KernelRowSource {
 public:
  DataKernel(const Matrix& x, KernelType kernel, double gamma) : x_(x), kernel_(kernel), gamma_(gamma) {}
  std::size_t size() const override { return x_.rows(); }
  double diagonal(std::size_t i) const override;
  void fill_row(std::size_t i, std::span<double> out) const override;

 private:
  const Matrix& x_;
  KernelType kernel_;
  double gamma_;
};

// A sub-problem indexing into a precomputed Gram matrix; lets grid searches
// share one kernel matrix across folds and C values.
class GramSubset final : public KernelRowSource {
 public:
  GramSubset(const Matrix& gram, std::span<const std::size_t> indices) : gram_(gram), idx_(indices) {}
  std::size_t size() const override { return idx_.size(); }
  double diagonal(std::size_t i) const override { return gram_(idx_[i], idx_[i]); }
  void fill_row(std::size_t i, std::span<double> out) const override;

 private:
  const Matrix& gram_;
  std::span<const std::size_t> idx_;
};

Matrix gram_matrix(const Matrix& x, KernelType kernel, double gamma);

struct SmoOptions {
  double tol = 1e-3;
  std::size_t max_iter = 0;  // 0: max(1e7, 100 n)
  bool record_objective = false;
  std::size_t cache_bytes = std::size_t{256} << 20;
};

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;  // f(x) = sum alpha_i y_i K(x_i, x) + bias
  std::size_t iterations = 0;
  bool converged = false;
  double dual_objective = 0.0;
  std::vector<double> objective_trace;  // dual objective after each step
};

// Maximizes sum(a) - a'Qa/2 subject to 0 <= a_i <= upper_i and y'a = 0
// using maximal-violating-pair SMO.
SmoResult solve_smo(const KernelRowSource& kernel, std::span<const int> y, std::span<const double> upper,
                    const SmoOptions& options = {});

// Per-sample box constraints; `balanced` weights each class by n / (2 n_c).
std::vector<double> class_upper_bounds(std::span<const int> y, double C, bool balanced);

struct SvmParams {
  KernelType kernel = KernelType::Linear;
  double C = 1.0;
  double gamma = 1.0;
  double tol = 1e-3;
  bool balanced = false;
  bool standardize = true;
  std::size_t max_iter = 0;
  bool record_objective = false;
};

class SvmModel {
 public:
  SvmModel(KernelType kernel, double gamma, double C, Scaler scaler, Matrix support_vectors,
           std::vector<double> coefficients, double bias);

  // sum_i (alpha_i y_i) K(s_i, scale(x)) + b. This is the confidence score.
  double decision_value(std::span<const double> x) const;
  // Decision value for an already-standardized input.
  double decision_value_scaled(std::span<const double> z) const;
  int predict(std::span<const double> x) const { return decision_value(x) > 0.0 ? 1 : -1; }

  KernelType kernel() const { return kernel_; }
  double gamma() const { return gamma_; }
  double C() const { return C_; }
  double bias() const { return bias_; }
  const Scaler& scaler() const { return scaler_; }
  const Matrix& support_vectors() const { return sv_; }
  const std::vector<double>& coefficients() const { return coef_; }
  std::size_t dims() const { return scaler_.dims(); }

  nlohmann::ordered_json to_json() const;
  static SvmModel from_json(const nlohmann::json& j);

 private:
  KernelType kernel_;
  double gamma_;
  double C_;
  Scaler scaler_;
  Matrix sv_;
  std::vector<double> coef_;
  double bias_;
  std::vector<double> w_;  // linear kernel only
};

// Labels must be +1/-1 with both present.
SvmModel train_svm(const Dataset& data, const SvmParams& params, SmoResult* diagnostics = nullptr);

// Keep the support vectors (alpha > 0) of a solved problem over scaled rows.
SvmModel assemble_svm(const SvmParams& params, const Scaler& scaler, const Matrix& scaled_x,
                      std::span<const int> y, const SmoResult& solution);

void check_binary_labels(std::span<const int> y);

}  // namespace tagrade::ml
