#include "tagrade/ml/scaler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tagrade::ml {

Scaler Scaler::identity(std::size_t dims) { return Scaler{std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0)}; }

std::vector<double> Scaler::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw std::invalid_argument("scaler: dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / std[j];
  return out;
}

Matrix Scaler::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw std::invalid_argument("scaler: dimension mismatch");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = (x(i, j) - mean[j]) / std[j];
  }
  return out;
}

std::vector<double> Scaler::inverse(std::span<const double> z) const {
  if (z.size() != mean.size()) throw std::invalid_argument("scaler: dimension mismatch");
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * std[j] + mean[j];
  return out;
}

nlohmann::ordered_json Scaler::to_json() const {
  nlohmann::ordered_json j;
  j["mean"] = mean;
  j["std"] = std;
  return j;
}

Scaler Scaler::from_json(const nlohmann::json& j) {
  Scaler s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  if (s.mean.size() != s.std.size()) throw std::runtime_error("scaler: mean/std length mismatch");
  return s;
}

Scaler fit_scaler(const Matrix& x) {
  if (x.rows() < 2) throw std::invalid_argument("scaler needs at least 2 rows");
  const std::size_t d = x.cols();
  Scaler s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += x(i, j);
  }
  for (double& m : s.mean) m /= n;
  // A constant column must map to exact zeros despite rounding in the mean.
  for (std::size_t j = 0; j < d; ++j) {
    bool constant = true;
    for (std::size_t i = 1; i < x.rows() && constant; ++i) constant = x(i, j) == x(0, j);
    if (constant) s.mean[j] = x(0, j);
  }
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x(i, j) - s.mean[j];
      s.std[j] += c * c;
    }
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / n), kScalerStdFloor);
  return s;
}

}  // namespace tagrade::ml
