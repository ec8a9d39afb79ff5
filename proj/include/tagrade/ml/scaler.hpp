#pragma once

#include <json.hpp>

#include <span>
#include <vector>

#include "tagrade/ml/matrix.hpp"

namespace tagrade::ml {

inline constexpr double kScalerStdFloor = 1e-12;

// Per-column standardization, fitted on training rows only.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  static Scaler identity(std::size_t dims);

  std::size_t dims() const { return mean.size(); }
  std::vector<double> apply(std::span<const double> x) const;
  Matrix apply(const Matrix& x) const;
  std::vector<double> inverse(std::span<const double> z) const;

  nlohmann::ordered_json to_json() const;
  static Scaler from_json(const nlohmann::json& j);
};

Scaler fit_scaler(const Matrix& x);

}  // namespace tagrade::ml
