#pragma once

#include <json.hpp>

#include <span>
#include <vector>

#include "tagrade/ml/matrix.hpp"

namespace tagrade::ml {

inline constexpr double kNbVarianceFloor = 1e-9;

// Gaussian naive Bayes for labels +1 / -1.
class NbModel {
 public:
  struct ClassStats {
    double log_prior = 0.0;
    std::vector<double> mean;
    std::vector<double> var;
  };

  NbModel(ClassStats positive, ClassStats negative);

  // log p(+|x) - log p(-|x)
  double decision_value(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return decision_value(x) > 0.0 ? 1 : -1; }
  std::size_t dims() const { return pos_.mean.size(); }

  nlohmann::ordered_json to_json() const;
  static NbModel from_json(const nlohmann::json& j);

 private:
  ClassStats pos_;
  ClassStats neg_;
};

NbModel train_naive_bayes(const Dataset& data);

}  // namespace tagrade::ml
