#pragma once

#include <json.hpp>

#include <cstddef>
#include <span>
#include <vector>

#include "tagrade/ml/matrix.hpp"

namespace tagrade::ml {

struct CartParams {
  int max_depth = 4;
  std::size_t min_leaf = 5;
};

// Binary CART tree (Gini impurity). Scores are the positive-class fraction
// of the reached leaf, shifted by -0.5 so the sign gives the class.
class TreeModel {
 public:
  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;   // x[feature] <= threshold
    int right = -1;
    double positive_fraction = 0.0;
  };

  explicit TreeModel(std::vector<Node> nodes);

  double decision_value(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return decision_value(x) > 0.0 ? 1 : -1; }
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  nlohmann::ordered_json to_json() const;
  static TreeModel from_json(const nlohmann::json& j);

 private:
  std::vector<Node> nodes_;
};

TreeModel train_cart(const Dataset& data, const CartParams& params = {});

}  // namespace tagrade::ml
