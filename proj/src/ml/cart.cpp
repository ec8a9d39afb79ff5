#include "tagrade/ml/cart.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "tagrade/ml/svm.hpp"

namespace tagrade::ml {
namespace {

double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

class Builder {
 public:
  Builder(const Dataset& data, const CartParams& params) : data_(data), params_(params) {}

  int build(std::vector<std::size_t> rows, int depth) {
    const double pos = static_cast<double>(std::count_if(rows.begin(), rows.end(), [&](std::size_t r) { return data_.y[r] == 1; }));
    const double total = static_cast<double>(rows.size());
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].positive_fraction = pos / total;
    if (depth >= params_.max_depth || pos == 0.0 || pos == total || rows.size() < 2 * params_.min_leaf) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = gini(pos, total) * total;
    const double eps = 1e-12;
    for (std::size_t f = 0; f < data_.x.cols(); ++f) {
      std::vector<std::size_t> order = rows;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return data_.x(a, f) < data_.x(b, f); });
      double left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        if (data_.y[order[k]] == 1) left_pos += 1.0;
        const double v = data_.x(order[k], f);
        const double next = data_.x(order[k + 1], f);
        const std::size_t n_left = k + 1;
        const std::size_t n_right = order.size() - n_left;
        if (v == next || n_left < params_.min_leaf || n_right < params_.min_leaf) continue;
        const double impurity = gini(left_pos, static_cast<double>(n_left)) * static_cast<double>(n_left) +
                                gini(pos - left_pos, static_cast<double>(n_right)) * static_cast<double>(n_right);
        if (impurity < best_impurity - eps) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (v + next);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (auto r : rows) (data_.x(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = build(std::move(left), depth + 1);
    nodes_[id].left = l;
    const int r = build(std::move(right), depth + 1);
    nodes_[id].right = r;
    return id;
  }

  std::vector<TreeModel::Node> take() { return std::move(nodes_); }

 private:
  const Dataset& data_;
  CartParams params_;
  std::vector<TreeModel::Node> nodes_;
};

}  // namespace

TreeModel::TreeModel(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("tree: no nodes");
  for (const auto& n : nodes_) {
    if (n.feature >= 0 && (n.left < 0 || n.right < 0 || n.left >= static_cast<int>(nodes_.size()) ||
                           n.right >= static_cast<int>(nodes_.size()))) {
      throw std::invalid_argument("tree: dangling child index");
    }
  }
}

double TreeModel::decision_value(std::span<const double> x) const {
  int id = 0;
  while (nodes_[id].feature >= 0) {
    const auto f = static_cast<std::size_t>(nodes_[id].feature);
    if (f >= x.size()) throw std::invalid_argument("tree: input dimension mismatch");
    id = x[f] <= nodes_[id].threshold ? nodes_[id].left : nodes_[id].right;
  }
  return nodes_[id].positive_fraction - 0.5;
}

int TreeModel::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, depth[i]);
    if (nodes_[i].feature >= 0) {
      depth[nodes_[i].left] = depth[i] + 1;
      depth[nodes_[i].right] = depth[i] + 1;
    }
  }
  return best;
}

nlohmann::ordered_json TreeModel::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "cart";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& n : nodes_) {
    nlohmann::ordered_json o;
    o["feature"] = n.feature;
    o["threshold"] = n.threshold;
    o["left"] = n.left;
    o["right"] = n.right;
    o["positive_fraction"] = n.positive_fraction;
    arr.push_back(std::move(o));
  }
  j["nodes"] = std::move(arr);
  return j;
}

TreeModel TreeModel::from_json(const nlohmann::json& j) {
  if (j.at("type").get<std::string>() != "cart") throw std::runtime_error("tree: wrong artifact type");
  std::vector<Node> nodes;
  for (const auto& o : j.at("nodes")) {
    nodes.push_back({o.at("feature").get<int>(), o.at("threshold").get<double>(), o.at("left").get<int>(),
                     o.at("right").get<int>(), o.at("positive_fraction").get<double>()});
  }
  return TreeModel(std::move(nodes));
}

TreeModel train_cart(const Dataset& data, const CartParams& params) {
  data.validate();
  check_binary_labels(data.y);
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Builder b(data, params);
  b.build(std::move(rows), 0);
  return TreeModel(b.take());
}

}  // namespace tagrade::ml
