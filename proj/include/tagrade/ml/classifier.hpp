#pragma once

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>

#include "tagrade/ml/cart.hpp"
#include "tagrade/ml/cross_validation.hpp"
#include "tagrade/ml/naive_bayes.hpp"
#include "tagrade/ml/svm.hpp"

namespace tagrade::ml {

enum class ClassifierKind { DecisionTree, NaiveBayes, SvmLinear, SvmRbf };

// "dt", "nb", "svm_linear", "svm_rbf"
std::string_view to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(std::string_view text);

// Any of the binary classifiers behind one decision-value interface.
class Classifier {
 public:
  explicit Classifier(TreeModel m) : kind_(ClassifierKind::DecisionTree), model_(std::move(m)) {}
  explicit Classifier(NbModel m) : kind_(ClassifierKind::NaiveBayes), model_(std::move(m)) {}
  explicit Classifier(SvmModel m);

  ClassifierKind kind() const { return kind_; }
  double decision_value(std::span<const double> x) const;
  int predict(std::span<const double> x) const { return decision_value(x) > 0.0 ? 1 : -1; }
  const SvmModel* svm() const { return std::get_if<SvmModel>(&model_); }

  nlohmann::ordered_json to_json() const;
  static Classifier from_json(const nlohmann::json& j);

 private:
  ClassifierKind kind_;
  std::variant<TreeModel, NbModel, SvmModel> model_;
};

struct ClassifierOptions {
  bool balanced = true;
  // When false the RBF SVM uses C = 1 and gamma = 1 / dims.
  bool tune = true;
  HyperGrid grid = HyperGrid::standard();
  std::size_t inner_folds = 5;
  std::uint64_t seed = 0;
  CartParams cart;
};

Classifier train_classifier(const Dataset& data, ClassifierKind kind, const ClassifierOptions& options = {},
                            GridChoice* chosen = nullptr);

}  // namespace tagrade::ml
