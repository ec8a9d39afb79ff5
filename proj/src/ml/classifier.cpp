#include "tagrade/ml/classifier.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tagrade::ml {

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::DecisionTree: return "dt";
    case ClassifierKind::NaiveBayes: return "nb";
    case ClassifierKind::SvmLinear: return "svm_linear";
    case ClassifierKind::SvmRbf: return "svm_rbf";
  }
  return "?";
}

ClassifierKind parse_classifier_kind(std::string_view text) {
  for (auto k : {ClassifierKind::DecisionTree, ClassifierKind::NaiveBayes, ClassifierKind::SvmLinear,
                 ClassifierKind::SvmRbf}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown classifier kind: " + std::string(text));
}

Classifier::Classifier(SvmModel m)
    : kind_(m.kernel() == KernelType::Linear ? ClassifierKind::SvmLinear : ClassifierKind::SvmRbf),
      model_(std::move(m)) {}

double Classifier::decision_value(std::span<const double> x) const {
  return std::visit([&](const auto& m) { return m.decision_value(x); }, model_);
}

nlohmann::ordered_json Classifier::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(kind_));
  j["model"] = std::visit([](const auto& m) { return m.to_json(); }, model_);
  return j;
}

Classifier Classifier::from_json(const nlohmann::json& j) {
  const auto kind = parse_classifier_kind(j.at("kind").get<std::string>());
  const auto& m = j.at("model");
  switch (kind) {
    case ClassifierKind::DecisionTree: return Classifier(TreeModel::from_json(m));
    case ClassifierKind::NaiveBayes: return Classifier(NbModel::from_json(m));
    case ClassifierKind::SvmLinear:
    case ClassifierKind::SvmRbf: {
      Classifier c(SvmModel::from_json(m));
      if (c.kind() != kind) throw std::runtime_error("classifier kind does not match its SVM kernel");
      return c;
    }
  }
  throw std::runtime_error("unreachable classifier kind");
}

Classifier train_classifier(const Dataset& data, ClassifierKind kind, const ClassifierOptions& options,
                            GridChoice* chosen) {
  switch (kind) {
    case ClassifierKind::DecisionTree: return Classifier(train_cart(data, options.cart));
    case ClassifierKind::NaiveBayes: return Classifier(train_naive_bayes(data));
    case ClassifierKind::SvmLinear: {
      SvmParams p;
      p.kernel = KernelType::Linear;
      p.C = 1.0;
      p.balanced = options.balanced;
      return Classifier(train_svm(data, p));
    }
    case ClassifierKind::SvmRbf: {
      SvmParams p;
      p.kernel = KernelType::Rbf;
      p.balanced = options.balanced;
      p.C = 1.0;
      p.gamma = 1.0 / static_cast<double>(std::max<std::size_t>(1, data.x.cols()));
      if (options.tune) {
        GridSearchOptions g;
        g.folds = options.inner_folds;
        g.seed = options.seed;
        g.balanced = options.balanced;
        const GridChoice c = nested_grid_search(data, KernelType::Rbf, options.grid, g);
        p.C = c.C;
        p.gamma = c.gamma;
        if (chosen) *chosen = c;
      }
      return Classifier(train_svm(data, p));
    }
  }
  throw std::runtime_error("unreachable classifier kind");
}

}  // namespace tagrade::ml
