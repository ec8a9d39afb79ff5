#include "tagrade/ml/naive_bayes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tagrade/ml/svm.hpp"

namespace tagrade::ml {
namespace {

double log_likelihood(const NbModel::ClassStats& c, std::span<const double> x) {
  double ll = c.log_prior;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - c.mean[k];
    ll += -0.5 * std::log(2.0 * std::numbers::pi * c.var[k]) - 0.5 * d * d / c.var[k];
  }
  return ll;
}

NbModel::ClassStats fit_class(const Dataset& data, int label) {
  const std::size_t d = data.x.cols();
  NbModel::ClassStats s;
  s.mean.assign(d, 0.0);
  s.var.assign(d, 0.0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.y[i] != label) continue;
    ++n;
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += data.x(i, k);
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.y[i] != label) continue;
    for (std::size_t k = 0; k < d; ++k) {
      const double c = data.x(i, k) - s.mean[k];
      s.var[k] += c * c;
    }
  }
  for (double& v : s.var) v = std::max(v / static_cast<double>(n), kNbVarianceFloor);
  s.log_prior = std::log(static_cast<double>(n) / static_cast<double>(data.size()));
  return s;
}

nlohmann::ordered_json stats_json(const NbModel::ClassStats& s) {
  nlohmann::ordered_json j;
  j["log_prior"] = s.log_prior;
  j["mean"] = s.mean;
  j["var"] = s.var;
  return j;
}

NbModel::ClassStats stats_from_json(const nlohmann::json& j) {
  return {j.at("log_prior").get<double>(), j.at("mean").get<std::vector<double>>(),
          j.at("var").get<std::vector<double>>()};
}

}  // namespace

NbModel::NbModel(ClassStats positive, ClassStats negative) : pos_(std::move(positive)), neg_(std::move(negative)) {
  if (pos_.mean.size() != neg_.mean.size() || pos_.var.size() != pos_.mean.size() ||
      neg_.var.size() != neg_.mean.size()) {
    throw std::invalid_argument("naive Bayes: inconsistent class statistics");
  }
}

double NbModel::decision_value(std::span<const double> x) const {
  if (x.size() != dims()) throw std::invalid_argument("naive Bayes: input dimension mismatch");
  return log_likelihood(pos_, x) - log_likelihood(neg_, x);
}

nlohmann::ordered_json NbModel::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "naive_bayes";
  j["positive"] = stats_json(pos_);
  j["negative"] = stats_json(neg_);
  return j;
}

NbModel NbModel::from_json(const nlohmann::json& j) {
  if (j.at("type").get<std::string>() != "naive_bayes") throw std::runtime_error("naive Bayes: wrong artifact type");
  return NbModel(stats_from_json(j.at("positive")), stats_from_json(j.at("negative")));
}

NbModel train_naive_bayes(const Dataset& data) {
  data.validate();
  check_binary_labels(data.y);
  return NbModel(fit_class(data, 1), fit_class(data, -1));
}

}  // namespace tagrade::ml
