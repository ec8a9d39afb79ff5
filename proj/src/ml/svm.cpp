#include "tagrade/ml/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace tagrade::ml {

std::string_view to_string(KernelType k) { return k == KernelType::Linear ? "linear" : "rbf"; }

KernelType parse_kernel(std::string_view text) {
  if (text == "linear") return KernelType::Linear;
  if (text == "rbf") return KernelType::Rbf;
  throw std::invalid_argument("unknown kernel '" + std::string(text) + "'");
}

double kernel_value(KernelType kernel, double gamma, std::span<const double> a, std::span<const double> b) {
  if (kernel == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double DataKernel::diagonal(std::size_t i) const {
  return kernel_value(kernel_, gamma_, x_.row(i), x_.row(i));
}

void DataKernel::fill_row(std::size_t i, std::span<double> out) const {
  const auto xi = x_.row(i);
  for (std::size_t t = 0; t < x_.rows(); ++t) out[t] = kernel_value(kernel_, gamma_, xi, x_.row(t));
}

void GramSubset::fill_row(std::size_t i, std::span<double> out) const {
  const auto row = gram_.row(idx_[i]);
  for (std::size_t t = 0; t < idx_.size(); ++t) out[t] = row[idx_[t]];
}

Matrix gram_matrix(const Matrix& x, KernelType kernel, double gamma) {
  const std::size_t n = x.rows();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel_value(kernel, gamma, x.row(i), x.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

namespace {

// LRU cache of kernel rows.
class RowCache {
 public:
  RowCache(const KernelRowSource& source, std::size_t bytes) : source_(source), n_(source.size()) {
    const std::size_t per_row = std::max<std::size_t>(1, n_ * sizeof(double));
    capacity_ = std::max<std::size_t>(2, bytes / per_row);
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (index_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      std::vector<double> recycled = std::move(lru_.back().second);
      lru_.pop_back();
      lru_.emplace_front(i, std::move(recycled));
    } else {
      lru_.emplace_front(i, std::vector<double>(n_));
    }
    auto& entry = lru_.front();
    entry.second.resize(n_);
    source_.fill_row(i, entry.second);
    index_[i] = lru_.begin();
    return entry.second;
  }

 private:
  using Entry = std::pair<std::size_t, std::vector<double>>;
  const KernelRowSource& source_;
  std::size_t n_;
  std::size_t capacity_ = 2;
  std::list<Entry> lru_;
  std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

constexpr double kTau = 1e-12;

double dual_objective(std::span<const double> alpha, std::span<const double> grad) {
  // f(a) = a'Qa/2 - e'a = sum a_i (G_i - 1) / 2, and the dual objective is -f.
  double f = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) f += alpha[i] * (grad[i] - 1.0);
  return -0.5 * f;
}

}  // namespace

void check_binary_labels(std::span<const int> y) {
  bool pos = false;
  bool neg = false;
  for (int v : y) {
    if (v == 1) {
      pos = true;
    } else if (v == -1) {
      neg = true;
    } else {
      throw std::invalid_argument("binary classifier labels must be +1 or -1");
    }
  }
  if (!pos || !neg) throw std::invalid_argument("training data contains a single class");
}

std::vector<double> class_upper_bounds(std::span<const int> y, double C, bool balanced) {
  std::vector<double> upper(y.size(), C);
  if (!balanced) return upper;
  const auto n = static_cast<double>(y.size());
  const auto n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double n_neg = n - n_pos;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double nc = y[i] == 1 ? n_pos : n_neg;
    if (nc > 0) upper[i] = C * n / (2.0 * nc);
  }
  return upper;
}

SmoResult solve_smo(const KernelRowSource& kernel, std::span<const int> y, std::span<const double> upper,
                    const SmoOptions& options) {
  const std::size_t n = kernel.size();
  if (y.size() != n || upper.size() != n) throw std::invalid_argument("smo: size mismatch");
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = kernel.diagonal(i);

  SmoResult res;
  res.alpha.assign(n, 0.0);
  std::vector<double>& a = res.alpha;
  std::vector<double> grad(n, -1.0);
  RowCache cache(kernel, options.cache_bytes);
  const std::size_t max_iter =
      options.max_iter ? options.max_iter : std::max<std::size_t>(10'000'000, 100 * n);

  const auto in_up = [&](std::size_t t) { return (y[t] == 1 && a[t] < upper[t]) || (y[t] == -1 && a[t] > 0.0); };
  const auto in_low = [&](std::size_t t) { return (y[t] == 1 && a[t] > 0.0) || (y[t] == -1 && a[t] < upper[t]); };

  while (res.iterations < max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -static_cast<double>(y[t]) * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < options.tol) {
      res.converged = true;
      break;
    }

    const std::vector<double>& ki = cache.row(i);
    const double kij = ki[j];
    const double ci = upper[i];
    const double cj = upper[j];
    const double old_ai = a[i];
    const double old_aj = a[j];
    double quad = diag[i] + diag[j] - 2.0 * kij;
    if (quad <= 0.0) quad = kTau;

    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > ci - cj) {
        if (a[i] > ci) {
          a[i] = ci;
          a[j] = ci - diff;
        }
      } else if (a[j] > cj) {
        a[j] = cj;
        a[i] = cj + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > ci) {
        if (a[i] > ci) {
          a[i] = ci;
          a[j] = sum - ci;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > cj) {
        if (a[j] > cj) {
          a[j] = cj;
          a[i] = sum - cj;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    // Q_ti = y_t y_i K_ti
    const double dai = (a[i] - old_ai) * y[i];
    const double daj = (a[j] - old_aj) * y[j];
    const std::vector<double>& ki_again = cache.row(i);
    const std::vector<double>& kj = cache.row(j);
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (ki_again[t] * dai + kj[t] * daj);
    ++res.iterations;
    if (options.record_objective) res.objective_trace.push_back(dual_objective(a, grad));
  }

  // Offset from free variables, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (a[t] >= upper[t]) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  res.bias = -rho;
  res.dual_objective = dual_objective(a, grad);
  return res;
}

SvmModel::SvmModel(KernelType kernel, double gamma, double C, Scaler scaler, Matrix support_vectors,
                   std::vector<double> coefficients, double bias)
    : kernel_(kernel), gamma_(gamma), C_(C), scaler_(std::move(scaler)), sv_(std::move(support_vectors)),
      coef_(std::move(coefficients)), bias_(bias) {
  if (sv_.rows() != coef_.size()) throw std::invalid_argument("svm: support vector / coefficient count mismatch");
  if (sv_.rows() > 0 && sv_.cols() != scaler_.dims()) throw std::invalid_argument("svm: dimension mismatch");
  if (kernel_ == KernelType::Linear) {
    w_.assign(scaler_.dims(), 0.0);
    for (std::size_t i = 0; i < sv_.rows(); ++i) {
      for (std::size_t k = 0; k < w_.size(); ++k) w_[k] += coef_[i] * sv_(i, k);
    }
  }
}

double SvmModel::decision_value_scaled(std::span<const double> z) const {
  if (z.size() != scaler_.dims()) throw std::invalid_argument("svm: input dimension mismatch");
  double f = bias_;
  if (kernel_ == KernelType::Linear) {
    for (std::size_t k = 0; k < z.size(); ++k) f += w_[k] * z[k];
    return f;
  }
  for (std::size_t i = 0; i < sv_.rows(); ++i) f += coef_[i] * kernel_value(kernel_, gamma_, sv_.row(i), z);
  return f;
}

double SvmModel::decision_value(std::span<const double> x) const {
  if (x.size() != scaler_.dims()) throw std::invalid_argument("svm: input dimension mismatch");
  const auto z = scaler_.apply(x);
  return decision_value_scaled(z);
}

nlohmann::ordered_json SvmModel::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "svm";
  j["kernel"] = std::string(to_string(kernel_));
  j["gamma"] = gamma_;
  j["C"] = C_;
  j["bias"] = bias_;
  j["scaler"] = scaler_.to_json();
  auto svs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < sv_.rows(); ++i) {
    const auto r = sv_.row(i);
    svs.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["support_vectors"] = std::move(svs);
  j["coefficients"] = coef_;
  return j;
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) throw std::runtime_error("svm: unsupported format_version");
  if (j.at("type").get<std::string>() != "svm") throw std::runtime_error("svm: wrong artifact type");
  Scaler scaler = Scaler::from_json(j.at("scaler"));
  Matrix sv;
  for (const auto& r : j.at("support_vectors")) sv.push_row(r.get<std::vector<double>>());
  return SvmModel(parse_kernel(j.at("kernel").get<std::string>()), j.at("gamma").get<double>(),
                  j.at("C").get<double>(), std::move(scaler), std::move(sv),
                  j.at("coefficients").get<std::vector<double>>(), j.at("bias").get<double>());
}

SvmModel assemble_svm(const SvmParams& params, const Scaler& scaler, const Matrix& scaled_x, std::span<const int> y,
                      const SmoResult& solution) {
  Matrix sv;
  std::vector<double> coef;
  for (std::size_t i = 0; i < scaled_x.rows(); ++i) {
    if (solution.alpha[i] > 0.0) {
      sv.push_row(scaled_x.row(i));
      coef.push_back(solution.alpha[i] * y[i]);
    }
  }
  if (sv.rows() == 0) sv = Matrix(0, scaled_x.cols());
  return SvmModel(params.kernel, params.gamma, params.C, scaler, std::move(sv), std::move(coef), solution.bias);
}

SvmModel train_svm(const Dataset& data, const SvmParams& params, SmoResult* diagnostics) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("svm needs at least 2 samples");
  check_binary_labels(data.y);
  if (!(params.C > 0.0)) throw std::invalid_argument("svm: C must be positive");
  if (params.kernel == KernelType::Rbf && !(params.gamma > 0.0)) throw std::invalid_argument("svm: gamma must be positive");

  const Scaler scaler = params.standardize ? fit_scaler(data.x) : Scaler::identity(data.x.cols());
  const Matrix z = scaler.apply(data.x);
  const DataKernel kernel(z, params.kernel, params.gamma);
  const auto upper = class_upper_bounds(data.y, params.C, params.balanced);
  SmoOptions opts;
  opts.tol = params.tol;
  opts.max_iter = params.max_iter;
  opts.record_objective = params.record_objective;
  SmoResult res = solve_smo(kernel, data.y, upper, opts);
  SvmModel model = assemble_svm(params, scaler, z, data.y, res);
  if (diagnostics) *diagnostics = std::move(res);
  return model;
}

}  // namespace tagrade::ml
