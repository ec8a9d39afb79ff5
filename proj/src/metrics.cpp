#include "tagrade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tagrade/random.hpp"

namespace tagrade {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks.
  double rank_sum_pos = 0.0;
  double n_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0) {
        rank_sum_pos += mid_rank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw std::invalid_argument("auc: both classes must be present");
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : k_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_counts(const std::vector<std::vector<long>>& counts) {
  ConfusionMatrix cm(counts.size());
  for (std::size_t a = 0; a < counts.size(); ++a) {
    if (counts[a].size() != counts.size()) throw std::invalid_argument("confusion matrix must be square");
    for (std::size_t p = 0; p < counts.size(); ++p) cm.add(a, p, counts[a][p]);
  }
  return cm;
}

void ConfusionMatrix::add(std::size_t actual, std::size_t predicted, long n) {
  if (actual >= k_ || predicted >= k_) throw std::out_of_range("confusion matrix class index");
  if (n < 0) throw std::invalid_argument("confusion matrix counts must be non-negative");
  counts_[actual * k_ + predicted] += n;
}

long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

long ConfusionMatrix::row_total(std::size_t actual) const {
  long s = 0;
  for (std::size_t p = 0; p < k_; ++p) s += count(actual, p);
  return s;
}

long ConfusionMatrix::col_total(std::size_t predicted) const {
  long s = 0;
  for (std::size_t a = 0; a < k_; ++a) s += count(a, predicted);
  return s;
}

long ConfusionMatrix::trace() const {
  long s = 0;
  for (std::size_t a = 0; a < k_; ++a) s += count(a, a);
  return s;
}

nlohmann::ordered_json ConfusionMatrix::to_json() const {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < k_; ++a) {
    std::vector<long> r(k_);
    for (std::size_t p = 0; p < k_; ++p) r[p] = count(a, p);
    rows.push_back(r);
  }
  return rows;
}

std::string ConfusionMatrix::format_table(const std::vector<std::string>& names) const {
  if (names.size() != k_) throw std::invalid_argument("confusion matrix: class name count mismatch");
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Actual"};
  for (const auto& n : names) header.push_back(n);
  header.push_back("Total");
  header.push_back("False");
  cells.push_back(header);
  for (std::size_t a = 0; a < k_; ++a) {
    std::vector<std::string> row{names[a]};
    const long rt = row_total(a);
    for (std::size_t p = 0; p < k_; ++p) {
      std::string c = std::to_string(count(a, p));
      if (a == p && rt > 0) {
        char pct[32];
        std::snprintf(pct, sizeof(pct), " (%.1f%%)", 100.0 * static_cast<double>(count(a, p)) / static_cast<double>(rt));
        c += pct;
      }
      row.push_back(c);
    }
    row.push_back(std::to_string(rt));
    row.push_back(std::to_string(rt - count(a, a)));
    cells.push_back(row);
  }
  std::vector<std::string> totals{"Total"};
  for (std::size_t p = 0; p < k_; ++p) totals.push_back(std::to_string(col_total(p)));
  totals.push_back(std::to_string(total()));
  totals.push_back(std::to_string(total() - trace()));
  cells.push_back(totals);

  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& r : cells) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  std::size_t line_len = 0;
  for (auto w : width) line_len += w + 2;
  const std::string rule(line_len, '-');
  out << std::string(width[0] + 2, ' ') << "System's output\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (r == 0 || r == 1 || r + 1 == cells.size()) out << rule << '\n';
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      const auto& s = cells[r][c];
      out << (c == 0 ? s + std::string(width[c] - s.size(), ' ') : std::string(width[c] - s.size(), ' ') + s);
      out << (c + 1 == cells[r].size() ? "" : "  ");
    }
    out << '\n';
  }
  out << rule << '\n';
  return out.str();
}

double cohens_kappa(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n <= 0.0) throw std::invalid_argument("kappa: empty confusion matrix");
  const double po = static_cast<double>(cm.trace()) / n;
  double pe = 0.0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    pe += static_cast<double>(cm.row_total(c)) * static_cast<double>(cm.col_total(c)) / (n * n);
  }
  if (std::abs(1.0 - pe) < 1e-15) return 0.0;
  return (po - pe) / (1.0 - pe);
}

double accuracy_percent(const ConfusionMatrix& cm) {
  const double n = static_cast<double>(cm.total());
  if (n <= 0.0) throw std::invalid_argument("accuracy: empty confusion matrix");
  return 100.0 * static_cast<double>(cm.trace()) / n;
}

double f1_percent(const ConfusionMatrix& cm, std::size_t positive) {
  if (cm.total() <= 0) throw std::invalid_argument("f1: empty confusion matrix");
  const double tp = static_cast<double>(cm.count(positive, positive));
  const double pred_pos = static_cast<double>(cm.col_total(positive));
  const double actual_pos = static_cast<double>(cm.row_total(positive));
  const double precision = pred_pos > 0.0 ? tp / pred_pos : 0.0;
  const double recall = actual_pos > 0.0 ? tp / actual_pos : 0.0;
  if (precision + recall <= 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ConfusionMatrix confusion_of(std::span<const SubjectOutcome* const> subjects, std::size_t classes) {
  ConfusionMatrix cm(classes);
  for (const auto* s : subjects) {
    if (s->predictions.size() != s->labels.size()) throw std::invalid_argument("predictions and labels differ in length");
    for (std::size_t i = 0; i < s->labels.size(); ++i) {
      cm.add(static_cast<std::size_t>(s->labels[i]), static_cast<std::size_t>(s->predictions[i]));
    }
  }
  return cm;
}

}  // namespace

BootstrapResult bootstrap_ci(std::span<const SubjectOutcome> subjects, const PooledMetric& metric,
                             std::size_t iterations, double level, std::uint64_t seed) {
  if (subjects.size() < 2) throw std::invalid_argument("bootstrap needs at least 2 subjects");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap level must lie in (0, 1)");
  std::vector<double> samples;
  samples.reserve(iterations);
  std::vector<const SubjectOutcome*> draw(subjects.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    Rng rng(mix_seed(seed, it));
    for (int attempt = 0; attempt <= 10; ++attempt) {
      for (auto& d : draw) d = &subjects[rng.index(subjects.size())];
      const auto v = metric(draw);
      if (v && std::isfinite(*v)) {
        samples.push_back(*v);
        break;
      }
    }
  }
  if (samples.empty()) throw std::runtime_error("bootstrap: metric undefined on every resample");
  std::sort(samples.begin(), samples.end());
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, tail), quantile(samples, 1.0 - tail), quantile(samples, 0.5), samples.size()};
}

std::optional<double> pooled_auc(std::span<const SubjectOutcome* const> subjects) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto* o : subjects) {
    s.insert(s.end(), o->scores.begin(), o->scores.end());
    l.insert(l.end(), o->labels.begin(), o->labels.end());
  }
  const bool pos = std::any_of(l.begin(), l.end(), [](int v) { return v > 0; });
  const bool neg = std::any_of(l.begin(), l.end(), [](int v) { return v <= 0; });
  if (!pos || !neg) return std::nullopt;
  return roc_auc(s, l);
}

std::optional<double> pooled_kappa(std::span<const SubjectOutcome* const> subjects, std::size_t classes) {
  const auto cm = confusion_of(subjects, classes);
  if (cm.total() == 0) return std::nullopt;
  return cohens_kappa(cm);
}

std::optional<double> pooled_accuracy(std::span<const SubjectOutcome* const> subjects, std::size_t classes) {
  const auto cm = confusion_of(subjects, classes);
  if (cm.total() == 0) return std::nullopt;
  return accuracy_percent(cm);
}

std::optional<double> pooled_f1(std::span<const SubjectOutcome* const> subjects) {
  const auto cm = confusion_of(subjects, 2);
  if (cm.total() == 0) return std::nullopt;
  return f1_percent(cm, 1);
}

ConfusionMatrix pooled_confusion(std::span<const SubjectOutcome> subjects, std::size_t classes) {
  std::vector<const SubjectOutcome*> ptrs;
  for (const auto& s : subjects) ptrs.push_back(&s);
  return confusion_of(ptrs, classes);
}

nlohmann::ordered_json MetricsReport::to_json() const {
  const auto one = [](const MetricSummary& m) {
    nlohmann::ordered_json j;
    j["pooled"] = m.pooled;
    j["median"] = m.median;
    j["ci_low"] = m.ci_low;
    j["ci_high"] = m.ci_high;
    return j;
  };
  nlohmann::ordered_json j;
  j["auc"] = one(auc);
  j["kappa"] = one(kappa);
  j["accuracy_pct"] = one(accuracy);
  j["f1_pct"] = one(f1);
  return j;
}

std::string MetricsReport::format_table(const std::string& title) const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %10s   %-19s\n", title.c_str(), "Median", "(95% CI)");
  out << line;
  const auto row = [&](const char* name, const MetricSummary& m, int decimals) {
    char med[32];
    char ci[64];
    std::snprintf(med, sizeof(med), "%.*f", decimals, m.median);
    std::snprintf(ci, sizeof(ci), "(%.*f--%.*f)", decimals, m.ci_low, decimals, m.ci_high);
    std::snprintf(line, sizeof(line), "%-16s %10s   %-19s\n", name, med, ci);
    out << line;
  };
  row("AUC", auc, 3);
  row("kappa", kappa, 3);
  row("Accuracy (%)", accuracy, 1);
  row("F1-score (%)", f1, 1);
  return out.str();
}

MetricsReport binary_metrics_report(std::span<const SubjectOutcome> subjects, std::size_t iterations,
                                    std::uint64_t seed) {
  std::vector<const SubjectOutcome*> all;
  for (const auto& s : subjects) all.push_back(&s);
  const auto summarize = [&](const PooledMetric& metric, std::uint64_t key) {
    MetricSummary m;
    const auto pooled = metric(all);
    if (!pooled) throw std::runtime_error("metric undefined on the pooled outcomes");
    m.pooled = *pooled;
    const auto b = bootstrap_ci(subjects, metric, iterations, 0.95, mix_seed(seed, key));
    m.median = b.median;
    m.ci_low = b.lo;
    m.ci_high = b.hi;
    return m;
  };
  MetricsReport r;
  r.auc = summarize([](auto s) { return pooled_auc(s); }, 1);
  r.kappa = summarize([](auto s) { return pooled_kappa(s, 2); }, 2);
  r.accuracy = summarize([](auto s) { return pooled_accuracy(s, 2); }, 3);
  r.f1 = summarize([](auto s) { return pooled_f1(s); }, 4);
  return r;
}

}  // namespace tagrade
