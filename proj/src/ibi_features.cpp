#include "tagrade/ibi_features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "tagrade/fft.hpp"
#include "tagrade/preprocess.hpp"

namespace tagrade {

void FrameSpec::validate() const {
  if (!(step_s > 0.0) || !(step_s <= win_s)) throw std::invalid_argument("frame spec requires 0 < step <= window");
}

const std::vector<std::string>& ibi_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    const char* measures[] = {"envelope", "fractal_dim", "rel_power", "spectral_fit", "inst_freq"};
    for (const auto& b : kIbiBands) {
      char band[32];
      std::snprintf(band, sizeof(band), "%g-%gHz", b.lo_hz, b.hi_hz);
      for (const char* m : measures) out.push_back(std::string(m) + "_" + band);
    }
    out.push_back("edo_0.5-10Hz");
    return out;
  }();
  return names;
}

std::vector<double> band_filter(std::span<const double> x, Band band, double fs) {
  const auto half = static_cast<std::size_t>(std::llround(2.0 * fs));
  const auto filter = design_fir_bandpass(band.lo_hz, band.hi_hz, fs, 2 * half + 1);
  return apply_zero_phase(filter, x);
}

double envelope_amplitude(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("envelope needs at least 2 samples");
  const auto z = fft::analytic_signal(x);
  double s = 0.0;
  for (const auto& v : z) s += std::abs(v);
  return s / static_cast<double>(z.size());
}

double fractal_dimension(std::span<const double> x, int kmax) {
  if (kmax < 2) throw std::invalid_argument("fractal dimension needs kmax >= 2");
  const std::size_t n = x.size();
  if (n < 2 * static_cast<std::size_t>(kmax)) throw std::invalid_argument("frame too short for Higuchi kmax");
  std::vector<double> log_inv_k;
  std::vector<double> log_len;
  for (int k = 1; k <= kmax; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    double lk = 0.0;
    int used = 0;
    for (std::size_t m = 0; m < ku; ++m) {
      const std::size_t count = (n - 1 - m) / ku;
      if (count < 1) continue;
      double sum = 0.0;
      for (std::size_t i = 1; i <= count; ++i) sum += std::abs(x[m + i * ku] - x[m + (i - 1) * ku]);
      const double norm = static_cast<double>(n - 1) / (static_cast<double>(count) * k);
      lk += sum * norm / k;
      ++used;
    }
    if (used == 0) continue;
    lk /= used;
    if (!(lk > 0.0)) return 1.0;
    log_inv_k.push_back(std::log(1.0 / k));
    log_len.push_back(std::log(lk));
  }
  const double mx = std::accumulate(log_inv_k.begin(), log_inv_k.end(), 0.0) / log_inv_k.size();
  const double my = std::accumulate(log_len.begin(), log_len.end(), 0.0) / log_len.size();
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < log_inv_k.size(); ++i) {
    sxy += (log_inv_k[i] - mx) * (log_len[i] - my);
    sxx += (log_inv_k[i] - mx) * (log_inv_k[i] - mx);
  }
  return std::max(1.0, sxy / sxx);
}

namespace {

// Demeaned, Hamming-tapered periodogram.
std::vector<double> periodogram(std::span<const double> x) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> tapered(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    tapered[i] = (x[i] - mean) * w;
  }
  const auto spec = fft::rfft(tapered);
  std::vector<double> p(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) p[k] = std::norm(spec[k]);
  return p;
}

double bin_hz(std::size_t k, std::size_t n, double fs) {
  return static_cast<double>(k) * fs / static_cast<double>(n);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (n % 2 == 1) return v[mid];
  const double hi = v[mid];
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

double relative_spectral_power(std::span<const double> x, Band band, double fs) {
  if (x.size() < 64) throw std::invalid_argument("relative spectral power needs at least 64 samples");
  const auto p = periodogram(x);
  double in_band = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = bin_hz(k, x.size(), fs);
    if (f >= kBroadBand.lo_hz && f < kBroadBand.hi_hz) total += p[k];
    if (f >= band.lo_hz && f < band.hi_hz && f >= kBroadBand.lo_hz && f < kBroadBand.hi_hz) in_band += p[k];
  }
  if (!(total > 0.0)) return 0.0;
  return in_band / total;
}

double spectral_fit(std::span<const double> x, double fs, Band range) {
  if (x.size() < 64) throw std::invalid_argument("spectral fit needs at least 64 samples");
  const auto p = periodogram(x);
  std::vector<double> lf;
  std::vector<double> lp;
  double peak = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double f = bin_hz(k, x.size(), fs);
    if (f >= range.lo_hz && f <= range.hi_hz && f > 0.0) {
      lf.push_back(std::log(f));
      lp.push_back(p[k]);
      peak = std::max(peak, p[k]);
    }
  }
  if (lf.size() < 3) throw std::invalid_argument("spectral fit needs at least 3 frequency bins");
  if (!(peak > 0.0)) throw std::domain_error("spectral fit undefined for a frame without power");
  for (double& v : lp) v = std::log(std::max(v, peak * 1e-12));
  const double n = static_cast<double>(lf.size());
  const double mx = std::accumulate(lf.begin(), lf.end(), 0.0) / n;
  const double my = std::accumulate(lp.begin(), lp.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    sxy += (lf[i] - mx) * (lp[i] - my);
    sxx += (lf[i] - mx) * (lf[i] - mx);
    syy += (lp[i] - my) * (lp[i] - my);
  }
  if (syy <= 1e-300) return 1.0;
  const double r2 = (sxy * sxy) / (sxx * syy);
  return std::clamp(r2, 0.0, 1.0);
}

double instantaneous_frequency(std::span<const double> x, double fs) {
  if (x.size() < 16) throw std::invalid_argument("instantaneous frequency needs at least 16 samples");
  const auto z = fft::analytic_signal(x);
  std::vector<double> f;
  f.reserve(z.size() - 1);
  bool any = false;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    const auto prod = z[i + 1] * std::conj(z[i]);
    if (prod != fft::cplx(0.0, 0.0)) any = true;
    f.push_back(std::arg(prod) * fs / (2.0 * std::numbers::pi));
  }
  if (!any) return 0.0;
  return std::clamp(median_of(std::move(f)), 0.0, fs / 2.0);
}

double envelope_derivative_operator(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("envelope-derivative operator needs at least 3 samples");
  std::vector<double> d(n);
  d[0] = x[1] - x[0];
  d[n - 1] = x[n - 1] - x[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = 0.5 * (x[i + 1] - x[i - 1]);
  const auto z = fft::analytic_signal(d);
  double s = 0.0;
  for (const auto& v : z) s += std::norm(v);
  return s / static_cast<double>(n);
}

std::size_t FeatureMatrix::usable_count() const {
  return static_cast<std::size_t>(std::count(usable.begin(), usable.end(), std::uint8_t{1}));
}

std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t step_len) {
  if (n_samples < frame_len) return 0;
  return (n_samples - frame_len) / step_len + 1;
}

FeatureMatrix build_feature_matrix(std::span<const double> channel, double fs, const FrameSpec& spec,
                                   const SampleMask* exclude) {
  spec.validate();
  FeatureMatrix fm;
  fm.fs = fs;
  fm.frame_len = static_cast<std::size_t>(std::llround(spec.win_s * fs));
  fm.step_len = static_cast<std::size_t>(std::llround(spec.step_s * fs));
  if (fm.frame_len < 64 || fm.step_len == 0) throw std::invalid_argument("frame too short for spectral features");
  if (channel.size() < fm.frame_len) throw std::invalid_argument("signal shorter than one frame");
  if (exclude && exclude->size() != channel.size()) throw std::invalid_argument("exclusion mask length mismatch");

  std::vector<std::vector<double>> banded;
  for (const auto& b : kIbiBands) banded.push_back(band_filter(channel, b, fs));
  const auto edo_band = band_filter(channel, kEdoBand, fs);

  const std::size_t count = frame_count(channel.size(), fm.frame_len, fm.step_len);
  fm.rows.assign(count, FeatureVector{});
  fm.start.resize(count);
  fm.usable.assign(count, 0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t s = k * fm.step_len;
    fm.start[k] = s;
    if (exclude && exclude->any_in(s, s + fm.frame_len)) continue;
    const auto raw = channel.subspan(s, fm.frame_len);
    const double mean = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(raw.size());
    double var = 0.0;
    for (double v : raw) var += (v - mean) * (v - mean);
    if (!(var / static_cast<double>(raw.size()) > 1e-12)) continue;

    FeatureVector& row = fm.rows[k];
    try {
      for (std::size_t b = 0; b < kIbiBands.size(); ++b) {
        const auto seg = std::span<const double>(banded[b]).subspan(s, fm.frame_len);
        row[b * kFeaturesPerBand + 0] = envelope_amplitude(seg);
        row[b * kFeaturesPerBand + 1] = fractal_dimension(seg);
        row[b * kFeaturesPerBand + 2] = relative_spectral_power(raw, kIbiBands[b], fs);
        row[b * kFeaturesPerBand + 3] = spectral_fit(raw, fs, kIbiBands[b]);
        row[b * kFeaturesPerBand + 4] = instantaneous_frequency(seg, fs);
      }
      row[kNumIbiFeatures - 1] = envelope_derivative_operator(std::span<const double>(edo_band).subspan(s, fm.frame_len));
    } catch (const std::domain_error&) {
      row = FeatureVector{};
      continue;
    }
    bool finite = true;
    for (double v : row) finite = finite && std::isfinite(v);
    if (!finite) {
      row = FeatureVector{};
      continue;
    }
    fm.usable[k] = 1;
  }
  return fm;
}

}  // namespace tagrade
