#include "tagrade/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tagrade/fft.hpp"

namespace tagrade {
namespace {

// Index into a whole-sample symmetric extension of a length-n signal
// (..., x2, x1, x0, x1, x2, ...), valid for any integer offset.
std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

std::vector<double> windowed_sinc(double cutoff_hz, double fs, std::size_t n_taps) {
  const double fc = cutoff_hz / fs;
  const double mid = static_cast<double>(n_taps - 1) / 2.0;
  std::vector<double> h(n_taps);
  // Compute the first half and mirror it so the taps are exactly symmetric.
  for (std::size_t n = 0; n <= (n_taps - 1) / 2; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double sinc = (t == 0.0) ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * t) / (std::numbers::pi * t);
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(n_taps - 1));
    h[n] = sinc * w;
    h[n_taps - 1 - n] = h[n];
  }
  double sum = 0.0;
  for (double v : h) sum += v;
  for (double& v : h) v /= sum;
  return h;
}

void check_taps(std::size_t n_taps) {
  if (n_taps < 3 || n_taps % 2 == 0) throw std::invalid_argument("FIR length must be odd and at least 3");
}

}  // namespace

FirFilter::FirFilter(std::vector<double> taps, double fs_design) : taps_(std::move(taps)), fs_(fs_design) {
  if (taps_.empty() || taps_.size() % 2 == 0) throw std::invalid_argument("FIR filter must have odd length");
  if (!(fs_ > 0.0)) throw std::invalid_argument("FIR design rate must be positive");
  const std::size_t n = taps_.size();
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double a = taps_[i];
    const double b = taps_[n - 1 - i];
    if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a))) throw std::invalid_argument("FIR taps must be symmetric");
  }
}

double FirFilter::magnitude(double f_hz) const {
  // Linear phase: H(f) = e^{-jwM} * sum h[n] cos(w (n - M)), real amplitude.
  const double w = 2.0 * std::numbers::pi * f_hz / fs_;
  const double mid = static_cast<double>(group_delay());
  double acc = 0.0;
  for (std::size_t n = 0; n < taps_.size(); ++n) acc += taps_[n] * std::cos(w * (static_cast<double>(n) - mid));
  return std::abs(acc);
}

double FirFilter::dc_gain() const {
  double s = 0.0;
  for (double v : taps_) s += v;
  return s;
}

FirFilter design_fir_lowpass(double cutoff_hz, double fs, std::size_t n_taps) {
  if (!(fs > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < fs / 2.0)) {
    throw std::invalid_argument("low-pass cutoff must lie strictly between 0 and Nyquist");
  }
  check_taps(n_taps);
  return FirFilter(windowed_sinc(cutoff_hz, fs, n_taps), fs);
}

FirFilter design_fir_bandpass(double lo_hz, double hi_hz, double fs, std::size_t n_taps) {
  if (!(fs > 0.0)) throw std::invalid_argument("sampling rate must be positive");
  if (!(lo_hz >= 0.0) || !(lo_hz < hi_hz) || hi_hz > fs / 2.0) {
    throw std::invalid_argument("band must satisfy 0 <= lo < hi <= fs/2");
  }
  check_taps(n_taps);
  std::vector<double> h(n_taps, 0.0);
  const std::size_t mid = (n_taps - 1) / 2;
  if (hi_hz >= fs / 2.0) {
    h[mid] = 1.0;
  } else {
    h = windowed_sinc(hi_hz, fs, n_taps);
  }
  if (lo_hz > 0.0) {
    const auto lo = windowed_sinc(lo_hz, fs, n_taps);
    for (std::size_t i = 0; i < n_taps; ++i) h[i] -= lo[i];
  }
  // Force exact symmetry after the subtraction.
  for (std::size_t i = 0; i < mid; ++i) {
    const double avg = 0.5 * (h[i] + h[n_taps - 1 - i]);
    h[i] = avg;
    h[n_taps - 1 - i] = avg;
  }
  return FirFilter(std::move(h), fs);
}

std::vector<double> apply_zero_phase(const FirFilter& filter, std::span<const double> x) {
  if (x.empty()) return {};
  const std::size_t m = filter.group_delay();
  const std::size_t n = x.size();
  std::vector<double> padded(n + 2 * m);
  for (std::size_t j = 0; j < padded.size(); ++j) {
    padded[j] = x[reflect_index(static_cast<long long>(j) - static_cast<long long>(m), n)];
  }
  const auto full = fft::convolve(padded, filter.taps());
  return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(2 * m),
                             full.begin() + static_cast<std::ptrdiff_t>(2 * m + n));
}

SampleMask artifact_mask(const EegRecording& rec, double threshold_uv, double collar_s) {
  if (!(threshold_uv > 0.0)) throw std::invalid_argument("artifact threshold must be positive");
  if (collar_s < 0.0) throw std::invalid_argument("artifact collar must be non-negative");
  const std::size_t n = rec.num_samples();
  const auto collar = static_cast<long long>(std::llround(collar_s * rec.fs()));
  std::vector<int> diff(n + 1, 0);
  for (const auto& ch : rec.channels()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(ch.samples[i]) > threshold_uv) {
        const long long lo = std::max(0LL, static_cast<long long>(i) - collar);
        const long long hi = std::min(static_cast<long long>(n), static_cast<long long>(i) + collar + 1);
        diff[static_cast<std::size_t>(lo)] += 1;
        diff[static_cast<std::size_t>(hi)] -= 1;
      }
    }
  }
  SampleMask mask(n, rec.fs());
  int running = 0;
  for (std::size_t i = 0; i < n; ++i) {
    running += diff[i];
    if (running > 0) mask.set(i);
  }
  return mask;
}

EegRecording filter_downsample(const EegRecording& rec, const FirFilter& filter, int factor) {
  if (factor < 1) throw std::invalid_argument("decimation factor must be at least 1");
  const double out_fs = rec.fs() / factor;
  if (std::abs(out_fs - std::round(out_fs)) > 1e-9) {
    throw std::invalid_argument("sampling rate is not an integer multiple of the decimation factor");
  }
  if (std::abs(filter.fs_design() - rec.fs()) > 1e-9) {
    throw std::invalid_argument("filter was designed for a different sampling rate");
  }
  std::vector<Channel> out;
  out.reserve(rec.num_channels());
  for (const auto& ch : rec.channels()) {
    const auto y = apply_zero_phase(filter, ch.samples);
    Channel d{ch.label, {}};
    d.samples.reserve(y.size() / static_cast<std::size_t>(factor) + 1);
    for (std::size_t i = 0; i < y.size(); i += static_cast<std::size_t>(factor)) d.samples.push_back(y[i]);
    out.push_back(std::move(d));
  }
  return EegRecording(out_fs, std::move(out));
}

SampleMask downsample_mask(const SampleMask& mask, int factor) {
  if (factor < 1) throw std::invalid_argument("decimation factor must be at least 1");
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t n = (mask.size() + f - 1) / f;
  SampleMask out(n, mask.fs() / factor);
  for (std::size_t i = 0; i < n; ++i) out.set(i, mask.any_in(i * f, (i + 1) * f));
  return out;
}

}  // namespace tagrade
