#include "tagrade/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace tagrade::fft {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// Forward r2c, inverse c2r, and forward/backward c2c plans of one length,
// each bound to the buffers below.
class PlanSet {
 public:
  explicit PlanSet(std::size_t n) : n_(n) {
    real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
    half_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
    full_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
    if (!real_ || !half_ || !full_) throw std::bad_alloc();
    std::lock_guard<std::mutex> lock(planner_mutex());
    const int len = static_cast<int>(n);
    r2c_ = fftw_plan_dft_r2c_1d(len, real_.get(), half_.get(), FFTW_ESTIMATE);
    c2r_ = fftw_plan_dft_c2r_1d(len, half_.get(), real_.get(), FFTW_ESTIMATE);
    c2c_inv_ = fftw_plan_dft_1d(len, full_.get(), full_.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  PlanSet(const PlanSet&) = delete;
  PlanSet& operator=(const PlanSet&) = delete;
  ~PlanSet() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
    fftw_destroy_plan(c2c_inv_);
  }

  std::size_t size() const { return n_; }
  double* real() { return real_.get(); }
  fftw_complex* half() { return half_.get(); }
  fftw_complex* full() { return full_.get(); }
  void forward() { fftw_execute(r2c_); }
  void inverse() { fftw_execute(c2r_); }
  void inverse_complex() { fftw_execute(c2c_inv_); }

 private:
  std::size_t n_;
  std::unique_ptr<double, FftwDeleter> real_;
  std::unique_ptr<fftw_complex, FftwDeleter> half_;
  std::unique_ptr<fftw_complex, FftwDeleter> full_;
  fftw_plan r2c_{};
  fftw_plan c2r_{};
  fftw_plan c2c_inv_{};
};

PlanSet& plans(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<PlanSet>> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    // Very long one-off transforms (whole-recording convolutions) are not
    // worth keeping around.
    if (cache.size() > 64) cache.clear();
    it = cache.emplace(n, std::make_unique<PlanSet>(n)).first;
  }
  return *it->second;
}

}  // namespace

std::vector<cplx> rfft(std::span<const double> x) {
  if (x.empty()) return {};
  PlanSet& p = plans(x.size());
  std::copy(x.begin(), x.end(), p.real());
  p.forward();
  std::vector<cplx> out(x.size() / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = {p.half()[k][0], p.half()[k][1]};
  return out;
}

std::vector<double> irfft(std::span<const cplx> spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum size mismatch");
  PlanSet& p = plans(n);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    p.half()[k][0] = spectrum[k].real();
    p.half()[k][1] = spectrum[k].imag();
  }
  p.inverse();
  std::vector<double> out(p.real(), p.real() + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<cplx> analytic_signal(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  PlanSet& p = plans(n);
  std::copy(x.begin(), x.end(), p.real());
  p.forward();
  // One-sided spectrum: keep DC and Nyquist, double positive frequencies.
  fftw_complex* z = p.full();
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < n; ++k) {
    double gain = 0.0;
    if (k == 0 || (n % 2 == 0 && k == half)) {
      gain = 1.0;
    } else if (k < (n + 1) / 2) {
      gain = 2.0;
    }
    if (gain > 0.0) {
      z[k][0] = gain * p.half()[k][0];
      z[k][1] = gain * p.half()[k][1];
    } else {
      z[k][0] = 0.0;
      z[k][1] = 0.0;
    }
  }
  p.inverse_complex();
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<cplx> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = {z[k][0] * scale, z[k][1] * scale};
  return out;
}

std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      best = std::min(best, v);
    }
  }
  return best;
}

std::vector<double> convolve(std::span<const double> x, std::span<const double> h) {
  if (x.empty() || h.empty()) return {};
  const std::size_t out_len = x.size() + h.size() - 1;
  if (std::min(x.size(), h.size()) <= 32) {
    std::vector<double> out(out_len, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t j = 0; j < h.size(); ++j) out[i + j] += x[i] * h[j];
    }
    return out;
  }
  const std::size_t n = good_size(out_len);
  std::vector<double> xp(n, 0.0);
  std::vector<double> hp(n, 0.0);
  std::copy(x.begin(), x.end(), xp.begin());
  std::copy(h.begin(), h.end(), hp.begin());
  auto X = rfft(xp);
  const auto H = rfft(hp);
  for (std::size_t k = 0; k < X.size(); ++k) X[k] *= H[k];
  auto y = irfft(X, n);
  y.resize(out_len);
  return y;
}

}  // namespace tagrade::fft
