#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "tagrade/preprocess.hpp"
#include "tagrade/random.hpp"

using namespace tagrade;

namespace {

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
  return x;
}

double rms(const std::vector<double>& x, std::size_t skip = 0) {
  double s = 0.0;
  for (std::size_t i = skip; i < x.size() - skip; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - 2 * skip));
}

double db(double mag) { return 20.0 * std::log10(mag); }

const FirFilter& lowpass30() {
  static const FirFilter f = design_fir_lowpass(30.0, 256.0, 4001);
  return f;
}

}  // namespace

TEST_CASE("low-pass design is odd, symmetric and unit gain") {
  const auto& f = lowpass30();
  CHECK(f.size() == 4001);
  CHECK(f.group_delay() == 2000);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(f.taps()[i] == f.taps()[f.size() - 1 - i]);
  CHECK(std::abs(f.dc_gain() - 1.0) <= 1e-3);
}

TEST_CASE("low-pass response from the tap DFT") {
  const auto& h = lowpass30().taps();
  CHECK(db(oracle::dtft_magnitude(h, 28.0, 256.0)) >= -0.5);
  CHECK(db(oracle::dtft_magnitude(h, 34.0, 256.0)) <= -40.0);
  CHECK(db(oracle::dtft_magnitude(h, 40.0, 256.0)) <= -40.0);
  // The transition of a 4001-tap Hamming design is ~0.2 Hz wide around the
  // cutoff, so 30 Hz sits at half amplitude and 32 Hz is already in the stopband.
  CHECK(oracle::dtft_magnitude(h, 30.0, 256.0) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(db(oracle::dtft_magnitude(h, 32.0, 256.0)) <= -40.0);
  for (double f : {0.0, 5.0, 20.0, 29.5, 30.5, 60.0, 127.0}) {
    CHECK(std::abs(lowpass30().magnitude(f) - oracle::dtft_magnitude(h, f, 256.0)) < 1e-10);
  }
}

TEST_CASE("low-pass design preconditions") {
  CHECK_THROWS_AS(design_fir_lowpass(200.0, 256.0, 4001), std::invalid_argument);
  CHECK_THROWS_AS(design_fir_lowpass(128.0, 256.0, 4001), std::invalid_argument);
  CHECK_THROWS_AS(design_fir_lowpass(30.0, 256.0, 4000), std::invalid_argument);
  CHECK_THROWS_AS(FirFilter({1.0, 2.0, 3.0}, 256.0), std::invalid_argument);
}

TEST_CASE("band-pass design passes its band") {
  const auto bp = design_fir_bandpass(4.0, 8.0, 256.0, 1025);
  CHECK(bp.magnitude(6.0) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(bp.magnitude(0.0) < 1e-3);
  CHECK(bp.magnitude(20.0) < 1e-2);
  CHECK_THROWS(design_fir_bandpass(8.0, 4.0, 256.0, 1025));
}

TEST_CASE("decimation length and rate") {
  EegRecording rec(256.0, {{"a", std::vector<double>(1024, 1.0)}});
  const auto out = filter_downsample(rec, lowpass30(), 4);
  CHECK(out.num_samples() == 256);
  CHECK(out.fs() == 64.0);
  CHECK(out.channel(0).label == "a");
  CHECK_THROWS(filter_downsample(rec, lowpass30(), 3));
  CHECK_THROWS(filter_downsample(rec, lowpass30(), 0));
}

TEST_CASE("a 2 Hz tone keeps its amplitude") {
  EegRecording rec(256.0, {{"a", tone(2.0, 256.0, 256 * 60, 50.0)}});
  const auto out = filter_downsample(rec, lowpass30(), 4);
  const auto& y = out.channel(0).samples;
  const double peak = *std::max_element(y.begin() + 64, y.end() - 64);
  CHECK(peak == doctest::Approx(50.0).epsilon(0.01));
  CHECK(rms(y, 64) == doctest::Approx(50.0 / std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("a 31.9 Hz tone is removed") {
  const auto x = tone(31.9, 256.0, 256 * 60, 50.0);
  EegRecording rec(256.0, {{"a", x}});
  const auto out = filter_downsample(rec, lowpass30(), 4);
  CHECK(rms(out.channel(0).samples) < 0.05 * rms(x));
}

TEST_CASE("zero-phase filtering is linear and centred") {
  Rng rng(5);
  std::vector<double> a(3000);
  std::vector<double> b(3000);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  std::vector<double> sum(3000);
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a[i] + b[i];
  const auto f = design_fir_lowpass(30.0, 256.0, 401);
  const auto ya = apply_zero_phase(f, a);
  const auto yb = apply_zero_phase(f, b);
  const auto ys = apply_zero_phase(f, sum);
  for (std::size_t i = 0; i < ys.size(); ++i) CHECK(std::abs(ys[i] - ya[i] - yb[i]) < 1e-9);

  // Symmetric pulse in, symmetric pulse out, peak unmoved.
  std::vector<double> pulse(2001, 0.0);
  for (int k = -20; k <= 20; ++k) pulse[1000 + k] = 1.0 - std::abs(k) / 21.0;
  const auto yp = apply_zero_phase(f, pulse);
  const auto peak = std::max_element(yp.begin(), yp.end()) - yp.begin();
  CHECK(peak == 1000);
  for (int k = 1; k < 500; ++k) CHECK(std::abs(yp[1000 + k] - yp[1000 - k]) < 1e-12);
}

TEST_CASE("artifact mask covers the spike and a half-second collar") {
  std::vector<double> x(640, 10.0);
  x[300] = 2000.0;
  EegRecording rec(64.0, {{"a", x}, {"b", std::vector<double>(640, -5.0)}});
  const auto mask = artifact_mask(rec, 1500.0, 0.5);
  CHECK(mask.size() == 640);
  CHECK(mask.count() == 65);
  for (std::size_t i = 0; i < 640; ++i) CHECK(mask[i] == (i >= 268 && i <= 332));
  CHECK(rec.channel(0).samples[300] == 2000.0);
}

TEST_CASE("artifact mask on clean data and its preconditions") {
  Rng rng(2);
  std::vector<double> x(1000);
  for (auto& v : x) v = rng.uniform(-100.0, 100.0);
  EegRecording rec(64.0, {{"a", x}});
  CHECK(artifact_mask(rec).count() == 0);
  CHECK_THROWS_AS(artifact_mask(rec, 0.0), std::invalid_argument);
  x[0] = -1600.0;
  EegRecording neg(64.0, {{"a", x}});
  CHECK(artifact_mask(neg).count() == 33);
}

TEST_CASE("mask decimation keeps any set sample") {
  SampleMask m(16, 256.0);
  m.set(5);
  m.set(15);
  const auto d = downsample_mask(m, 4);
  REQUIRE(d.size() == 4);
  CHECK(d.fs() == 64.0);
  CHECK_FALSE(d[0]);
  CHECK(d[1]);
  CHECK_FALSE(d[2]);
  CHECK(d[3]);
}
