#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"

namespace tagrade {

struct FrameSpec {
  double win_s = 2.0;
  double step_s = 0.5;

  void validate() const;
};

struct Band {
  double lo_hz;
  double hi_hz;
};

inline constexpr std::array<Band, 4> kIbiBands{{{0.5, 4.0}, {4.0, 7.0}, {7.0, 14.0}, {14.0, 30.0}}};
inline constexpr Band kEdoBand{0.5, 10.0};
inline constexpr Band kBroadBand{0.5, 30.0};

// Five measures per band, then the envelope-derivative operator.
inline constexpr std::size_t kFeaturesPerBand = 5;
inline constexpr std::size_t kNumIbiFeatures = kIbiBands.size() * kFeaturesPerBand + 1;
using FeatureVector = std::array<double, kNumIbiFeatures>;

const std::vector<std::string>& ibi_feature_names();

// Zero-phase windowed-sinc band-pass, 4 s of taps (257 at 64 Hz).
std::vector<double> band_filter(std::span<const double> x, Band band, double fs);

// Mean magnitude of the analytic signal.
double envelope_amplitude(std::span<const double> x);

// Higuchi estimate. A constant frame is defined to have dimension 1.
double fractal_dimension(std::span<const double> x, int kmax = 10);

// Hamming-tapered periodogram power in [lo, hi) over power in [0.5, 30) Hz.
// Returns 0 when there is no power.
double relative_spectral_power(std::span<const double> x, Band band, double fs);

// R^2 of a least-squares line through log-power against log-frequency over
// the bins of `range` (inclusive). Throws with fewer than 3 bins or no power.
double spectral_fit(std::span<const double> x, double fs, Band range = kBroadBand);

// Median phase-difference frequency of the analytic signal, clipped to
// [0, fs/2]. A zero frame gives 0.
double instantaneous_frequency(std::span<const double> x, double fs);

// Mean of (x')^2 + (H{x'})^2 with x' the central difference of x.
double envelope_derivative_operator(std::span<const double> x);

struct FeatureMatrix {
  std::vector<FeatureVector> rows;
  std::vector<std::size_t> start;     // first sample of each frame
  std::vector<std::uint8_t> usable;   // 0: excluded or flat frame
  std::size_t frame_len = 0;
  std::size_t step_len = 0;
  double fs = 0.0;

  std::size_t size() const { return rows.size(); }
  std::size_t usable_count() const;
};

std::size_t frame_count(std::size_t n_samples, std::size_t frame_len, std::size_t step_len);

// Frame the channel and compute all features. Frames touching `exclude`, or
// with zero variance, are flagged unusable and their features left at 0.
FeatureMatrix build_feature_matrix(std::span<const double> channel, double fs, const FrameSpec& spec,
                                   const SampleMask* exclude = nullptr);

}  // namespace tagrade
