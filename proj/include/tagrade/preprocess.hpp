#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tagrade/eeg_data.hpp"

namespace tagrade {

// Linear-phase FIR filter: odd length, symmetric taps.
class FirFilter {
 public:
  FirFilter(std::vector<double> taps, double fs_design);

  const std::vector<double>& taps() const { return taps_; }
  double fs_design() const { return fs_; }
  std::size_t size() const { return taps_.size(); }
  std::size_t group_delay() const { return (taps_.size() - 1) / 2; }

  // |H(f)| from the taps' DTFT.
  double magnitude(double f_hz) const;
  double dc_gain() const;

 private:
  std::vector<double> taps_;
  double fs_;
};

// Hamming-windowed sinc low-pass, normalized to unit DC gain.
FirFilter design_fir_lowpass(double cutoff_hz, double fs, std::size_t n_taps);

// Difference of two windowed-sinc low-passes. lo = 0 gives a low-pass and
// hi = fs/2 a high-pass.
FirFilter design_fir_bandpass(double lo_hz, double hi_hz, double fs, std::size_t n_taps);

// Zero-phase application: convolve with reflection padding and remove the
// group delay, so output sample i is centred on input sample i.
std::vector<double> apply_zero_phase(const FirFilter& filter, std::span<const double> x);

// Samples where any channel exceeds |threshold_uv|, dilated by collar_s on
// each side. The recording itself is left untouched; downstream stages skip
// masked frames.
SampleMask artifact_mask(const EegRecording& rec, double threshold_uv = 1500.0, double collar_s = 0.5);

// Filter every channel (zero-phase) and keep every factor-th sample.
EegRecording filter_downsample(const EegRecording& rec, const FirFilter& filter, int factor);

// Output sample i is set if any of input samples [i*factor, (i+1)*factor) is.
SampleMask downsample_mask(const SampleMask& mask, int factor);

}  // namespace tagrade
