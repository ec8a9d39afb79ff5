#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/random.hpp"

namespace tagrade {

enum class SynthState { Wake, ActiveSleep, Ta, Hvs, Grade2Bg, Grade3Bg, Grade4Bg };

std::string_view to_string(SynthState s);
SynthState parse_synth_state(std::string_view text);

struct ScheduleItem {
  SynthState state;
  double duration_s;
};

struct SynthConfig {
  double fs = 256.0;
  std::vector<ElectrodePair> montage = sleep_montage();
  std::uint64_t seed = 0;
  std::vector<ScheduleItem> schedule;
  double drift_uv = 20.0;             // common-mode drift, cancels in every bipolar pair
  double artifacts_per_hour = 0.0;    // electrode spikes above the artifact threshold
  std::optional<int> grade;

  void validate() const;
  double duration_s() const;
};

// Referential recording plus exact ground truth: one TA or OTHER event per
// schedule item (OTHER notes carry the state), BURST/INTERBURST events
// inside TA, and ARTIFACT events for injected spikes.
struct SynthOutput {
  EegRecording recording;
  AnnotationTrack annotations;
  std::optional<int> grade;
};

struct TaSegment {
  std::vector<double> signal;
  std::vector<Event> events;  // times relative to the segment start
};

// Alternating bursts (50-150 uVpp) and inter-bursts (25-50 uVpp), each
// lasting 2-10 s. Needs at least 10 s.
TaSegment gen_ta_segment(double duration_s, double fs, Rng& rng);

SynthOutput gen_recording(const SynthConfig& cfg);

// Non-TA blocks of 4-10 min alternating with TA blocks of 7-12 min.
SynthConfig sleep_config(std::uint64_t seed, double duration_s = 2400.0);

SynthConfig hie_config(int grade, double duration_s, std::uint64_t seed);
SynthOutput gen_hie_recording(int grade, double duration_s = 3600.0, std::uint64_t seed = 0);

// Mean peak-to-peak amplitude over consecutive whole windows of win samples.
double mean_window_pp(std::span<const double> x, std::size_t win);
double peak_to_peak(std::span<const double> x);

}  // namespace tagrade
