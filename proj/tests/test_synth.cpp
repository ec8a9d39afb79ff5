#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/hie_grader.hpp"
#include "tagrade/preprocess.hpp"
#include "tagrade/synth.hpp"

using namespace tagrade;

namespace {

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

std::span<const double> event_span(const std::vector<double>& x, const Event& e, double fs, double trim_s = 0.0) {
  const auto a = static_cast<std::size_t>(std::llround((e.start_s + trim_s) * fs));
  const auto b = static_cast<std::size_t>(std::llround((e.end_s - trim_s) * fs));
  return {x.data() + a, b - a};
}

std::vector<Event> events_of(const AnnotationTrack& track, EventLabel label) {
  std::vector<Event> out;
  for (const auto& e : track.events()) {
    if (e.label == label) out.push_back(e);
  }
  return out;
}

SynthConfig simple_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.schedule = {{SynthState::ActiveSleep, 600.0}, {SynthState::Ta, 600.0}, {SynthState::ActiveSleep, 600.0}};
  return cfg;
}

}  // namespace

TEST_CASE("TA segments respect burst amplitudes and durations") {
  const double fs = 256.0;
  std::size_t bursts = 0;
  for (std::uint64_t seed = 0; bursts < 1000; ++seed) {
    Rng rng(mix_seed(31, seed));
    const auto seg = gen_ta_segment(600.0, fs, rng);
    REQUIRE(seg.signal.size() == 600 * 256);
    double prev_end = 0.0;
    for (const auto& e : seg.events) {
      CHECK(e.start_s == prev_end);
      prev_end = e.end_s;
      const double dur = e.end_s - e.start_s;
      CHECK(dur >= 2.0 - 1e-9);
      CHECK(dur <= 10.0 + 1e-9);
      if (e.label == EventLabel::Burst) {
        const double pp = peak_to_peak(event_span(seg.signal, e, fs));
        CHECK(pp >= 45.0);
        CHECK(pp <= 160.0);
        ++bursts;
      } else {
        REQUIRE(e.label == EventLabel::InterBurst);
        // The crossfade into a neighbouring burst lives on the inter-burst side.
        const double pp = peak_to_peak(event_span(seg.signal, e, fs, 0.1));
        CHECK(pp >= 20.0);
        CHECK(pp <= 55.0);
      }
    }
    CHECK(prev_end == doctest::Approx(600.0));
    for (std::size_t i = 1; i < seg.events.size(); ++i) CHECK(seg.events[i].label != seg.events[i - 1].label);
  }

  Rng rng(1);
  CHECK_THROWS(gen_ta_segment(9.5, fs, rng));
  CHECK_NOTHROW(gen_ta_segment(10.0, fs, rng));
}

TEST_CASE("TA energy sits below 8 Hz") {
  Rng rng(4);
  const auto seg = gen_ta_segment(300.0, 256.0, rng);
  const auto low = apply_zero_phase(design_fir_lowpass(8.0, 256.0, 1025), seg.signal);
  CHECK(rms(low) >= 0.8 * rms(seg.signal));
}

TEST_CASE("identical seeds give identical recordings") {
  const auto a = gen_recording(simple_config(3));
  const auto b = gen_recording(simple_config(3));
  const auto c = gen_recording(simple_config(4));
  REQUIRE(a.recording.num_channels() == b.recording.num_channels());
  bool differs = false;
  for (std::size_t i = 0; i < a.recording.num_channels(); ++i) {
    CHECK(a.recording.channel(i).samples == b.recording.channel(i).samples);
    differs = differs || a.recording.channel(i).samples != c.recording.channel(i).samples;
  }
  CHECK(differs);
  CHECK(a.annotations.events().size() == b.annotations.events().size());
}

TEST_CASE("schedule tiling and recording length") {
  const auto cfg = simple_config(5);
  const auto out = gen_recording(cfg);
  CHECK(out.recording.num_samples() == static_cast<std::size_t>(1800.0 * cfg.fs));
  CHECK(out.recording.fs() == cfg.fs);

  const auto ta = events_of(out.annotations, EventLabel::Ta);
  REQUIRE(ta.size() == 1);
  CHECK(ta[0].start_s == 600.0);
  CHECK(ta[0].end_s == 1200.0);
  const auto other = events_of(out.annotations, EventLabel::Other);
  REQUIRE(other.size() == 2);
  CHECK(other[0].note == "ACTIVE_SLEEP");
  CHECK(other[0].end_s == 600.0);
  CHECK(other[1].start_s == 1200.0);
  CHECK(other[1].end_s == 1800.0);

  // Bursts and inter-bursts tile the TA block exactly.
  std::vector<Event> pieces;
  for (const auto& e : out.annotations.events()) {
    if (e.label == EventLabel::Burst || e.label == EventLabel::InterBurst) pieces.push_back(e);
  }
  std::sort(pieces.begin(), pieces.end(), [](const Event& x, const Event& y) { return x.start_s < y.start_s; });
  REQUIRE(!pieces.empty());
  CHECK(pieces.front().start_s == 600.0);
  CHECK(pieces.back().end_s == 1200.0);
  for (std::size_t i = 1; i < pieces.size(); ++i) CHECK(pieces[i].start_s == pieces[i - 1].end_s);
}

TEST_CASE("referential channels reproduce the bipolar montage without drift") {
  auto cfg = simple_config(6);
  cfg.drift_uv = 0.0;
  const auto flat = gen_recording(cfg);
  cfg.drift_uv = 50.0;
  const auto drifting = gen_recording(cfg);
  const auto a = derive_montage(flat.recording, sleep_montage());
  const auto b = derive_montage(drifting.recording, sleep_montage());
  REQUIRE(a.num_channels() == sleep_montage().size());
  for (std::size_t c = 0; c < a.num_channels(); ++c) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.num_samples(); ++i) {
      worst = std::max(worst, std::abs(a.channel(c).samples[i] - b.channel(c).samples[i]));
    }
    // Samples are stored to 0.01 uV.
    CHECK(worst <= 0.02 + 1e-9);
  }
}

TEST_CASE("TA RMS alternates around the active-sleep level") {
  // Burst and inter-burst amplitude ranges overlap the active-sleep range, so
  // the check is on 1 s windows leaving the active-sleep band both ways.
  for (std::uint64_t seed : {7, 11}) {
    const auto out = gen_recording(simple_config(seed));
    const auto bip = derive_montage(out.recording, sleep_montage());
    const auto win = static_cast<std::size_t>(out.recording.fs());
    for (std::size_t c = 0; c < bip.num_channels(); ++c) {
      const auto& x = bip.channel(c).samples;
      std::vector<double> sleep;
      std::vector<double> ta;
      for (std::size_t w = 0; w < 1800; ++w) {
        const double r = rms(std::span<const double>(x.data() + w * win, win));
        (w >= 600 && w < 1200 ? ta : sleep).push_back(r);
      }
      std::sort(sleep.begin(), sleep.end());
      const double lo = sleep[sleep.size() * 5 / 100];
      const double hi = sleep[sleep.size() * 95 / 100];
      const auto above = std::count_if(ta.begin(), ta.end(), [&](double r) { return r > hi; });
      const auto below = std::count_if(ta.begin(), ta.end(), [&](double r) { return r < lo; });
      CHECK(static_cast<double>(above) >= 0.25 * static_cast<double>(ta.size()));
      CHECK(static_cast<double>(below) >= 0.02 * static_cast<double>(ta.size()));
    }
  }
}

TEST_CASE("artifact spikes are annotated and exceed the artifact threshold") {
  auto cfg = simple_config(8);
  cfg.artifacts_per_hour = 20.0;
  const auto out = gen_recording(cfg);
  const auto art = events_of(out.annotations, EventLabel::Artifact);
  CHECK(art.size() >= 5);
  const auto mask = artifact_mask(derive_montage(out.recording, sleep_montage()));
  for (const auto& e : art) {
    const auto mid = static_cast<std::size_t>(0.5 * (e.start_s + e.end_s) * out.recording.fs());
    CHECK(mask[mid]);
  }
  CHECK(mask.count() > 0);
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  CHECK_THROWS(cfg.validate());
  cfg.schedule = {{SynthState::Ta, 5.0}};
  CHECK_THROWS(cfg.validate());
  cfg.schedule = {{SynthState::Wake, -1.0}};
  CHECK_THROWS(cfg.validate());
  cfg.schedule = {{SynthState::Wake, 60.0}};
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.duration_s() == 60.0);
  CHECK(parse_synth_state("GRADE3_BG") == SynthState::Grade3Bg);
  CHECK(to_string(SynthState::Hvs) == "HVS");
  CHECK_THROWS(parse_synth_state("REM"));
  CHECK_THROWS(hie_config(0, 1800.0, 1));
  CHECK_THROWS(hie_config(5, 1800.0, 1));
  CHECK_THROWS(hie_config(1, 300.0, 1));
}

TEST_CASE("sleep schedules alternate TA with other states") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto cfg = sleep_config(seed, 2400.0);
    CHECK(cfg.duration_s() == doctest::Approx(2400.0));
    bool has_ta = false;
    for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
      const bool ta = cfg.schedule[i].state == SynthState::Ta;
      has_ta = has_ta || ta;
      if (i > 0) CHECK(ta != (cfg.schedule[i - 1].state == SynthState::Ta));
    }
    CHECK(has_ta);
  }
}

TEST_CASE("HIE grade phenomenology") {
  const double duration = 1800.0;
  SUBCASE("grade 1 TA fraction is exact and within range") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto cfg = hie_config(1, duration, seed);
      double ta_total = 0.0;
      for (const auto& item : cfg.schedule) {
        if (item.state == SynthState::Ta) ta_total += item.duration_s;
      }
      const double configured = 100.0 * ta_total / cfg.duration_s();
      CHECK(configured >= 20.0);
      CHECK(configured <= 60.0);
      const double fs = 64.0;
      const auto n = static_cast<std::size_t>(duration * fs);
      // Exactness needs only the schedule, not the rendered signal.
      std::vector<Event> events;
      double t = 0.0;
      for (const auto& item : cfg.schedule) {
        if (item.state == SynthState::Ta) events.push_back({t, t + item.duration_s, EventLabel::Ta, ""});
        t += item.duration_s;
      }
      const auto mask = annotations_to_mask(AnnotationTrack(events), EventLabel::Ta, fs, n);
      CHECK(std::abs(compute_ta_percentage(mask) - configured) <= 100.0 / static_cast<double>(n) + 1e-9);
      const auto k = events.size();
      CHECK(k >= 1);
      CHECK(k <= 3);
    }
  }
  SUBCASE("grade 2 has at most one short TA period") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto cfg = hie_config(2, duration, seed);
      double ta_total = 0.0;
      int periods = 0;
      for (const auto& item : cfg.schedule) {
        if (item.state == SynthState::Ta) {
          ta_total += item.duration_s;
          ++periods;
        }
      }
      CHECK(periods <= 1);
      CHECK(100.0 * ta_total / cfg.duration_s() <= 13.0 + 1e-9);
    }
  }
  SUBCASE("rendered grades") {
    const auto g1 = gen_hie_recording(1, duration, 3);
    const auto g3 = gen_hie_recording(3, duration, 3);
    const auto g4 = gen_hie_recording(4, duration, 3);
    CHECK(g1.grade == 1);
    CHECK(g4.grade == 4);
    CHECK(!events_of(g1.annotations, EventLabel::Ta).empty());
    CHECK(events_of(g3.annotations, EventLabel::Ta).empty());
    CHECK(events_of(g4.annotations, EventLabel::Ta).empty());
    CHECK(g4.recording.duration_s() == duration);
    CHECK(g4.recording.num_channels() == 9);

    const auto bip4 = derive_montage(g4.recording, hie_montage());
    const auto win = static_cast<std::size_t>(g4.recording.fs());
    for (std::size_t c = 0; c < bip4.num_channels(); ++c) {
      CHECK(mean_window_pp(bip4.channel(c).samples, win) < 15.0);
    }
    const auto bip3 = derive_montage(g3.recording, hie_montage());
    const auto bip1 = derive_montage(g1.recording, hie_montage());
    CHECK(bip3.channel(0).samples != bip1.channel(0).samples);
    CHECK(rms(bip4.channel(0).samples) < rms(bip3.channel(0).samples));
  }
}
