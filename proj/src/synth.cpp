#include "tagrade/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tagrade/preprocess.hpp"

namespace tagrade {

std::string_view to_string(SynthState s) {
  switch (s) {
    case SynthState::Wake: return "WAKE";
    case SynthState::ActiveSleep: return "ACTIVE_SLEEP";
    case SynthState::Ta: return "TA";
    case SynthState::Hvs: return "HVS";
    case SynthState::Grade2Bg: return "GRADE2_BG";
    case SynthState::Grade3Bg: return "GRADE3_BG";
    case SynthState::Grade4Bg: return "GRADE4_BG";
  }
  return "?";
}

SynthState parse_synth_state(std::string_view text) {
  for (auto s : {SynthState::Wake, SynthState::ActiveSleep, SynthState::Ta, SynthState::Hvs, SynthState::Grade2Bg,
                 SynthState::Grade3Bg, SynthState::Grade4Bg}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown synthetic state: " + std::string(text));
}

void SynthConfig::validate() const {
  if (!(fs > 0.0)) throw std::invalid_argument("synth: fs must be positive");
  if (schedule.empty()) throw std::invalid_argument("synth: empty schedule");
  for (const auto& item : schedule) {
    if (!(item.duration_s > 0.0)) throw std::invalid_argument("synth: schedule durations must be positive");
    if (item.state == SynthState::Ta && item.duration_s < 10.0) throw std::invalid_argument("synth: TA blocks need at least 10 s");
  }
  if (montage.empty()) throw std::invalid_argument("synth: empty montage");
  if (artifacts_per_hour < 0.0) throw std::invalid_argument("synth: negative artifact rate");
}

double SynthConfig::duration_s() const {
  double d = 0.0;
  for (const auto& item : schedule) d += item.duration_s;
  return d;
}

double peak_to_peak(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

double mean_window_pp(std::span<const double> x, std::size_t win) {
  if (win == 0 || x.size() < win) return peak_to_peak(x);
  const std::size_t count = x.size() / win;
  double s = 0.0;
  for (std::size_t w = 0; w < count; ++w) s += peak_to_peak(x.subspan(w * win, win));
  return s / static_cast<double>(count);
}

namespace {

// Band-limited noise processes mixed into every waveform.
enum Component { kDelta, kSlow, kTheta, kFast, kBroad, kBeta, kNumComponents };

constexpr std::array<std::array<double, 2>, kNumComponents> kComponentBands{{
    {0.5, 4.0}, {0.5, 3.0}, {4.0, 8.0}, {8.0, 20.0}, {0.5, 30.0}, {14.0, 30.0}}};

using Mix = std::array<double, kNumComponents>;

enum class PieceKind { Burst, InterBurst, ActiveSleep, Wake, Hvs, G2Burst, G2Low, G3Burst, Suppression, Inactive };

struct KindSpec {
  Mix mix;
  double sine;        // slow oscillation weight
  bool event_pp;      // calibrate whole-piece pp, else mean 1 s pp
  double pp_lo;
  double pp_hi;
  int priority;       // higher keeps its samples through crossfades
};

const KindSpec& spec_of(PieceKind k) {
  //                         delta slow theta fast broad beta
  static const std::map<PieceKind, KindSpec> specs{
      {PieceKind::Burst, {{1.0, 0.0, 1.2, 0.35, 0.0, 0.0}, 1.0, true, 50.0, 150.0, 2}},
      {PieceKind::InterBurst, {{0.0, 1.0, 0.1, 0.05, 0.0, 0.0}, 0.0, true, 25.0, 50.0, 1}},
      {PieceKind::ActiveSleep, {{0.6, 0.0, 0.7, 0.7, 0.0, 0.3}, 0.0, false, 25.0, 60.0, 1}},
      {PieceKind::Wake, {{0.5, 0.0, 0.6, 0.8, 0.0, 0.5}, 0.0, false, 25.0, 60.0, 1}},
      {PieceKind::Hvs, {{0.0, 1.0, 0.05, 0.0, 0.0, 0.0}, 1.0, false, 100.0, 200.0, 1}},
      {PieceKind::G2Burst, {{0.6, 0.0, 0.7, 0.7, 0.0, 0.3}, 0.0, true, 40.0, 100.0, 2}},
      {PieceKind::G2Low, {{0.0, 0.75, 0.2, 0.2, 0.3, 0.0}, 0.0, true, 10.0, 25.0, 1}},
      {PieceKind::G3Burst, {{1.0, 0.0, 1.0, 0.5, 0.0, 0.0}, 1.0, true, 50.0, 150.0, 2}},
      {PieceKind::Suppression, {{0.0, 0.7, 0.0, 0.0, 0.5, 0.1}, 0.0, true, 4.0, 9.5, 1}},
      {PieceKind::Inactive, {{0.0, 0.0, 0.0, 0.0, 1.0, 0.3}, 0.0, true, 5.0, 14.0, 1}},
  };
  return specs.at(k);
}

struct Piece {
  std::size_t begin;
  std::size_t end;
  PieceKind kind;
};

// Rendered form of one piece on one channel.
struct Voice {
  Mix mix{};
  double sine = 0.0;
  double sine_hz = 1.0;
  double sine_phase = 0.0;
  double scale = 1.0;
};

using Components = std::array<std::vector<double>, kNumComponents>;

Components make_components(std::size_t n, double fs, Rng& rng) {
  Components c;
  const std::size_t taps = 2 * static_cast<std::size_t>(std::llround(2.0 * fs)) + 1;
  for (std::size_t k = 0; k < kNumComponents; ++k) {
    std::vector<double> white(n);
    for (auto& v : white) v = rng.normal();
    const auto filt = design_fir_bandpass(kComponentBands[k][0], kComponentBands[k][1], fs, taps);
    c[k] = apply_zero_phase(filt, white);
    double ss = 0.0;
    for (double v : c[k]) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(1, n)));
    if (rms > 0.0) {
      for (auto& v : c[k]) v /= rms;
    }
  }
  return c;
}

double voice_at(const Voice& v, const Components& c, std::size_t t, double fs) {
  double s = v.sine * std::sin(2.0 * std::numbers::pi * v.sine_hz * static_cast<double>(t) / fs + v.sine_phase);
  for (std::size_t k = 0; k < kNumComponents; ++k) {
    if (v.mix[k] != 0.0) s += v.mix[k] * c[k][t];
  }
  return v.scale * s;
}

Voice make_voice(const Piece& p, const Components& c, double fs, Rng& rng) {
  const KindSpec& ks = spec_of(p.kind);
  Voice v;
  for (std::size_t k = 0; k < kNumComponents; ++k) v.mix[k] = ks.mix[k] * rng.uniform(0.8, 1.2);
  v.sine = ks.sine;
  v.sine_hz = rng.uniform(0.5, 1.5);
  v.sine_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> raw(p.end - p.begin);
  for (std::size_t t = p.begin; t < p.end; ++t) raw[t - p.begin] = voice_at(v, c, t, fs);
  const double measured =
      ks.event_pp ? peak_to_peak(raw) : mean_window_pp(raw, static_cast<std::size_t>(std::llround(fs)));
  const double target = rng.uniform(ks.pp_lo, ks.pp_hi);
  v.scale = measured > 0.0 ? target / measured : 0.0;
  return v;
}

// Render one channel, crossfading over 0.1 s at each boundary on the side of
// the lower-priority piece.
std::vector<double> render_channel(const std::vector<Piece>& pieces, std::size_t n, double fs, Rng& rng) {
  const Components comps = make_components(n, fs, rng);
  std::vector<Voice> voices;
  voices.reserve(pieces.size());
  for (const auto& p : pieces) voices.push_back(make_voice(p, comps, fs, rng));

  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t t = pieces[i].begin; t < pieces[i].end; ++t) x[t] = voice_at(voices[i], comps, t, fs);
  }
  const auto ramp = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * fs)));
  for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
    const Piece& a = pieces[i];
    const Piece& b = pieces[i + 1];
    const int pa = spec_of(a.kind).priority;
    const int pb = spec_of(b.kind).priority;
    const std::size_t edge = a.end;
    std::size_t lo;
    std::size_t hi;
    if (pb > pa) {
      lo = edge - std::min(ramp, a.end - a.begin);
      hi = edge;
    } else if (pa > pb) {
      lo = edge;
      hi = edge + std::min(ramp, b.end - b.begin);
    } else {
      lo = edge - std::min(ramp / 2, a.end - a.begin);
      hi = edge + std::min(ramp / 2, b.end - b.begin);
    }
    const double span = static_cast<double>(hi - lo + 1);
    for (std::size_t t = lo; t < hi; ++t) {
      const double lambda = static_cast<double>(t - lo + 1) / span;
      x[t] = (1.0 - lambda) * voice_at(voices[i], comps, t, fs) + lambda * voice_at(voices[i + 1], comps, t, fs);
    }
  }
  return x;
}

std::size_t draw_samples(Rng& rng, double lo_s, double hi_s, double fs) {
  const auto lo = static_cast<std::size_t>(std::llround(lo_s * fs));
  const auto hi = static_cast<std::size_t>(std::llround(hi_s * fs));
  return lo + rng.index(hi - lo + 1);
}

// Burst / inter-burst timing over [begin, end), each piece 2-10 s.
std::vector<Piece> ta_pieces(std::size_t begin, std::size_t end, double fs, Rng& rng) {
  const auto min_len = static_cast<std::size_t>(std::llround(2.0 * fs));
  const auto max_len = static_cast<std::size_t>(std::llround(10.0 * fs));
  std::vector<Piece> out;
  bool burst = rng.uniform() < 0.5;
  std::size_t t = begin;
  while (t < end) {
    const std::size_t rem = end - t;
    std::size_t d = rem;
    if (rem > max_len) d = std::min(draw_samples(rng, 2.0, 10.0, fs), rem - min_len);
    out.push_back({t, t + d, burst ? PieceKind::Burst : PieceKind::InterBurst});
    t += d;
    burst = !burst;
  }
  return out;
}

// Alternating pieces of two kinds with the given duration ranges; a short
// tail is merged into the previous piece.
std::vector<Piece> alternating_pieces(std::size_t begin, std::size_t end, double fs, Rng& rng, PieceKind first,
                                      double first_lo, double first_hi, PieceKind second, double second_lo,
                                      double second_hi) {
  std::vector<Piece> out;
  bool is_first = true;
  std::size_t t = begin;
  const auto min_tail = static_cast<std::size_t>(std::llround(0.5 * fs));
  while (t < end) {
    std::size_t d = is_first ? draw_samples(rng, first_lo, first_hi, fs) : draw_samples(rng, second_lo, second_hi, fs);
    d = std::min(d, end - t);
    if (end - (t + d) < min_tail) d = end - t;
    out.push_back({t, t + d, is_first ? first : second});
    t += d;
    is_first = !is_first;
  }
  return out;
}

// Electrode potentials whose pairwise differences reproduce the bipolar
// channels, plus a shared drift.
std::map<std::string, std::vector<double>> solve_electrodes(const std::vector<ElectrodePair>& montage,
                                                            const std::vector<std::vector<double>>& bipolar,
                                                            const std::vector<double>& common) {
  std::map<std::string, std::vector<double>> pot;
  pot[montage.front().anode] = common;
  std::vector<bool> done(montage.size(), false);
  std::size_t remaining = montage.size();
  while (remaining > 0) {
    bool progress = false;
    for (std::size_t i = 0; i < montage.size(); ++i) {
      if (done[i]) continue;
      const auto& [a, c] = montage[i];
      const bool has_a = pot.count(a) > 0;
      const bool has_c = pot.count(c) > 0;
      if (has_a && has_c) throw std::invalid_argument("synth: montage must be a tree of electrode pairs");
      if (!has_a && !has_c) continue;
      std::vector<double> v(common.size());
      if (has_a) {
        const auto& ea = pot[a];
        for (std::size_t t = 0; t < v.size(); ++t) v[t] = ea[t] - bipolar[i][t];
        pot[c] = std::move(v);
      } else {
        const auto& ec = pot[c];
        for (std::size_t t = 0; t < v.size(); ++t) v[t] = ec[t] + bipolar[i][t];
        pot[a] = std::move(v);
      }
      done[i] = true;
      --remaining;
      progress = true;
    }
    if (!progress) throw std::invalid_argument("synth: montage must be connected");
  }
  return pot;
}

std::vector<std::string> electrode_order(const std::vector<ElectrodePair>& montage) {
  std::vector<std::string> order;
  for (const auto& p : montage) {
    for (const auto* e : {&p.anode, &p.cathode}) {
      if (std::find(order.begin(), order.end(), *e) == order.end()) order.push_back(*e);
    }
  }
  return order;
}

double to_seconds(std::size_t samples, double fs) { return static_cast<double>(samples) / fs; }

}  // namespace

TaSegment gen_ta_segment(double duration_s, double fs, Rng& rng) {
  if (duration_s < 10.0) throw std::invalid_argument("TA segment needs at least 10 s");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  const auto pieces = ta_pieces(0, n, fs, rng);
  TaSegment seg;
  seg.signal = render_channel(pieces, n, fs, rng);
  for (const auto& p : pieces) {
    seg.events.push_back({to_seconds(p.begin, fs), to_seconds(p.end, fs),
                          p.kind == PieceKind::Burst ? EventLabel::Burst : EventLabel::InterBurst, ""});
  }
  return seg;
}

SynthOutput gen_recording(const SynthConfig& cfg) {
  cfg.validate();
  const double fs = cfg.fs;
  Rng timing(mix_seed(cfg.seed, 1));

  std::vector<Piece> pieces;
  std::vector<Event> events;
  std::size_t t = 0;
  for (const auto& item : cfg.schedule) {
    const std::size_t len = static_cast<std::size_t>(std::llround(item.duration_s * fs));
    const std::size_t end = t + len;
    std::vector<Piece> block;
    switch (item.state) {
      case SynthState::Ta:
        block = ta_pieces(t, end, fs, timing);
        for (const auto& p : block) {
          events.push_back({to_seconds(p.begin, fs), to_seconds(p.end, fs),
                            p.kind == PieceKind::Burst ? EventLabel::Burst : EventLabel::InterBurst, ""});
        }
        break;
      case SynthState::Wake: block = {{t, end, PieceKind::Wake}}; break;
      case SynthState::ActiveSleep: block = {{t, end, PieceKind::ActiveSleep}}; break;
      case SynthState::Hvs: block = {{t, end, PieceKind::Hvs}}; break;
      case SynthState::Grade2Bg:
        block = alternating_pieces(t, end, fs, timing, PieceKind::G2Burst, 1.0, 5.0, PieceKind::G2Low, 2.0, 10.0);
        break;
      case SynthState::Grade3Bg:
        block = alternating_pieces(t, end, fs, timing, PieceKind::Suppression, 5.0, 30.0, PieceKind::G3Burst, 1.0, 3.0);
        break;
      case SynthState::Grade4Bg: block = {{t, end, PieceKind::Inactive}}; break;
    }
    pieces.insert(pieces.end(), block.begin(), block.end());
    events.push_back({to_seconds(t, fs), to_seconds(end, fs), item.state == SynthState::Ta ? EventLabel::Ta : EventLabel::Other,
                      item.state == SynthState::Ta ? "" : std::string(to_string(item.state))});
    t = end;
  }
  const std::size_t n = t;

  std::vector<std::vector<double>> bipolar;
  for (std::size_t c = 0; c < cfg.montage.size(); ++c) {
    Rng rng(mix_seed(cfg.seed, 100 + c));
    bipolar.push_back(render_channel(pieces, n, fs, rng));
  }

  Rng extra(mix_seed(cfg.seed, 2));
  std::vector<double> common(n, 0.0);
  if (cfg.drift_uv != 0.0) {
    const double p1 = extra.uniform(0.0, 2.0 * std::numbers::pi);
    const double p2 = extra.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 0; k < n; ++k) {
      const double s = static_cast<double>(k) / fs;
      common[k] = cfg.drift_uv * (std::sin(2.0 * std::numbers::pi * 0.01 * s + p1) +
                                  0.5 * std::sin(2.0 * std::numbers::pi * 0.003 * s + p2));
    }
  }
  auto pot = solve_electrodes(cfg.montage, bipolar, common);

  const auto names = electrode_order(cfg.montage);
  const double duration = to_seconds(n, fs);
  const double expected = cfg.artifacts_per_hour * duration / 3600.0;
  const auto n_art = static_cast<std::size_t>(std::floor(expected + extra.uniform()));
  std::vector<double> times;
  for (std::size_t i = 0; i < n_art && duration > 10.0; ++i) times.push_back(extra.uniform(5.0, duration - 5.0));
  std::sort(times.begin(), times.end());
  double last = -1e9;
  for (double at : times) {
    if (at - last < 1.0) continue;
    last = at;
    const std::string& electrode = names[extra.index(names.size())];
    const double amp = extra.uniform(2000.0, 3000.0);
    const auto b = static_cast<std::size_t>(std::llround(at * fs));
    const auto len = static_cast<std::size_t>(std::llround(0.2 * fs));
    auto& e = pot[electrode];
    for (std::size_t k = 0; k < len && b + k < n; ++k) {
      e[b + k] += amp * std::sin(std::numbers::pi * static_cast<double>(k + 1) / static_cast<double>(len + 1));
    }
    events.push_back({to_seconds(b, fs), to_seconds(std::min(n, b + len), fs), EventLabel::Artifact, electrode});
  }

  std::vector<Channel> channels;
  for (const auto& name : names) {
    auto& v = pot[name];
    for (auto& s : v) s = std::round(s * 100.0) / 100.0;
    channels.push_back({name, std::move(v)});
  }
  return {EegRecording(fs, std::move(channels)), AnnotationTrack(std::move(events)), cfg.grade};
}

SynthConfig sleep_config(std::uint64_t seed, double duration_s) {
  if (duration_s < 60.0) throw std::invalid_argument("sleep recordings need at least 60 s");
  SynthConfig cfg;
  cfg.seed = mix_seed(seed, 0x51ee9);
  cfg.montage = sleep_montage();
  Rng rng(mix_seed(seed, 0x5c4ed));
  double t = 0.0;
  bool ta = false;
  while (t < duration_s) {
    double d = std::round(ta ? rng.uniform(420.0, 720.0) : rng.uniform(240.0, 600.0));
    const double rem = duration_s - t;
    if (rem - d < 60.0) d = rem;
    SynthState s = SynthState::Ta;
    if (!ta) {
      const double u = rng.uniform();
      s = u < 0.5 ? SynthState::ActiveSleep : (u < 0.75 ? SynthState::Wake : SynthState::Hvs);
    }
    cfg.schedule.push_back({s, d});
    t += d;
    ta = !ta;
  }
  return cfg;
}

SynthConfig hie_config(int grade, double duration_s, std::uint64_t seed) {
  if (grade < 1 || grade > 4) throw std::invalid_argument("HIE grade must be 1, 2, 3 or 4");
  if (duration_s < 600.0) throw std::invalid_argument("HIE recordings need at least 10 min");
  const double total = std::round(duration_s);
  SynthConfig cfg;
  cfg.seed = mix_seed(seed, 0x41e0 + static_cast<std::uint64_t>(grade));
  cfg.montage = hie_montage();
  cfg.grade = grade;
  Rng rng(mix_seed(seed, 0x5c40 + static_cast<std::uint64_t>(grade)));
  const auto normal_state = [&] { return rng.uniform() < 0.6 ? SynthState::ActiveSleep : SynthState::Wake; };

  if (grade == 1) {
    const double ta_total = std::round(rng.uniform(0.2, 0.6) * total);
    const std::size_t max_k = std::max<std::size_t>(1, std::min<std::size_t>(3, static_cast<std::size_t>(ta_total / 300.0)));
    const std::size_t k = 1 + rng.index(max_k);
    // Split TA into k periods of at least 5 min, background into k + 1 gaps.
    std::vector<double> ta(k, 300.0);
    double spare = ta_total - 300.0 * static_cast<double>(k);
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const double add = std::round(rng.uniform(0.0, spare));
      ta[i] += add;
      spare -= add;
    }
    ta[k - 1] += spare;
    const double bg_total = total - ta_total;
    std::vector<double> w(k + 1);
    double wsum = 0.0;
    for (auto& v : w) wsum += (v = rng.uniform(0.5, 1.5));
    std::vector<double> bg(k + 1);
    double used = 0.0;
    for (std::size_t i = 0; i < k; ++i) used += (bg[i] = std::round(bg_total * w[i] / wsum));
    bg[k] = bg_total - used;
    for (std::size_t i = 0; i <= k; ++i) {
      if (bg[i] > 0.0) cfg.schedule.push_back({normal_state(), bg[i]});
      if (i < k) cfg.schedule.push_back({SynthState::Ta, ta[i]});
    }
  } else if (grade == 2) {
    if (rng.uniform() < 0.5) {
      const double ta = std::round(rng.uniform(0.05, 0.13) * total);
      const double before = std::round(rng.uniform(0.1, 0.8) * (total - ta));
      cfg.schedule.push_back({SynthState::Grade2Bg, before});
      cfg.schedule.push_back({SynthState::Ta, ta});
      cfg.schedule.push_back({SynthState::Grade2Bg, total - ta - before});
    } else {
      cfg.schedule.push_back({SynthState::Grade2Bg, total});
    }
  } else if (grade == 3) {
    cfg.schedule.push_back({SynthState::Grade3Bg, total});
  } else {
    cfg.schedule.push_back({SynthState::Grade4Bg, total});
  }
  return cfg;
}

SynthOutput gen_hie_recording(int grade, double duration_s, std::uint64_t seed) {
  return gen_recording(hie_config(grade, duration_s, seed));
}

}  // namespace tagrade
