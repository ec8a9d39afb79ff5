#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tagrade {

struct Channel {
  std::string label;
  std::vector<double> samples;  // microvolts
};

// Multi-channel recording. All channels share one length and sampling rate.
class EegRecording {
 public:
  EegRecording(double fs, std::vector<Channel> channels);

  double fs() const { return fs_; }
  std::size_t num_channels() const { return channels_.size(); }
  std::size_t num_samples() const { return channels_.empty() ? 0 : channels_.front().samples.size(); }
  double duration_s() const { return static_cast<double>(num_samples()) / fs_; }

  const std::vector<Channel>& channels() const { return channels_; }
  const Channel& channel(std::size_t i) const { return channels_.at(i); }
  const Channel* find(std::string_view label) const;

 private:
  double fs_;
  std::vector<Channel> channels_;
};

enum class EventLabel { Ta, Burst, InterBurst, Artifact, Other };

std::string_view to_string(EventLabel label);
EventLabel parse_event_label(std::string_view text);

struct Event {
  double start_s = 0.0;
  double end_s = 0.0;
  EventLabel label = EventLabel::Other;
  std::string note;  // free text, e.g. the synthetic sleep state
};

// Timed events. Events sharing a label never overlap (adjacency is allowed).
class AnnotationTrack {
 public:
  AnnotationTrack() = default;
  explicit AnnotationTrack(std::vector<Event> events);

  const std::vector<Event>& events() const { return events_; }
  std::vector<Event> with_label(EventLabel label) const;
  bool empty() const { return events_.empty(); }

 private:
  std::vector<Event> events_;
};

// Per-sample boolean raster.
class SampleMask {
 public:
  SampleMask() = default;
  SampleMask(std::size_t n, double fs, bool value = false) : bits_(n, value ? 1 : 0), fs_(fs) {}
  SampleMask(std::vector<std::uint8_t> bits, double fs) : bits_(std::move(bits)), fs_(fs) {}

  std::size_t size() const { return bits_.size(); }
  double fs() const { return fs_; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v = true) { bits_[i] = v ? 1 : 0; }
  std::size_t count() const;
  bool any() const { return count() > 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // True if any sample in [begin, end) is set.
  bool any_in(std::size_t begin, std::size_t end) const;

 private:
  std::vector<std::uint8_t> bits_;
  double fs_ = 1.0;
};

// Maximal run of set samples.
struct Run {
  std::size_t start = 0;
  std::size_t length = 0;
};

std::vector<Run> true_runs(const SampleMask& mask);

// Samples k with k/fs in [start_s, end_s) of any event carrying `label`.
SampleMask annotations_to_mask(const AnnotationTrack& track, EventLabel label, double fs, std::size_t n);

// One event per maximal run of the mask.
std::vector<Event> mask_to_events(const SampleMask& mask, EventLabel label);

struct ElectrodePair {
  std::string anode;
  std::string cathode;
};

// Channel i = anode_i - cathode_i, labelled "anode-cathode".
EegRecording derive_montage(const EegRecording& rec, std::span<const ElectrodePair> pairs);

// F3-T3, F4-T4, T4-Cz, Cz-T3.
const std::vector<ElectrodePair>& sleep_montage();
// F4-C4, F3-C3, C4-O2, C3-O1, T4-C4, C3-T3, C4-Cz, Cz-C3.
const std::vector<ElectrodePair>& hie_montage();

// CSV: line 1 "fs=<Hz>", line 2 channel labels, then one row per sample.
EegRecording load_recording(const std::filesystem::path& path);
void save_recording(const EegRecording& rec, const std::filesystem::path& path);

// JSON lines: {"start_s":..,"end_s":..,"label":"TA"} per event.
AnnotationTrack load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationTrack& track, const std::filesystem::path& path);

}  // namespace tagrade
