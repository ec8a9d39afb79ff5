#include "tagrade/eeg_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tagrade {

EegRecording::EegRecording(double fs, std::vector<Channel> channels)
    : fs_(fs), channels_(std::move(channels)) {
  if (!(fs_ > 0.0) || !std::isfinite(fs_)) throw std::invalid_argument("sampling rate must be positive");
  for (const auto& ch : channels_) {
    if (ch.samples.size() != channels_.front().samples.size()) {
      throw std::invalid_argument("channel '" + ch.label + "' length differs from the first channel");
    }
  }
}

const Channel* EegRecording::find(std::string_view label) const {
  for (const auto& ch : channels_) {
    if (ch.label == label) return &ch;
  }
  return nullptr;
}

std::string_view to_string(EventLabel label) {
  switch (label) {
    case EventLabel::Ta: return "TA";
    case EventLabel::Burst: return "BURST";
    case EventLabel::InterBurst: return "INTERBURST";
    case EventLabel::Artifact: return "ARTIFACT";
    case EventLabel::Other: return "OTHER";
  }
  return "OTHER";
}

EventLabel parse_event_label(std::string_view text) {
  if (text == "TA") return EventLabel::Ta;
  if (text == "BURST") return EventLabel::Burst;
  if (text == "INTERBURST") return EventLabel::InterBurst;
  if (text == "ARTIFACT") return EventLabel::Artifact;
  if (text == "OTHER") return EventLabel::Other;
  throw std::invalid_argument("unknown event label '" + std::string(text) + "'");
}

AnnotationTrack::AnnotationTrack(std::vector<Event> events) : events_(std::move(events)) {
  for (const auto& e : events_) {
    if (!(e.start_s < e.end_s)) throw std::invalid_argument("event start must precede its end");
  }
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Event& a, const Event& b) { return a.start_s < b.start_s; });
  std::map<EventLabel, double> last_end;
  for (const auto& e : events_) {
    auto it = last_end.find(e.label);
    if (it != last_end.end() && e.start_s < it->second) {
      throw std::invalid_argument("overlapping " + std::string(to_string(e.label)) + " events");
    }
    last_end[e.label] = e.end_s;
  }
}

std::vector<Event> AnnotationTrack::with_label(EventLabel label) const {
  std::vector<Event> out;
  for (const auto& e : events_) {
    if (e.label == label) out.push_back(e);
  }
  return out;
}

std::size_t SampleMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool SampleMask::any_in(std::size_t begin, std::size_t end) const {
  end = std::min(end, bits_.size());
  for (std::size_t i = begin; i < end; ++i) {
    if (bits_[i]) return true;
  }
  return false;
}

std::vector<Run> true_runs(const SampleMask& mask) {
  std::vector<Run> runs;
  std::size_t i = 0;
  const std::size_t n = mask.size();
  while (i < n) {
    if (!mask[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && mask[j]) ++j;
    runs.push_back({i, j - i});
    i = j;
  }
  return runs;
}

SampleMask annotations_to_mask(const AnnotationTrack& track, EventLabel label, double fs, std::size_t n) {
  if (n == 0) throw std::invalid_argument("mask length must be positive");
  SampleMask mask(n, fs);
  for (const auto& e : track.events()) {
    if (e.label != label) continue;
    // k/fs >= start  <=>  k >= ceil(start*fs); k/fs < end  <=>  k < ceil(end*fs)
    const double lo = std::max(0.0, std::ceil(e.start_s * fs - 1e-9));
    const double hi = std::min(static_cast<double>(n), std::ceil(e.end_s * fs - 1e-9));
    for (auto k = static_cast<std::size_t>(lo); static_cast<double>(k) < hi; ++k) mask.set(k);
  }
  return mask;
}

std::vector<Event> mask_to_events(const SampleMask& mask, EventLabel label) {
  std::vector<Event> out;
  for (const auto& r : true_runs(mask)) {
    out.push_back({static_cast<double>(r.start) / mask.fs(),
                   static_cast<double>(r.start + r.length) / mask.fs(), label, {}});
  }
  return out;
}

EegRecording derive_montage(const EegRecording& rec, std::span<const ElectrodePair> pairs) {
  std::vector<Channel> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Channel* a = rec.find(p.anode);
    const Channel* c = rec.find(p.cathode);
    if (!a) throw std::invalid_argument("montage: electrode '" + p.anode + "' not in recording");
    if (!c) throw std::invalid_argument("montage: electrode '" + p.cathode + "' not in recording");
    Channel ch{p.anode + "-" + p.cathode, std::vector<double>(rec.num_samples())};
    for (std::size_t i = 0; i < ch.samples.size(); ++i) ch.samples[i] = a->samples[i] - c->samples[i];
    out.push_back(std::move(ch));
  }
  return EegRecording(rec.fs(), std::move(out));
}

const std::vector<ElectrodePair>& sleep_montage() {
  static const std::vector<ElectrodePair> pairs{
      {"F3", "T3"}, {"F4", "T4"}, {"T4", "Cz"}, {"Cz", "T3"}};
  return pairs;
}

const std::vector<ElectrodePair>& hie_montage() {
  static const std::vector<ElectrodePair> pairs{
      {"F4", "C4"}, {"F3", "C3"}, {"C4", "O2"}, {"C3", "O1"},
      {"T4", "C4"}, {"C3", "T3"}, {"C4", "Cz"}, {"Cz", "C3"}};
  return pairs;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(',', pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format sample value");
  out.append(buf, ptr);
}

}  // namespace

EegRecording load_recording(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open recording '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("recording: missing header");
  std::string_view head = trim(line);
  if (head.rfind("fs=", 0) != 0) throw std::runtime_error("recording: first line must be 'fs=<Hz>'");
  const double fs = parse_double(head.substr(3), 1);
  if (!(fs > 0.0)) throw std::runtime_error("recording: sampling rate must be positive");
  if (!std::getline(in, line)) throw std::runtime_error("recording: missing channel label line");
  std::vector<Channel> channels;
  for (auto label : split_commas(trim(line))) {
    label = trim(label);
    if (label.empty()) throw std::runtime_error("recording: empty channel label");
    channels.push_back({std::string(label), {}});
  }
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto cells = split_commas(row);
    if (cells.size() != channels.size()) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(channels.size()) + " columns, found " +
                               std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) channels[c].samples.push_back(parse_double(cells[c], line_no));
  }
  return EegRecording(fs, std::move(channels));
}

void save_recording(const EegRecording& rec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write recording '" + path.string() + "'");
  std::string buf = "fs=";
  append_double(buf, rec.fs());
  buf += '\n';
  for (std::size_t c = 0; c < rec.num_channels(); ++c) {
    if (c) buf += ',';
    buf += rec.channel(c).label;
  }
  buf += '\n';
  for (std::size_t i = 0; i < rec.num_samples(); ++i) {
    for (std::size_t c = 0; c < rec.num_channels(); ++c) {
      if (c) buf += ',';
      append_double(buf, rec.channel(c).samples[i]);
    }
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

AnnotationTrack load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open annotations '" + path.string() + "'");
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Event e;
      e.start_s = j.at("start_s").get<double>();
      e.end_s = j.at("end_s").get<double>();
      e.label = parse_event_label(j.at("label").get<std::string>());
      if (j.contains("note")) e.note = j.at("note").get<std::string>();
      events.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw std::runtime_error("annotations line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return AnnotationTrack(std::move(events));
}

void save_annotations(const AnnotationTrack& track, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write annotations '" + path.string() + "'");
  for (const auto& e : track.events()) {
    nlohmann::ordered_json j;
    j["start_s"] = e.start_s;
    j["end_s"] = e.end_s;
    j["label"] = std::string(to_string(e.label));
    if (!e.note.empty()) j["note"] = e.note;
    out << j.dump() << '\n';
  }
}

}  // namespace tagrade
