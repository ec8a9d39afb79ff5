#include "tagrade/report.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace tagrade {

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_ta_svg(const TaMask& ta, double fs, std::string_view title) {
  const std::size_t n = ta.envelope.values.size();
  if (n == 0 || !(fs > 0.0)) throw std::invalid_argument("nothing to plot");
  const double width = 960.0;
  const double left = 60.0;
  const double plot_w = width - left - 20.0;
  const double top = 40.0;
  const double plot_h = 240.0;
  const double minutes = static_cast<double>(n) / fs / 60.0;
  const auto px = [&](std::size_t k) { return left + plot_w * static_cast<double>(k) / static_cast<double>(n); };
  const auto py = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + plot_h + 50
      << "\" viewBox=\"0 0 " << width << ' ' << top + plot_h + 50 << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << top + plot_h + 50 << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << escape_xml(title)
      << "</text>\n";
  for (const auto& r : true_runs(ta.mask)) {
    svg << "<rect x=\"" << fmt(px(r.start)) << "\" y=\"" << top << "\" width=\"" << fmt(px(r.start + r.length) - px(r.start))
        << "\" height=\"" << plot_h << "\" fill=\"#f4b183\" fill-opacity=\"0.5\"/>\n";
  }
  const std::size_t stride = std::max<std::size_t>(1, n / 2000);
  const auto path = [&](const std::vector<double>& v, const char* colour, double stroke) {
    if (v.size() != n) return;
    svg << "<path fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << stroke << "\" d=\"";
    for (std::size_t k = 0; k < n; k += stride) svg << (k == 0 ? 'M' : 'L') << fmt(px(k)) << ',' << fmt(py(v[k])) << ' ';
    svg << "\"/>\n";
  };
  path(ta.smoothed_cs, "#9e9e9e", 0.8);
  path(ta.envelope.values, "#1f4e79", 1.6);
  svg << "<path fill=\"none\" stroke=\"black\" d=\"M" << left << ',' << top << " L" << left << ',' << top + plot_h << " L"
      << left + plot_w << ',' << top + plot_h << "\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    svg << "<text x=\"" << left - 8 << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"11\">" << fmt(v) << "</text>\n";
    const double m = minutes * v;
    svg << "<text x=\"" << fmt(left + plot_w * v) << "\" y=\"" << top + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(m) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 40
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">time (min)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace tagrade
