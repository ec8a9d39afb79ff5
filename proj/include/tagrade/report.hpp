#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

#include "tagrade/ta_detector.hpp"

namespace tagrade {

// Two-space indented JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// CS trace, envelope and shaded TA mask against time in minutes.
std::string render_ta_svg(const TaMask& ta, double fs, std::string_view title);

// FNV-1a 64-bit digest of a file, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

}  // namespace tagrade
