#include "drivebench/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace drivebench::io {

std::string read_text_file(const std::filesystem::path & path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::filesystem::path & path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error & e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path & path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void require_known_keys(const json & obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context) {
  if (!obj.is_object()) throw FormatError(std::string(context) + ": expected an object");
  for (const auto & [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw FormatError(std::string(context) + ": unknown field '" + key + "'");
  }
}

void require_format_version(const json & obj, int expected, std::string_view context) {
  const int v = get_required<int>(obj, "format_version", context);
  if (v != expected) {
    throw FormatError(std::string(context) + ": unsupported format_version " + std::to_string(v) +
                      " (expected " + std::to_string(expected) + ")");
  }
}

geom::Vec2 vec2_from_json(const json & j, std::string_view context) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw FormatError(std::string(context) + ": expected [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json vec2_to_json(const geom::Vec2 & v) { return json::array({v.x, v.y}); }

double quantize(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double q = std::round(v * scale) / scale;
  return q == 0.0 ? 0.0 : q;  // no negative zero in serialized output
}

}  // namespace drivebench::io
