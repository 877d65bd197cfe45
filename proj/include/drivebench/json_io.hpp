#pragma once

#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "drivebench/geometry.hpp"

namespace drivebench {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Raised for malformed or schema-violating input documents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

json read_json_file(const std::filesystem::path & path);
std::string read_text_file(const std::filesystem::path & path);
void write_text_file(const std::filesystem::path & path, std::string_view text);

/// Rejects any key of `obj` not listed in `allowed`.
void require_known_keys(const json & obj, std::initializer_list<std::string_view> allowed,
                        std::string_view context);

void require_format_version(const json & obj, int expected, std::string_view context);

template <typename T>
T get_required(const json & obj, const char * key, std::string_view context) {
  if (!obj.contains(key)) {
    throw FormatError(std::string(context) + ": missing field '" + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception & e) {
    throw FormatError(std::string(context) + ": bad field '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const json & obj, const char * key, T fallback, std::string_view context) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return get_required<T>(obj, key, context);
}

geom::Vec2 vec2_from_json(const json & j, std::string_view context);
json vec2_to_json(const geom::Vec2 & v);

/// Rounds to the nearest multiple of 10^-decimals.
double quantize(double v, int decimals = 3);

}  // namespace io
}  // namespace drivebench
