#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "foley/errors.hpp"
#include "json.hpp"

namespace foley::detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string(what) + ": cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path, const char* what) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(std::string(what) + ": cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Reads a required field, naming it in the diagnostic on absence or type mismatch.
template <typename T>
T field(const nlohmann::json& j, const char* name, const char* what) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError(std::string(what) + ": missing field '" + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string(what) + ": field '" + name + "' has the wrong type");
  }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* name, T fallback, const char* what) {
  if (!j.is_object() || !j.contains(name)) return fallback;
  return field<T>(j, name, what);
}

// Integer field that must be strictly positive.
inline long long positive_field(const nlohmann::json& j, const char* name, const char* what) {
  const auto v = field<long long>(j, name, what);
  if (v <= 0) throw FormatError(std::string(what) + ": field '" + name + "' must be positive");
  return v;
}

}  // namespace foley::detail
