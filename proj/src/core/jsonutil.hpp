#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "core/errors.hpp"

namespace dcur {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open for reading: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open for writing: " + path);
  out << text;
  if (!out) raise(ErrorCode::IoError, "write failed: " + path);
}

inline Json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    raise(ErrorCode::ParseError, "invalid JSON in " + path);
  }
  return j;
}

inline void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// Fetches a required field, raising ParseError with the field path.
template <typename T>
T json_require(const Json& j, const std::string& key,
               const std::string& context) {
  if (!j.contains(key)) {
    raise(ErrorCode::ParseError, context + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    raise(ErrorCode::ParseError, context + ": field '" + key + "' has wrong type");
  }
}

inline void check_format_version(const Json& j, const std::string& context) {
  const int v = json_require<int>(j, "format_version", context);
  if (v != kFormatVersion) {
    raise(ErrorCode::VersionMismatch,
          context + ": format_version " + std::to_string(v) +
              " not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
}

}  // namespace dcur
