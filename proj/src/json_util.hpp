#pragma once

// Internal helpers shared by the JSON loaders. Not installed.

#include <string>
#include <string_view>

#include <json.hpp>

#include "talfuse/error.hpp"

namespace talfuse::detail {

inline nlohmann::json parse_json(std::string_view bytes, std::string_view what) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

inline const nlohmann::json& require_member(const nlohmann::json& j, const char* key,
                                            const std::string& where) {
  if (!j.is_object()) {
    throw SchemaError(where + ": expected an object");
  }
  auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(where + ": missing field \"" + key + "\"");
  }
  return *it;
}

inline double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto& v = require_member(j, key, where);
  if (!v.is_number()) {
    throw SchemaError(where + ": field \"" + key + "\" must be a number");
  }
  return v.get<double>();
}

inline std::string require_string(const nlohmann::json& j, const char* key,
                                  const std::string& where) {
  const auto& v = require_member(j, key, where);
  if (!v.is_string()) {
    throw SchemaError(where + ": field \"" + key + "\" must be a string");
  }
  return v.get<std::string>();
}

}  // namespace talfuse::detail
