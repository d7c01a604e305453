#pragma once

#include "resproxy/common/errors.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>

namespace resproxy {

using Json = nlohmann::ordered_json;

/// Throws ConfigError if `j` is not an object or holds a key outside `allowed`.
void require_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view context);

/// Reads j[key] into out when present; type mismatches become ConfigError.
template <typename T>
void read_optional(const Json& j, const char* key, T& out, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(context) + "." + key + ": " + e.what());
    }
}

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace resproxy
