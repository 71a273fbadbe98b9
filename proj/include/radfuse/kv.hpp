#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "radfuse/error.hpp"

namespace radfuse {

/// Plain-text `key = value` documents used for volume headers and configs.
///
/// Values use JSON literal syntax (numbers, "strings", true/false, [arrays]);
/// an unquoted value that is not valid JSON is kept as a bare string.
/// `#` starts a comment outside of quoted strings. Keys keep file order.
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text, const std::string& source = "<text>");
  static KeyValues read(const std::filesystem::path& path);

  void write(const std::filesystem::path& path) const;
  std::string dump() const;

  bool has(const std::string& key) const { return values_.contains(key); }

  template <typename T>
  T get(const std::string& key) const {
    if (!has(key)) fail(ErrorKind::Format, source_ + ": missing key '" + key + "'");
    try {
      return values_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Format, source_ + ": bad value for '" + key + "': " + e.what());
    }
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  template <typename T>
  void set(const std::string& key, T value) {
    values_[key] = std::move(value);
  }

  const nlohmann::ordered_json& values() const { return values_; }
  const std::string& source() const { return source_; }

 private:
  nlohmann::ordered_json values_ = nlohmann::ordered_json::object();
  std::string source_ = "<text>";
};

}  // namespace radfuse
