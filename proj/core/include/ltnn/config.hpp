#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ltnn {

/// Unknown key or unparsable value in a key=value configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Binds flat `key=value` settings to fields of config structs.
///
/// Text form: one `key=value` per line, `#` starts a comment, blank lines
/// are ignored. Later assignments override earlier ones, so applying the
/// file and then command-line overrides gives CLI > file > defaults.
class ConfigBinder {
 public:
  void bind(std::string key, int& field);
  void bind(std::string key, std::uint64_t& field);
  void bind(std::string key, double& field);
  void bind(std::string key, bool& field);
  void bind(std::string key, std::string& field);
  void bind(std::string key, std::vector<int>& field);
  /// String restricted to `choices`.
  void bind_choice(std::string key, std::string& field, std::vector<std::string> choices);
  void bind_custom(std::string key, std::function<void(std::string_view)> parse,
                   std::function<std::string()> format);

  bool has(std::string_view key) const;
  void set(std::string_view key, std::string_view value);
  void load_text(std::string_view text, std::string_view origin = "<text>");
  void load_file(const std::filesystem::path& path);

  /// All bound keys with their current values, in binding order.
  std::string to_text() const;
  std::vector<std::string> keys() const;

 private:
  struct Entry {
    std::string key;
    std::function<void(std::string_view)> parse;
    std::function<std::string()> format;
  };
  const Entry* find(std::string_view key) const;
  std::vector<Entry> entries_;
};

std::string format_int_list(const std::vector<int>& values);
std::vector<int> parse_int_list(std::string_view text);
/// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace ltnn
