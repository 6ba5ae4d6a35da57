#include "ltnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ltnn {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_int_list(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.size() - start
                                                                              : comma - start));
    out.push_back(parse_number<int>("list", item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void ConfigBinder::bind(std::string key, int& field) {
  bind_custom(
      key, [&field, key](std::string_view v) { field = parse_number<int>(key, v); },
      [&field] { return std::to_string(field); });
}

void ConfigBinder::bind(std::string key, std::uint64_t& field) {
  bind_custom(
      key, [&field, key](std::string_view v) { field = parse_number<std::uint64_t>(key, v); },
      [&field] { return std::to_string(field); });
}

void ConfigBinder::bind(std::string key, double& field) {
  bind_custom(
      key, [&field, key](std::string_view v) { field = parse_number<double>(key, v); },
      [&field] { return format_double(field); });
}

void ConfigBinder::bind(std::string key, bool& field) {
  bind_custom(
      key,
      [&field, key](std::string_view v) {
        if (v == "1" || v == "true" || v == "on" || v == "yes") {
          field = true;
        } else if (v == "0" || v == "false" || v == "off" || v == "no") {
          field = false;
        } else {
          throw ConfigError("invalid boolean '" + std::string(v) + "' for key '" + key + "'");
        }
      },
      [&field] { return std::string(field ? "true" : "false"); });
}

void ConfigBinder::bind(std::string key, std::string& field) {
  bind_custom(
      key, [&field](std::string_view v) { field = std::string(v); }, [&field] { return field; });
}

void ConfigBinder::bind(std::string key, std::vector<int>& field) {
  bind_custom(
      key,
      [&field, key](std::string_view v) {
        try {
          field = parse_int_list(v);
        } catch (const ConfigError&) {
          throw ConfigError("invalid integer list '" + std::string(v) + "' for key '" + key + "'");
        }
      },
      [&field] { return format_int_list(field); });
}

void ConfigBinder::bind_choice(std::string key, std::string& field,
                               std::vector<std::string> choices) {
  bind_custom(
      key,
      [&field, key, choices](std::string_view v) {
        if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
          std::string allowed;
          for (const auto& c : choices) allowed += (allowed.empty() ? "" : "|") + c;
          throw ConfigError("invalid value '" + std::string(v) + "' for key '" + key +
                            "' (expected " + allowed + ")");
        }
        field = std::string(v);
      },
      [&field] { return field; });
}

void ConfigBinder::bind_custom(std::string key, std::function<void(std::string_view)> parse,
                               std::function<std::string()> format) {
  if (find(key)) throw std::logic_error("config key bound twice: " + key);
  entries_.push_back(Entry{std::move(key), std::move(parse), std::move(format)});
}

const ConfigBinder::Entry* ConfigBinder::find(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

bool ConfigBinder::has(std::string_view key) const { return find(key) != nullptr; }

void ConfigBinder::set(std::string_view key, std::string_view value) {
  const Entry* e = find(key);
  if (!e) throw ConfigError("unknown config key '" + std::string(key) + "'");
  e->parse(trim(value));
}

void ConfigBinder::load_text(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected key=value, got '" + std::string(line) + "'");
      }
      try {
        set(trim(line.substr(0, eq)), line.substr(eq + 1));
      } catch (const ConfigError& err) {
        throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": " + err.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
}

void ConfigBinder::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

std::string ConfigBinder::to_text() const {
  std::string out;
  for (const auto& e : entries_) out += e.key + "=" + e.format() + "\n";
  return out;
}

std::vector<std::string> ConfigBinder::keys() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

}  // namespace ltnn
