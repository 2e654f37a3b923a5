#pragma once

// Flat key-value configuration files: `key = value` per line, `#` comments.
// Used for the bundled defaults and for contingency scenario files.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "flexreg/errors.hpp"
#include "flexreg/io.hpp"

namespace flexreg {

class Config {
 public:
  Config() = default;

  static Config from_stream(std::istream& in, const std::string& source) {
    Config cfg;
    cfg.source_ = source;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string_view trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string_view::npos) {
        throw ValidationError(source + " line " + std::to_string(line_no) +
                              ": expected 'key = value'");
      }
      const std::string key{trim(trimmed.substr(0, eq))};
      const std::string value{trim(trimmed.substr(eq + 1))};
      if (key.empty()) {
        throw ValidationError(source + " line " + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    return from_stream(in, path.filename().string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<double> get_double(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return io::parse_double(it->second, source_ + " key '" + key + "'");
  }

  double get_double_or(const std::string& key, double fallback) const {
    const auto v = get_double(key);
    return v ? *v : fallback;
  }

  double require_double(const std::string& key) const {
    const auto v = get_double(key);
    if (!v) throw ValidationError(source_ + ": missing key '" + key + "'");
    return *v;
  }

  const std::string& source() const { return source_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  }

  std::map<std::string, std::string> values_;
  std::string source_ = "<config>";
};

}  // namespace flexreg
