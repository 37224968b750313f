#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "statvo/errors.hpp"

namespace statvo {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// Flat "key = value" file: one pair per line, blank lines and '#' comments
// ignored. Keys are validated by the consumer.
inline std::vector<KeyValue> parse_flat_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::vector<KeyValue> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    KeyValue kv;
    kv.key = detail::trim(trimmed.substr(0, eq));
    kv.value = detail::trim(trimmed.substr(eq + 1));
    kv.line = line_no;
    if (kv.key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    }
    out.push_back(std::move(kv));
  }
  return out;
}

inline double parse_double(const KeyValue& kv) {
  const char* begin = kv.value.data();
  const char* end = begin + kv.value.size();
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("key '" + kv.key + "': not a number: " + kv.value);
  }
  return value;
}

inline std::int64_t parse_int(const KeyValue& kv) {
  const char* begin = kv.value.data();
  const char* end = begin + kv.value.size();
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("key '" + kv.key + "': not an integer: " + kv.value);
  }
  return value;
}

inline std::uint64_t parse_u64(const KeyValue& kv) {
  const char* begin = kv.value.data();
  const char* end = begin + kv.value.size();
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("key '" + kv.key + "': not an unsigned integer: " + kv.value);
  }
  return value;
}

inline std::vector<std::string> parse_list(const KeyValue& kv) {
  std::vector<std::string> out;
  std::stringstream ss(kv.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_double_list(const KeyValue& kv) {
  std::vector<double> out;
  for (const auto& item : parse_list(kv)) {
    KeyValue tmp{kv.key, item, kv.line};
    out.push_back(parse_double(tmp));
  }
  return out;
}

}  // namespace statvo
