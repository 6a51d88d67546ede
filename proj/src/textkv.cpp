#include "hapmap/textkv.hpp"

#include <charconv>
#include <cmath>

#include "hapmap/types.hpp"

namespace hapmap {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error("line " + std::to_string(line_no) + ": expected key=value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  value = trim(value);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v))
    throw Error("invalid number for '" + std::string(key) + "': '" + std::string(value) + "'");
  return v;
}

int parse_int(std::string_view key, std::string_view value) {
  value = trim(value);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw Error("invalid integer for '" + std::string(key) + "': '" + std::string(value) + "'");
  return v;
}

std::vector<std::string> split_fields(std::string_view value) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < value.size()) {
    while (i < value.size() && (value[i] == ' ' || value[i] == '\t' || value[i] == ',')) ++i;
    const std::size_t start = i;
    while (i < value.size() && value[i] != ' ' && value[i] != '\t' && value[i] != ',') ++i;
    if (i > start) out.emplace_back(value.substr(start, i - start));
  }
  return out;
}

}  // namespace hapmap
