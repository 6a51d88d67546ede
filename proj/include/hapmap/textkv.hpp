#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hapmap {

/// Splits "key = value" lines. '#' starts a comment line; blank lines are
/// skipped. Keys and values are trimmed; duplicate keys are kept in order.
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

double parse_double(std::string_view key, std::string_view value);
int parse_int(std::string_view key, std::string_view value);

/// Whitespace-separated fields of a value.
std::vector<std::string> split_fields(std::string_view value);

std::string_view trim(std::string_view s);

}  // namespace hapmap
