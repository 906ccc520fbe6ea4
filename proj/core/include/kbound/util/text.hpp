#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kbound::util {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
bool contains_case_insensitive(std::string_view haystack, std::string_view needle);

/// Replaces typographic apostrophes/quotes with their ASCII forms.
std::string ascii_quotes(std::string_view s);

/// Number of whitespace-delimited tokens, never less than 1 for non-empty text.
std::size_t whitespace_token_count(std::string_view s);

}  // namespace kbound::util
