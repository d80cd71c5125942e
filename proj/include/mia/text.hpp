#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mia::text {

/// Number of UTF-8 code points in `s`. Continuation bytes are not counted, so
/// malformed input still yields a finite, stable answer.
std::size_t utf8_length(std::string_view s);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool iequals_ascii(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Collapses runs of whitespace into single spaces and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Whitespace tokenizer shared by prefix/suffix splitting and LCS scoring.
std::vector<std::string> tokenize(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Case-folds ASCII letters and strips ASCII punctuation from both ends and
/// inside the token. Non-ASCII bytes (accents, CJK) are kept as-is.
std::string normalize_token(std::string_view token);

/// tokenize() followed by normalize_token(), dropping tokens that normalize to
/// the empty string.
std::vector<std::string> normalized_tokens(std::string_view s);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace mia::text
