#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mia {

/// Longest common subsequence length over whole tokens. Tokens are compared
/// as given; callers normalize first (see text::normalized_tokens).
/// O(|a|·|b|) time, two rows of memory.
std::size_t token_lcs(std::span<const std::string> a, std::span<const std::string> b);

/// token_lcs over case-folded, punctuation-stripped whitespace tokens.
std::size_t text_lcs(std::string_view a, std::string_view b);

}  // namespace mia
