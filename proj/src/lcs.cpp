#include "mia/lcs.hpp"

#include <algorithm>

#include "mia/text.hpp"

namespace mia {

std::size_t token_lcs(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() < b.size()) std::swap(a, b);  // rows sized by the shorter input
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::size_t text_lcs(std::string_view a, std::string_view b) {
    return token_lcs(text::normalized_tokens(a), text::normalized_tokens(b));
}

}  // namespace mia
