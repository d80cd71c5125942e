#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mia {

/// A proper-name occurrence as byte offsets into the text it was found in.
struct NameSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string surface;

    bool operator==(const NameSpan&) const = default;
};

/// Pluggable proper-name detector. Implementations return non-overlapping
/// spans sorted by start.
class NameDetector {
public:
    virtual ~NameDetector() = default;
    virtual std::vector<NameSpan> detect(std::string_view text) const = 0;
};

/// Capitalization heuristic: a single capitalized token that is not a
/// stopword, not a lone capital letter, and not capitalized only because it
/// opens a sentence (unless the same form also appears mid-sentence).
class RuleBasedNameDetector final : public NameDetector {
public:
    std::vector<NameSpan> detect(std::string_view text) const override;
};

const NameDetector& default_name_detector();

inline std::vector<NameSpan> detect_proper_names(std::string_view text) {
    return default_name_detector().detect(text);
}

}  // namespace mia
