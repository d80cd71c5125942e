#include "mia/names.hpp"

#include <set>
#include <unordered_set>

#include "mia/text.hpp"

namespace mia {

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a", "about", "above", "according", "additionally", "after", "again", "against", "all",
        "also", "although", "among", "an", "and", "another", "any", "appendix", "are", "as", "at",
        "based", "be", "because", "been", "before", "being", "below", "between", "both", "but",
        "by", "can", "consequently", "could", "despite", "did", "do", "does", "due", "during",
        "each", "either", "eq", "equation", "even", "every", "fig", "figure", "finally", "first",
        "for", "from", "further", "furthermore", "given", "had", "has", "have", "he", "hence",
        "her", "here", "his", "how", "however", "i", "if", "in", "indeed", "instead", "into",
        "is", "it", "its", "just", "last", "later", "let", "like", "many", "may", "me",
        "meanwhile", "might", "more", "moreover", "most", "much", "must", "my", "neither", "next",
        "no", "nor", "not", "note", "now", "of", "on", "once", "one", "only", "or", "other",
        "our", "over", "overall", "per", "previously", "recently", "second", "section", "she",
        "should", "similarly", "since", "so", "some", "specifically", "still", "such", "table",
        "than", "that", "the", "their", "them", "then", "there", "therefore", "these", "they",
        "third", "this", "those", "though", "three", "through", "thus", "to", "today", "two",
        "under", "unlike", "until", "upon", "us", "using", "via", "was", "we", "were", "what",
        "when", "where", "whereas", "which", "while", "who", "whom", "whose", "why", "will",
        "with", "within", "without", "would", "yet", "you", "your",
        // calendar words are capitalized but not names
        "january", "february", "march", "april", "june", "july", "august", "september",
        "october", "november", "december", "monday", "tuesday", "wednesday", "thursday",
        "friday", "saturday", "sunday",
        // cloze placeholder
        "mask"};
    return words;
}

bool is_word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c >= 0x80;
}

// ASCII capital, or a two-byte Latin-1 supplement capital (U+00C0..U+00DE).
bool starts_upper(std::string_view tok) {
    auto c0 = static_cast<unsigned char>(tok[0]);
    if (c0 >= 'A' && c0 <= 'Z') return true;
    if (c0 == 0xC3 && tok.size() > 1) {
        auto c1 = static_cast<unsigned char>(tok[1]);
        return c1 >= 0x80 && c1 <= 0x9E && c1 != 0x97;
    }
    return false;
}

bool has_digit(std::string_view tok) {
    for (char c : tok)
        if (c >= '0' && c <= '9') return true;
    return false;
}

bool is_all_caps(std::string_view tok) {
    for (char c : tok)
        if (c >= 'a' && c <= 'z') return false;
    return true;
}

struct Token {
    std::size_t start;
    std::size_t end;
    bool sentence_initial;
};

std::vector<Token> scan(std::string_view text) {
    std::vector<Token> out;
    bool at_sentence_start = true;
    std::size_t i = 0;
    while (i < text.size()) {
        auto c = static_cast<unsigned char>(text[i]);
        if (!is_word_byte(c)) {
            if (c == '.' || c == '!' || c == '?') at_sentence_start = true;
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size()) {
            auto d = static_cast<unsigned char>(text[i]);
            if (is_word_byte(d)) {
                ++i;
            } else if (d == '-' && i + 1 < text.size() &&
                       is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
                ++i;
            } else {
                break;
            }
        }
        out.push_back({start, i, at_sentence_start});
        at_sentence_start = false;
    }
    return out;
}

}  // namespace

std::vector<NameSpan> RuleBasedNameDetector::detect(std::string_view text) const {
    auto tokens = scan(text);
    auto qualifies = [&](const Token& t) {
        std::string_view tok = text.substr(t.start, t.end - t.start);
        if (!starts_upper(tok) || has_digit(tok)) return false;
        if (is_all_caps(tok) && text::utf8_length(tok) < 2) return false;
        return !stopwords().contains(text::to_lower_ascii(tok));
    };

    std::set<std::string_view> seen_mid_sentence;
    for (const auto& t : tokens)
        if (!t.sentence_initial && qualifies(t))
            seen_mid_sentence.insert(text.substr(t.start, t.end - t.start));

    std::vector<NameSpan> spans;
    for (const auto& t : tokens) {
        if (!qualifies(t)) continue;
        std::string_view tok = text.substr(t.start, t.end - t.start);
        if (t.sentence_initial && !seen_mid_sentence.contains(tok)) continue;
        spans.push_back({t.start, t.end, std::string(tok)});
    }
    return spans;
}

const NameDetector& default_name_detector() {
    static const RuleBasedNameDetector detector;
    return detector;
}

}  // namespace mia
