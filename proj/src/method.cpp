#include "mia/method.hpp"

#include <string>

#include "mia/errors.hpp"

namespace mia {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::ncq: return "ncq";
        case Method::decop: return "decop";
        case Method::probing: return "probing";
        case Method::familiarity: return "familiarity";
        case Method::paraphrase: return "paraphrase";
    }
    return "?";
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::original: return "original";
        case Category::paraphrase: return "paraphrase";
        case Category::random: return "random";
    }
    return "?";
}

std::string_view to_string(MaskMode m) { return m == MaskMode::single ? "single" : "all"; }

std::string_view to_string(RankScale s) {
    return s == RankScale::rank_1_to_3 ? "rank_1_to_3" : "score_0_to_10";
}

std::string_view to_string(ScoreCriterion c) {
    return c == ScoreCriterion::separation ? "separation" : "strict";
}

namespace {
[[noreturn]] void bad(std::string_view what, std::string_view s) {
    throw FatalConfigError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}
}  // namespace

Method parse_method(std::string_view s) {
    if (s == "ncq") return Method::ncq;
    if (s == "decop" || s == "de-cop") return Method::decop;
    if (s == "probing") return Method::probing;
    if (s == "familiarity" || s == "fr") return Method::familiarity;
    if (s == "paraphrase") return Method::paraphrase;
    bad("method", s);
}

Category parse_category(std::string_view s) {
    if (s == "original") return Category::original;
    if (s == "paraphrase") return Category::paraphrase;
    if (s == "random") return Category::random;
    bad("category", s);
}

MaskMode parse_mask_mode(std::string_view s) {
    if (s == "single") return MaskMode::single;
    if (s == "all") return MaskMode::all;
    bad("mask mode", s);
}

RankScale parse_rank_scale(std::string_view s) {
    if (s == "rank_1_to_3" || s == "1-3") return RankScale::rank_1_to_3;
    if (s == "score_0_to_10" || s == "0-10") return RankScale::score_0_to_10;
    bad("scale", s);
}

ScoreCriterion parse_score_criterion(std::string_view s) {
    if (s == "separation") return ScoreCriterion::separation;
    if (s == "strict") return ScoreCriterion::strict;
    bad("score criterion", s);
}

}  // namespace mia
