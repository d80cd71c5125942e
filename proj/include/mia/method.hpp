#pragma once

#include <string_view>

namespace mia {

enum class Method { ncq, decop, probing, familiarity, paraphrase };

/// Role a text plays inside a familiarity ranking set.
enum class Category { original, paraphrase, random };

enum class MaskMode { single, all };
enum class RankScale { rank_1_to_3, score_0_to_10 };

/// Correctness rule for the 0-10 familiarity scale.
///  separation: original above every random, every paraphrase above every random.
///  strict:     original above every paraphrase, every paraphrase above every random.
enum class ScoreCriterion { separation, strict };

std::string_view to_string(Method m);
std::string_view to_string(Category c);
std::string_view to_string(MaskMode m);
std::string_view to_string(RankScale s);
std::string_view to_string(ScoreCriterion c);

Method parse_method(std::string_view s);
Category parse_category(std::string_view s);
MaskMode parse_mask_mode(std::string_view s);
RankScale parse_rank_scale(std::string_view s);
ScoreCriterion parse_score_criterion(std::string_view s);

}  // namespace mia
