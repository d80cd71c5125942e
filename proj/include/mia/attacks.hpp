#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mia/corpus.hpp"
#include "mia/gateway.hpp"
#include "mia/method.hpp"
#include "mia/perturb.hpp"
#include "mia/templates.hpp"

namespace mia {

inline constexpr std::size_t kDefaultProbeThreshold = 20;

/// Method-specific knobs. Only the fields of the selected method are read.
struct Variant {
    MaskMode mask_mode = MaskMode::single;
    std::size_t threshold_tokens = kDefaultProbeThreshold;
    bool probing_framed = true;
    RankScale scale = RankScale::rank_1_to_3;
    int set_size = 3;
    ScoreCriterion criterion = ScoreCriterion::separation;

    /// Stable tag such as `mask=all` or `scale=score_0_to_10,set=5,criterion=strict`.
    std::string tag(Method m) const;
    static Variant parse(Method m, std::string_view tag);
};

/// Whether outcomes of this configuration carry a member/non-member decision.
/// All-mask NCQ and the 0-10 familiarity scale are accuracy-only.
bool variant_predicts(Method m, const Variant& v);

struct AttackOutcome {
    std::string chunk_id;
    Method method = Method::ncq;
    std::string variant;
    std::string model_id;
    std::string dataset;
    MembershipLabel membership_label = MembershipLabel::member;
    std::string raw_response;
    std::string finish_reason;
    std::optional<nlohmann::json> parsed;
    nlohmann::json gold;
    double score = 0.0;
    std::optional<bool> predicted_member;
    std::optional<std::string> error;
    /// Probing: gold suffix length in scoring tokens; zero elsewhere.
    std::size_t reference_tokens = 0;
};

// ---- response parsers ------------------------------------------------------------

/// Contents of `<name>...</name>` tags in order. Throws ParseError when none.
std::vector<std::string> parse_name_tags(std::string_view response);

/// First standalone A-D in the response ("B", "B.", "(B)", "Answer: B", ...).
/// A leading article "A" before a lowercase word is not an answer. Throws
/// NullAnswer when no letter is found.
char parse_answer_letter(std::string_view response);

/// Comma-separated integers, optionally bracketed or after a "label:" prefix.
/// Throws ParseError on a non-integer item or wrong arity.
std::vector<int> parse_int_list(std::string_view response, std::size_t expected);

// ---- scoring ---------------------------------------------------------------------

bool names_match(std::string_view predicted, std::string_view gold);

/// Rank mode: 1 when the ranks put original=1, paraphrase=2, random=3.
/// Score mode: 1 when the criterion holds and no two scores tie.
/// Throws ParseError for a 0-10 value out of range.
double familiarity_score(const std::vector<Category>& gold, const std::vector<int>& values,
                         RankScale scale, ScoreCriterion criterion);

// ---- prompts ---------------------------------------------------------------------

std::string ncq_prompt(const MaskedChunk& m, const PromptTemplates& t);
std::string decop_prompt(const McqInstance& q, Source source, const PromptTemplates& t);
std::string probing_prompt(const ProbeInstance& p, bool framed, const PromptTemplates& t);
std::string familiarity_prompt(const RankingInstance& r, const PromptTemplates& t);

// ---- runners ---------------------------------------------------------------------

struct AttackContext {
    Gateway* gateway = nullptr;
    const PromptTemplates* templates = nullptr;
    std::string model_id;
    ParameterProfile params;
    std::optional<std::string> system_prompt;
    Source source = Source::arxiv;
    std::string dataset;
};

/// Each runner records gateway and parse failures in `error` instead of
/// throwing.
AttackOutcome run_ncq(const Chunk& chunk, const MaskedChunk& masked, const AttackContext& ctx);
AttackOutcome run_decop(const Chunk& chunk, const McqInstance& mcq, const AttackContext& ctx);
AttackOutcome run_probing(const Chunk& chunk, const ProbeInstance& probe, const AttackContext& ctx,
                          std::size_t threshold_tokens = kDefaultProbeThreshold, bool framed = true);
AttackOutcome run_familiarity(const Chunk& chunk, const RankingInstance& inst, const AttackContext& ctx,
                              ScoreCriterion criterion = ScoreCriterion::separation);

struct RunOptions {
    std::uint64_t seed = 0;
    /// Required for decop and familiarity.
    const ParaphraseStore* paraphrases = nullptr;
    /// Worker threads issuing requests; the gateway bounds what is in flight.
    int workers = 4;
    /// Receives one audit record per chunk (instance or build error), in order.
    std::vector<nlohmann::json>* instances = nullptr;
};

/// One outcome per chunk, in dataset order. Per-chunk failures, including
/// instance construction errors, are recorded inline.
std::vector<AttackOutcome> run_method_over_dataset(const Dataset& dataset, Method method,
                                                   const Variant& variant, const AttackContext& ctx,
                                                   const RunOptions& options);

}  // namespace mia
