#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mia/corpus.hpp"
#include "mia/gateway.hpp"
#include "mia/method.hpp"
#include "mia/templates.hpp"

namespace mia {

inline constexpr std::string_view kMaskToken = "[MASK]";

struct ParaphraseSet {
    std::string chunk_id;
    std::array<std::string, 3> paraphrases;
    std::string generator_model;
    ParameterProfile generation_params;
};

/// Hash of the sampling parameters, stored with each cached paraphrase set.
std::string params_hash(const ParameterProfile& p);

/// Extracts a JSON list of exactly three non-empty strings that differ from
/// `original`. Tolerates surrounding prose and code fences. Throws
/// ParaphraseParseError otherwise.
std::array<std::string, 3> parse_paraphrase_list(std::string_view response, std::string_view original);

/// One request, one retry on an unparseable answer, then ParaphraseParseError.
ParaphraseSet generate_paraphrases(const Chunk& chunk, Gateway& gateway, const std::string& model_id,
                                   const PromptTemplates& templates,
                                   const ParameterProfile& params = ParameterProfile::paraphrase());

struct MaskedChunk {
    std::string chunk_id;
    std::string masked_text;
    std::vector<std::string> gold_names;
    MaskMode mode = MaskMode::single;
};

/// Precondition: chunk.proper_spans is non-empty.
MaskedChunk mask_chunk(const Chunk& chunk, MaskMode mode, std::uint64_t seed);

struct McqInstance {
    std::string chunk_id;
    std::string document_name;
    std::array<std::string, 4> options;
    char gold_letter = 'A';
    std::uint64_t shuffle_seed = 0;
};

McqInstance build_mcq(const Chunk& chunk, const ParaphraseSet& paraphrases, std::uint64_t seed);

struct RankedText {
    std::string text;
    Category category = Category::original;
};

struct RankingInstance {
    std::string chunk_id;
    std::string title;
    std::vector<RankedText> presented;
    RankScale scale = RankScale::rank_1_to_3;
    int set_size = 3;
    std::uint64_t shuffle_seed = 0;

    std::vector<Category> gold() const;
};

/// Random texts come from `pool` chunks of other documents, drawn without
/// replacement. Throws PoolExhausted when too few qualify, FatalConfigError
/// for a set size other than 3 or 5, or rank scale with set size 5.
RankingInstance build_ranking(const Chunk& chunk, const ParaphraseSet& paraphrases,
                              std::span<const Chunk> pool, int set_size, RankScale scale,
                              std::uint64_t seed);

struct ProbeInstance {
    std::string chunk_id;
    std::string title;
    std::string prefix;
    std::string gold_suffix;
    std::size_t prefix_tokens = 0;
    std::size_t suffix_tokens = 0;
};

inline constexpr std::size_t kMinProbeTokens = 10;

/// Splits at floor(n / 2) whitespace tokens. Throws ChunkTooShort below
/// kMinProbeTokens.
ProbeInstance split_prefix_suffix(const Chunk& chunk);

// ---- audit records -------------------------------------------------------------

nlohmann::json to_json(const MaskedChunk& m);
nlohmann::json to_json(const McqInstance& m);
nlohmann::json to_json(const RankingInstance& r);
nlohmann::json to_json(const ProbeInstance& p);

// ---- paraphrase cache --------------------------------------------------------------

std::string paraphrase_to_json_line(const ParaphraseSet& p);
ParaphraseSet paraphrase_from_json_line(std::string_view line);

/// Line-delimited paraphrase sets keyed by chunk id. Appends are flushed so
/// an interrupted preprocessing pass keeps what it finished. Appends are
/// serialized with each other but not with lookups.
class ParaphraseStore {
public:
    /// Loads `path` if it exists; torn trailing lines are ignored.
    explicit ParaphraseStore(std::filesystem::path path);

    bool contains(const std::string& chunk_id) const;
    const ParaphraseSet* find(const std::string& chunk_id) const;
    void append(const ParaphraseSet& p);
    std::size_t size() const { return sets_.size(); }
    const std::map<std::string, ParaphraseSet>& sets() const { return sets_; }

private:
    std::filesystem::path path_;
    std::map<std::string, ParaphraseSet> sets_;
    std::mutex mutex_;
};

}  // namespace mia
