#include "mia/perturb.hpp"

#include <algorithm>
#include <fstream>

#include "mia/errors.hpp"
#include "mia/hash.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

namespace {

json params_json(const ParameterProfile& p) {
    return json{{"max_tokens", p.max_tokens},
                {"temperature", p.temperature},
                {"top_p", p.top_p},
                {"top_k", p.top_k ? json(*p.top_k) : json(nullptr)}};
}

ParameterProfile params_from_json(const json& j) {
    ParameterProfile p;
    p.max_tokens = j.at("max_tokens").get<int>();
    p.temperature = j.at("temperature").get<double>();
    p.top_p = j.at("top_p").get<double>();
    if (j.contains("top_k") && !j.at("top_k").is_null()) p.top_k = j.at("top_k").get<int>();
    return p;
}

char letter_at(std::size_t i) { return static_cast<char>('A' + i); }

}  // namespace

std::string params_hash(const ParameterProfile& p) { return sha256_hex(params_json(p).dump()); }

std::array<std::string, 3> parse_paraphrase_list(std::string_view response, std::string_view original) {
    auto open = response.find('[');
    auto close = response.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open)
        throw ParaphraseParseError("response holds no JSON list");
    auto j = json::parse(response.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ParaphraseParseError("response list is not valid JSON");
    if (j.size() != 3)
        throw ParaphraseParseError("expected 3 paraphrases, got " + std::to_string(j.size()));

    const auto orig = text::trim(original);
    std::array<std::string, 3> out;
    for (std::size_t i = 0; i < 3; ++i) {
        if (!j[i].is_string()) throw ParaphraseParseError("paraphrase list item is not a string");
        auto item = std::string(text::trim(j[i].get<std::string>()));
        if (item.empty()) throw ParaphraseParseError("empty paraphrase");
        if (item == orig) throw ParaphraseParseError("paraphrase repeats the original text");
        out[i] = std::move(item);
    }
    return out;
}

ParaphraseSet generate_paraphrases(const Chunk& chunk, Gateway& gateway, const std::string& model_id,
                                   const PromptTemplates& templates, const ParameterProfile& params) {
    auto prompt = fill_template(templates.get(TemplateId::paraphrase), {{"input", chunk.text}});
    auto request = CompletionRequest::make(model_id, params, std::move(prompt));

    InstanceMetadata meta;
    meta.chunk_id = chunk.chunk_id;
    meta.method = Method::paraphrase;
    meta.label = chunk.membership_label;
    meta.source_text = chunk.text;

    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        request.nonce = attempt;
        auto response = gateway.complete(request, meta);
        try {
            if (response.finish_reason == FinishReason::refusal)
                throw ParaphraseParseError("paraphrase request was refused");
            ParaphraseSet set;
            set.chunk_id = chunk.chunk_id;
            set.paraphrases = parse_paraphrase_list(response.text, chunk.text);
            set.generator_model = model_id;
            set.generation_params = params;
            return set;
        } catch (const ParaphraseParseError& e) {
            last_error = e.what();
        }
    }
    throw ParaphraseParseError(chunk.chunk_id + ": " + last_error + " (after retry)");
}

MaskedChunk mask_chunk(const Chunk& chunk, MaskMode mode, std::uint64_t seed) {
    MaskedChunk m;
    m.chunk_id = chunk.chunk_id;
    m.mode = mode;
    const auto& spans = chunk.proper_spans;
    if (spans.empty()) {
        m.masked_text = chunk.text;
        return m;
    }

    std::vector<std::size_t> chosen;
    if (mode == MaskMode::single) {
        Rng rng(derive_seed(seed, "mask", chunk.chunk_id));
        chosen.push_back(static_cast<std::size_t>(rng.below(spans.size())));
    } else {
        for (std::size_t i = 0; i < spans.size(); ++i) chosen.push_back(i);
    }

    std::size_t pos = 0;
    for (auto i : chosen) {
        const auto& s = spans[i];
        m.masked_text.append(chunk.text, pos, s.start - pos);
        m.masked_text += kMaskToken;
        m.gold_names.push_back(s.surface);
        pos = s.end;
    }
    m.masked_text.append(chunk.text, pos);
    return m;
}

McqInstance build_mcq(const Chunk& chunk, const ParaphraseSet& paraphrases, std::uint64_t seed) {
    if (paraphrases.chunk_id != chunk.chunk_id)
        throw FatalConfigError("paraphrase set " + paraphrases.chunk_id + " does not belong to " +
                               chunk.chunk_id);
    McqInstance q;
    q.chunk_id = chunk.chunk_id;
    q.document_name = chunk.title;
    q.shuffle_seed = derive_seed(seed, "mcq", chunk.chunk_id);

    std::vector<std::size_t> order = {0, 1, 2, 3};  // 0 is the original
    Rng rng(q.shuffle_seed);
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < 4; ++pos) {
        if (order[pos] == 0) {
            q.options[pos] = chunk.text;
            q.gold_letter = letter_at(pos);
        } else {
            q.options[pos] = paraphrases.paraphrases[order[pos] - 1];
        }
    }
    return q;
}

std::vector<Category> RankingInstance::gold() const {
    std::vector<Category> g;
    g.reserve(presented.size());
    for (const auto& p : presented) g.push_back(p.category);
    return g;
}

RankingInstance build_ranking(const Chunk& chunk, const ParaphraseSet& paraphrases,
                              std::span<const Chunk> pool, int set_size, RankScale scale,
                              std::uint64_t seed) {
    if (set_size != 3 && set_size != 5)
        throw FatalConfigError("ranking set size must be 3 or 5, got " + std::to_string(set_size));
    if (scale == RankScale::rank_1_to_3 && set_size != 3)
        throw FatalConfigError("rank scale 1-3 requires set size 3");
    if (paraphrases.chunk_id != chunk.chunk_id)
        throw FatalConfigError("paraphrase set " + paraphrases.chunk_id + " does not belong to " +
                               chunk.chunk_id);

    const std::size_t extra = set_size == 3 ? 1 : 2;  // paraphrases, and also randoms

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].doc_id != chunk.doc_id && pool[i].text != chunk.text) eligible.push_back(i);
    if (eligible.size() < extra)
        throw PoolExhausted("random pool has " + std::to_string(eligible.size()) +
                            " chunks from other documents, need " + std::to_string(extra));

    RankingInstance r;
    r.chunk_id = chunk.chunk_id;
    r.title = chunk.title;
    r.scale = scale;
    r.set_size = set_size;
    r.shuffle_seed = derive_seed(seed, "ranking", chunk.chunk_id);
    Rng rng(r.shuffle_seed);

    r.presented.push_back({chunk.text, Category::original});

    std::vector<std::size_t> para = {0, 1, 2};
    rng.shuffle(para);
    for (std::size_t k = 0; k < extra; ++k)
        r.presented.push_back({paraphrases.paraphrases[para[k]], Category::paraphrase});

    // partial Fisher-Yates: first `extra` slots become the sample
    for (std::size_t k = 0; k < extra; ++k) {
        auto j = k + static_cast<std::size_t>(rng.below(eligible.size() - k));
        std::swap(eligible[k], eligible[j]);
        r.presented.push_back({pool[eligible[k]].text, Category::random});
    }

    rng.shuffle(r.presented);
    return r;
}

ProbeInstance split_prefix_suffix(const Chunk& chunk) {
    auto tokens = text::tokenize(chunk.text);
    if (tokens.size() < kMinProbeTokens)
        throw ChunkTooShort(chunk.chunk_id + " has " + std::to_string(tokens.size()) +
                            " tokens, need " + std::to_string(kMinProbeTokens));
    const auto mid = tokens.size() / 2;
    ProbeInstance p;
    p.chunk_id = chunk.chunk_id;
    p.title = chunk.title;
    p.prefix = text::join({tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(mid)}, " ");
    p.gold_suffix = text::join({tokens.begin() + static_cast<std::ptrdiff_t>(mid), tokens.end()}, " ");
    p.prefix_tokens = mid;
    p.suffix_tokens = tokens.size() - mid;
    return p;
}

// ---- audit records -------------------------------------------------------------

json to_json(const MaskedChunk& m) {
    return json{{"chunk_id", m.chunk_id},
                {"masked_text", m.masked_text},
                {"gold_names", m.gold_names},
                {"mode", to_string(m.mode)}};
}

json to_json(const McqInstance& m) {
    return json{{"chunk_id", m.chunk_id},
                {"document_name", m.document_name},
                {"options", m.options},
                {"gold_letter", std::string(1, m.gold_letter)},
                {"shuffle_seed", m.shuffle_seed}};
}

json to_json(const RankingInstance& r) {
    json presented = json::array();
    for (const auto& p : r.presented)
        presented.push_back({{"text", p.text}, {"category", to_string(p.category)}});
    return json{{"chunk_id", r.chunk_id},
                {"title", r.title},
                {"presented", presented},
                {"scale", to_string(r.scale)},
                {"set_size", r.set_size},
                {"shuffle_seed", r.shuffle_seed}};
}

json to_json(const ProbeInstance& p) {
    return json{{"chunk_id", p.chunk_id},       {"title", p.title},
                {"prefix", p.prefix},           {"gold_suffix", p.gold_suffix},
                {"prefix_tokens", p.prefix_tokens}, {"suffix_tokens", p.suffix_tokens}};
}

// ---- paraphrase cache --------------------------------------------------------------

std::string paraphrase_to_json_line(const ParaphraseSet& p) {
    return json{{"chunk_id", p.chunk_id},
                {"paraphrases", p.paraphrases},
                {"generator_model", p.generator_model},
                {"params", params_json(p.generation_params)},
                {"params_hash", params_hash(p.generation_params)}}
        .dump();
}

ParaphraseSet paraphrase_from_json_line(std::string_view line) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("paraphrase record is not a JSON object");
    try {
        ParaphraseSet p;
        p.chunk_id = j.at("chunk_id").get<std::string>();
        const auto& list = j.at("paraphrases");
        if (!list.is_array() || list.size() != 3)
            throw ParseError("paraphrase record for " + p.chunk_id + " needs 3 items");
        for (std::size_t i = 0; i < 3; ++i) p.paraphrases[i] = list[i].get<std::string>();
        p.generator_model = j.at("generator_model").get<std::string>();
        p.generation_params = params_from_json(j.at("params"));
        return p;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed paraphrase record: ") + e.what());
    }
}

ParaphraseStore::ParaphraseStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        try {
            auto p = paraphrase_from_json_line(line);
            sets_.insert_or_assign(p.chunk_id, std::move(p));
        } catch (const ParseError&) {
            continue;  // torn tail of an interrupted append
        }
    }
}

bool ParaphraseStore::contains(const std::string& chunk_id) const { return sets_.contains(chunk_id); }

const ParaphraseSet* ParaphraseStore::find(const std::string& chunk_id) const {
    auto it = sets_.find(chunk_id);
    return it == sets_.end() ? nullptr : &it->second;
}

void ParaphraseStore::append(const ParaphraseSet& p) {
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    bool torn = false;
    if (std::filesystem::is_regular_file(path_) && std::filesystem::file_size(path_) > 0) {
        std::ifstream tail(path_, std::ios::binary);
        tail.seekg(-1, std::ios::end);
        torn = tail.get() != '\n';
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to paraphrase cache '" + path_.string() + "'");
    if (torn) out << '\n';
    out << paraphrase_to_json_line(p) << '\n';
    out.flush();
    if (!out) throw IoError("paraphrase cache append failed for '" + path_.string() + "'");
    sets_.insert_or_assign(p.chunk_id, p);
}

}  // namespace mia
