#include "mia/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <exception>

#include <omp.h>

#include "mia/errors.hpp"
#include "mia/lcs.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

// ---- variants --------------------------------------------------------------------

std::string Variant::tag(Method m) const {
    switch (m) {
        case Method::ncq: return "mask=" + std::string(to_string(mask_mode));
        case Method::decop: return "options=4";
        case Method::probing:
            return "threshold=" + std::to_string(threshold_tokens) +
                   ",frame=" + (probing_framed ? "capability" : "none");
        case Method::familiarity: {
            auto t = "scale=" + std::string(to_string(scale)) + ",set=" + std::to_string(set_size);
            if (scale == RankScale::score_0_to_10) t += ",criterion=" + std::string(to_string(criterion));
            return t;
        }
        case Method::paraphrase: return "";
    }
    return "";
}

Variant Variant::parse(Method m, std::string_view tag) {
    Variant v;
    std::size_t pos = 0;
    while (pos < tag.size()) {
        auto end = tag.find(',', pos);
        if (end == std::string_view::npos) end = tag.size();
        auto item = tag.substr(pos, end - pos);
        pos = end + 1;
        auto eq = item.find('=');
        if (eq == std::string_view::npos) throw FatalConfigError("malformed variant '" + std::string(tag) + "'");
        auto key = item.substr(0, eq);
        auto value = item.substr(eq + 1);
        auto number = [&] {
            long long n = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
            if (ec != std::errc{} || p != value.data() + value.size() || n < 0)
                throw FatalConfigError("bad number in variant '" + std::string(tag) + "'");
            return n;
        };
        if (key == "mask") v.mask_mode = parse_mask_mode(value);
        else if (key == "threshold") v.threshold_tokens = static_cast<std::size_t>(number());
        else if (key == "frame") v.probing_framed = value != "none";
        else if (key == "scale") v.scale = parse_rank_scale(value);
        else if (key == "set") v.set_size = static_cast<int>(number());
        else if (key == "criterion") v.criterion = parse_score_criterion(value);
        else if (key == "options") continue;
        else throw FatalConfigError("unknown variant key '" + std::string(key) + "'");
    }
    (void)m;
    return v;
}

bool variant_predicts(Method m, const Variant& v) {
    switch (m) {
        case Method::ncq: return v.mask_mode == MaskMode::single;
        case Method::decop:
        case Method::probing: return true;
        case Method::familiarity: return v.scale == RankScale::rank_1_to_3;
        case Method::paraphrase: return false;
    }
    return false;
}

// ---- parsers ---------------------------------------------------------------------

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }

std::string preceding_word(std::string_view s, std::size_t i) {
    std::size_t end = i;
    while (end > 0 && s[end - 1] == ' ') --end;
    std::size_t begin = end;
    while (begin > 0 && std::isalpha(static_cast<unsigned char>(s[begin - 1]))) --begin;
    return text::to_lower_ascii(s.substr(begin, end - begin));
}

}  // namespace

std::vector<std::string> parse_name_tags(std::string_view response) {
    static constexpr std::string_view open = "<name>";
    static constexpr std::string_view close = "</name>";
    const auto lower = text::to_lower_ascii(response);
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (true) {
        auto a = lower.find(open, pos);
        if (a == std::string::npos) break;
        auto start = a + open.size();
        auto b = lower.find(close, start);
        if (b == std::string::npos) break;
        names.emplace_back(text::trim(response.substr(start, b - start)));
        pos = b + close.size();
    }
    if (names.empty()) throw ParseError("no <name> tags in response");
    return names;
}

char parse_answer_letter(std::string_view r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
        const char c = r[i];
        if (c < 'A' || c > 'D') continue;
        if (i > 0 && is_alnum(r[i - 1])) continue;
        if (i + 1 < r.size() && is_alnum(r[i + 1])) continue;
        if (c == 'A' && i + 2 < r.size() && r[i + 1] == ' ' && is_lower(r[i + 2])) {
            // "A passage ..." reads as an article unless an answer cue precedes it
            std::size_t k = i;
            while (k > 0 && r[k - 1] == ' ') --k;
            const bool cue = k > 0 && (r[k - 1] == ':' || r[k - 1] == '(');
            const auto word = preceding_word(r, i);
            if (!cue && word != "is" && word != "answer" && word != "option" && word != "choice")
                continue;
        }
        return c;
    }
    throw NullAnswer("no answer letter in response");
}

std::vector<int> parse_int_list(std::string_view response, std::size_t expected) {
    std::string_view line;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto end = response.find('\n', pos);
        if (end == std::string_view::npos) end = response.size();
        auto candidate = response.substr(pos, end - pos);
        if (std::any_of(candidate.begin(), candidate.end(),
                        [](char c) { return c >= '0' && c <= '9'; })) {
            line = candidate;
            break;
        }
        pos = end + 1;
    }
    if (line.empty()) throw ParseError("no integer list in response");
    if (auto colon = line.rfind(':'); colon != std::string_view::npos) line = line.substr(colon + 1);

    std::string cleaned;
    for (char c : line)
        if (c != '[' && c != ']' && c != '(' && c != ')' && c != '*') cleaned.push_back(c);

    std::vector<std::string> items;
    if (cleaned.find(',') != std::string::npos) {
        std::size_t p = 0;
        while (p <= cleaned.size()) {
            auto e = cleaned.find(',', p);
            if (e == std::string::npos) e = cleaned.size();
            items.emplace_back(text::trim(std::string_view(cleaned).substr(p, e - p)));
            p = e + 1;
        }
    } else {
        items = text::tokenize(cleaned);
    }

    std::vector<int> out;
    for (auto item : items) {
        if (!item.empty() && item.back() == '.') item.pop_back();
        int v = 0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc{} || p != item.data() + item.size())
            throw ParseError("non-integer item '" + item + "' in list");
        out.push_back(v);
    }
    if (out.size() != expected)
        throw ParseError("expected " + std::to_string(expected) + " integers, got " +
                         std::to_string(out.size()));
    return out;
}

// ---- scoring ---------------------------------------------------------------------

bool names_match(std::string_view predicted, std::string_view gold) {
    return text::iequals_ascii(text::trim(predicted), text::trim(gold));
}

double familiarity_score(const std::vector<Category>& gold, const std::vector<int>& values,
                         RankScale scale, ScoreCriterion criterion) {
    if (gold.size() != values.size())
        throw ParseError("expected " + std::to_string(gold.size()) + " values, got " +
                         std::to_string(values.size()));
    if (scale == RankScale::rank_1_to_3) {
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const int want = gold[i] == Category::original ? 1 : gold[i] == Category::paraphrase ? 2 : 3;
            if (values[i] != want) return 0.0;
        }
        return 1.0;
    }

    for (int v : values)
        if (v < 0 || v > 10) throw ParseError("score " + std::to_string(v) + " outside 0-10");
    auto sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return 0.0;

    int original = -1;
    int para_min = 11, para_max = -1, rand_max = -1;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        switch (gold[i]) {
            case Category::original: original = values[i]; break;
            case Category::paraphrase:
                para_min = std::min(para_min, values[i]);
                para_max = std::max(para_max, values[i]);
                break;
            case Category::random: rand_max = std::max(rand_max, values[i]); break;
        }
    }
    bool ok = original > rand_max && para_min > rand_max;
    if (criterion == ScoreCriterion::strict) ok = ok && original > para_max;
    return ok ? 1.0 : 0.0;
}

// ---- prompts ---------------------------------------------------------------------

std::string ncq_prompt(const MaskedChunk& m, const PromptTemplates& t) {
    auto id = m.mode == MaskMode::single ? TemplateId::ncq_single : TemplateId::ncq_all;
    return fill_template(t.get(id), {{"input", "\"" + m.masked_text + "\""}});
}

std::string decop_prompt(const McqInstance& q, Source source, const PromptTemplates& t) {
    auto id = source == Source::arxiv ? TemplateId::decop_arxiv : TemplateId::decop_wikipedia;
    auto prompt = fill_template(t.get(id), {{"document_name", q.document_name}});
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        prompt += '\n';
        prompt += static_cast<char>('A' + i);
        prompt += ". ";
        prompt += q.options[i];
    }
    return prompt;
}

std::string probing_prompt(const ProbeInstance& p, bool framed, const PromptTemplates& t) {
    auto id = framed ? TemplateId::probing : TemplateId::probing_unframed;
    return fill_template(t.get(id), {{"title", p.title}, {"prefix", p.prefix}});
}

std::string familiarity_prompt(const RankingInstance& r, const PromptTemplates& t) {
    TemplateId id = TemplateId::fr_rank_3;
    if (r.scale == RankScale::score_0_to_10)
        id = r.set_size == 5 ? TemplateId::fr_score_5 : TemplateId::fr_score_3;
    std::string chunks;
    for (std::size_t i = 0; i < r.presented.size(); ++i) {
        if (i) chunks += '\n';
        chunks += std::to_string(i + 1) + ". " + r.presented[i].text;
    }
    return fill_template(t.get(id), {{"title", r.title}, {"chunks", chunks}});
}

// ---- runners ---------------------------------------------------------------------

namespace {

AttackOutcome start(const Chunk& chunk, Method method, std::string variant, const AttackContext& ctx) {
    AttackOutcome o;
    o.chunk_id = chunk.chunk_id;
    o.method = method;
    o.variant = std::move(variant);
    o.model_id = ctx.model_id;
    o.dataset = ctx.dataset;
    o.membership_label = chunk.membership_label;
    return o;
}

InstanceMetadata metadata(const Chunk& chunk, Method method) {
    InstanceMetadata m;
    m.chunk_id = chunk.chunk_id;
    m.method = method;
    m.label = chunk.membership_label;
    return m;
}

void record_error(AttackOutcome& o, const std::exception& e) {
    auto* err = dynamic_cast<const Error*>(&e);
    o.error = err ? err->kind() : std::string("Error");
    o.predicted_member.reset();
    o.score = 0.0;
}

/// Sends the prompt; on a gateway failure records the error and returns false.
bool ask(AttackOutcome& o, const std::string& prompt, const InstanceMetadata& meta,
         const AttackContext& ctx, CompletionResponse& response) {
    auto request = CompletionRequest::make(ctx.model_id, ctx.params, prompt, ctx.system_prompt);
    try {
        response = ctx.gateway->complete(request, meta);
    } catch (const std::exception& e) {
        o.finish_reason = to_string(FinishReason::error);
        record_error(o, e);
        return false;
    }
    o.raw_response = response.text;
    o.finish_reason = to_string(response.finish_reason);
    return true;
}

}  // namespace

AttackOutcome run_ncq(const Chunk& chunk, const MaskedChunk& masked, const AttackContext& ctx) {
    Variant v;
    v.mask_mode = masked.mode;
    auto o = start(chunk, Method::ncq, v.tag(Method::ncq), ctx);
    o.gold = json{{"names", masked.gold_names}};

    auto meta = metadata(chunk, Method::ncq);
    meta.gold_names = masked.gold_names;
    CompletionResponse r;
    if (!ask(o, ncq_prompt(masked, *ctx.templates), meta, ctx, r)) return o;

    try {
        auto names = parse_name_tags(r.text);
        o.parsed = names;
        if (masked.mode == MaskMode::single) {
            const bool hit = !masked.gold_names.empty() && names_match(names.front(), masked.gold_names.front());
            o.predicted_member = hit;
            o.score = hit ? 1.0 : 0.0;
        } else {
            std::size_t matches = 0;
            const auto n = std::min(names.size(), masked.gold_names.size());
            for (std::size_t i = 0; i < n; ++i)
                if (names_match(names[i], masked.gold_names[i])) ++matches;
            o.score = masked.gold_names.empty()
                          ? 0.0
                          : static_cast<double>(matches) / static_cast<double>(masked.gold_names.size());
        }
    } catch (const ParseError& e) {
        record_error(o, e);
    }
    return o;
}

AttackOutcome run_decop(const Chunk& chunk, const McqInstance& mcq, const AttackContext& ctx) {
    auto o = start(chunk, Method::decop, Variant{}.tag(Method::decop), ctx);
    o.gold = json{{"letter", std::string(1, mcq.gold_letter)}};

    auto meta = metadata(chunk, Method::decop);
    meta.gold_letter = mcq.gold_letter;
    CompletionResponse r;
    if (!ask(o, decop_prompt(mcq, ctx.source, *ctx.templates), meta, ctx, r)) return o;

    try {
        const char letter = parse_answer_letter(r.text);
        o.parsed = std::string(1, letter);
        o.predicted_member = letter == mcq.gold_letter;
        o.score = *o.predicted_member ? 1.0 : 0.0;
    } catch (const ParseError& e) {
        record_error(o, e);
    }
    return o;
}

AttackOutcome run_probing(const Chunk& chunk, const ProbeInstance& probe, const AttackContext& ctx,
                          std::size_t threshold_tokens, bool framed) {
    if (threshold_tokens < 1) throw FatalConfigError("probing threshold must be at least 1 token");
    Variant v;
    v.threshold_tokens = threshold_tokens;
    v.probing_framed = framed;
    auto o = start(chunk, Method::probing, v.tag(Method::probing), ctx);
    o.gold = json{{"suffix", probe.gold_suffix}};
    o.reference_tokens = text::normalized_tokens(probe.gold_suffix).size();

    auto meta = metadata(chunk, Method::probing);
    meta.gold_suffix = probe.gold_suffix;
    CompletionResponse r;
    if (!ask(o, probing_prompt(probe, framed, *ctx.templates), meta, ctx, r)) return o;

    const std::size_t lcs = r.finish_reason == FinishReason::refusal ? 0 : text_lcs(r.text, probe.gold_suffix);
    o.parsed = lcs;
    o.score = static_cast<double>(lcs);
    o.predicted_member = lcs >= threshold_tokens;
    return o;
}

AttackOutcome run_familiarity(const Chunk& chunk, const RankingInstance& inst, const AttackContext& ctx,
                              ScoreCriterion criterion) {
    Variant v;
    v.scale = inst.scale;
    v.set_size = inst.set_size;
    v.criterion = criterion;
    auto o = start(chunk, Method::familiarity, v.tag(Method::familiarity), ctx);
    const auto gold = inst.gold();
    json cats = json::array();
    for (auto c : gold) cats.push_back(to_string(c));
    o.gold = json{{"categories", cats}};

    auto meta = metadata(chunk, Method::familiarity);
    meta.gold_categories = gold;
    meta.scale = inst.scale;
    CompletionResponse r;
    if (!ask(o, familiarity_prompt(inst, *ctx.templates), meta, ctx, r)) return o;

    try {
        auto values = parse_int_list(r.text, static_cast<std::size_t>(inst.set_size));
        o.parsed = values;
        o.score = familiarity_score(gold, values, inst.scale, criterion);
        if (inst.scale == RankScale::rank_1_to_3) o.predicted_member = o.score == 1.0;
    } catch (const ParseError& e) {
        record_error(o, e);
    }
    return o;
}

std::vector<AttackOutcome> run_method_over_dataset(const Dataset& dataset, Method method,
                                                   const Variant& variant, const AttackContext& ctx,
                                                   const RunOptions& options) {
    if (method == Method::paraphrase) throw FatalConfigError("paraphrase is not an attack method");
    if (!ctx.gateway || !ctx.templates) throw FatalConfigError("attack context lacks gateway or templates");
    const bool needs_paraphrases = method == Method::decop || method == Method::familiarity;
    if (needs_paraphrases && !options.paraphrases)
        throw FatalConfigError(std::string(to_string(method)) + " requires a paraphrase cache");
    if (method == Method::probing && variant.threshold_tokens < 1)
        throw FatalConfigError("probing threshold must be at least 1 token");
    if (method == Method::familiarity) {
        if (variant.set_size != 3 && variant.set_size != 5)
            throw FatalConfigError("familiarity set size must be 3 or 5");
        if (variant.scale == RankScale::rank_1_to_3 && variant.set_size != 3)
            throw FatalConfigError("rank scale 1-3 requires set size 3");
    }

    const auto& chunks = dataset.chunks;
    const auto n = static_cast<std::ptrdiff_t>(chunks.size());
    std::vector<AttackOutcome> outcomes(chunks.size());
    std::vector<json> records(chunks.size());
    std::vector<std::exception_ptr> fatal(chunks.size());
    const std::string tag = variant.tag(method);

#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, options.workers))
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto& chunk = chunks[static_cast<std::size_t>(i)];
        auto& out = outcomes[static_cast<std::size_t>(i)];
        auto& rec = records[static_cast<std::size_t>(i)];
        try {
            const ParaphraseSet* para = nullptr;
            if (needs_paraphrases) {
                para = options.paraphrases->find(chunk.chunk_id);
                if (!para) {
                    out = start(chunk, method, tag, ctx);
                    out.error = "MissingParaphrases";
                    rec = json{{"chunk_id", chunk.chunk_id}, {"error", "MissingParaphrases"}};
                    continue;
                }
            }
            switch (method) {
                case Method::ncq: {
                    auto m = mask_chunk(chunk, variant.mask_mode, options.seed);
                    rec = to_json(m);
                    out = run_ncq(chunk, m, ctx);
                    break;
                }
                case Method::decop: {
                    auto q = build_mcq(chunk, *para, options.seed);
                    rec = to_json(q);
                    out = run_decop(chunk, q, ctx);
                    break;
                }
                case Method::probing: {
                    auto p = split_prefix_suffix(chunk);
                    rec = to_json(p);
                    out = run_probing(chunk, p, ctx, variant.threshold_tokens, variant.probing_framed);
                    break;
                }
                case Method::familiarity: {
                    auto r = build_ranking(chunk, *para, chunks, variant.set_size, variant.scale,
                                           options.seed);
                    rec = to_json(r);
                    out = run_familiarity(chunk, r, ctx, variant.criterion);
                    break;
                }
                case Method::paraphrase: break;
            }
        } catch (const FatalConfigError&) {
            fatal[static_cast<std::size_t>(i)] = std::current_exception();
        } catch (const std::exception& e) {
            out = start(chunk, method, tag, ctx);
            record_error(out, e);
            rec = json{{"chunk_id", chunk.chunk_id}, {"error", *out.error}};
        }
    }

    for (const auto& f : fatal)
        if (f) std::rethrow_exception(f);
    if (options.instances) *options.instances = std::move(records);
    return outcomes;
}

}  // namespace mia
