// Scripted stand-in model used for offline runs and tests.

#include <algorithm>
#include <array>

#include <json.hpp>

#include "mia/gateway.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia {

namespace {

constexpr std::array<std::string_view, 8> kDecoyNames = {
    "Smith", "Garcia", "Nakamura", "Okafor", "Ivanova", "Lindqvist", "Moreau", "Castellano"};

std::string wrong_name(Rng& rng, const std::string& gold) {
    auto start = rng.below(kDecoyNames.size());
    for (std::size_t k = 0; k < kDecoyNames.size(); ++k) {
        auto cand = kDecoyNames[(start + k) % kDecoyNames.size()];
        if (!text::iequals_ascii(cand, gold)) return std::string(cand);
    }
    return "Nobody";
}

std::string answer_ncq(Rng& rng, bool correct, const InstanceMetadata& m) {
    std::string out;
    for (const auto& g : m.gold_names) {
        if (!out.empty()) out += ' ';
        out += "<name>" + (correct ? g : wrong_name(rng, g)) + "</name>";
    }
    return out;
}

std::string answer_decop(Rng& rng, bool correct, const InstanceMetadata& m) {
    char letter = m.gold_letter;
    if (!correct) {
        std::string others;
        for (char c : std::string("ABCD"))
            if (c != m.gold_letter) others.push_back(c);
        letter = others[rng.below(others.size())];
    }
    static constexpr std::array<std::string_view, 4> formats = {"{}", "{}.", "({})", "Answer: {}"};
    auto fmt = std::string(formats[rng.below(formats.size())]);
    return text::replace_all(fmt, "{}", std::string(1, letter));
}

std::string answer_probing(bool correct, const InstanceMetadata& m) {
    if (correct) return m.gold_suffix;
    auto tokens = text::tokenize(m.gold_suffix);
    tokens.resize(std::min<std::size_t>(tokens.size(), 3));
    tokens.push_back("and the remaining details of this passage are not recalled here.");
    return text::join(tokens, " ");
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string answer_familiarity(Rng& rng, bool correct, const InstanceMetadata& m) {
    const auto& cats = m.gold_categories;
    std::vector<int> values(cats.size());
    if (m.scale == RankScale::rank_1_to_3) {
        // rank by category order, ties broken by position
        std::vector<std::size_t> order(cats.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cats[a] < cats[b]; });
        for (std::size_t r = 0; r < order.size(); ++r) values[order[r]] = static_cast<int>(r + 1);
        if (!correct && values.size() > 1) {
            auto gold = values;
            while (values == gold) rng.shuffle(values);
        }
        return join_ints(values);
    }
    int para_score = correct ? 8 : 2;
    int rand_score = correct ? 2 : 9;
    for (std::size_t i = 0; i < cats.size(); ++i) {
        switch (cats[i]) {
            case Category::original: values[i] = correct ? 10 : 3; break;
            case Category::paraphrase: values[i] = para_score--; break;
            case Category::random: values[i] = rand_score--; break;
        }
    }
    return join_ints(values);
}

std::string answer_paraphrase(Rng& rng, const InstanceMetadata& m) {
    auto words = text::tokenize(m.source_text);
    const auto original = text::join(words, " ");
    nlohmann::json list = nlohmann::json::array();
    for (int k = 0; k < 3; ++k) {
        auto w = words;
        rng.shuffle(w);
        auto candidate = text::join(w, " ");
        for (std::size_t r = 1; (candidate == original || candidate == m.source_text) && r < w.size(); ++r) {
            auto rotated = words;
            std::rotate(rotated.begin(), rotated.begin() + static_cast<std::ptrdiff_t>(r), rotated.end());
            candidate = text::join(rotated, " ");
        }
        list.push_back(candidate);
    }
    return list.dump();
}

}  // namespace

CompletionResponse oracle_complete(const CompletionRequest&, const OracleSpec& spec,
                                   const InstanceMetadata& meta) {
    Rng rng(derive_seed(spec.seed, meta.chunk_id, to_string(meta.method)));
    const double p = meta.label == MembershipLabel::member ? spec.p_member_correct
                                                            : spec.p_nonmember_correct;
    const bool correct = rng.bernoulli(p);

    CompletionResponse r;
    r.finish_reason = FinishReason::stop;
    switch (meta.method) {
        case Method::ncq: r.text = answer_ncq(rng, correct, meta); break;
        case Method::decop: r.text = answer_decop(rng, correct, meta); break;
        case Method::probing: r.text = answer_probing(correct, meta); break;
        case Method::familiarity: r.text = answer_familiarity(rng, correct, meta); break;
        case Method::paraphrase: r.text = answer_paraphrase(rng, meta); break;
    }
    return r;
}

}  // namespace mia
