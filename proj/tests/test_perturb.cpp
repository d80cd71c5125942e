#include <doctest.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mia/errors.hpp"
#include "mia/names.hpp"
#include "mia/perturb.hpp"
#include "mia/text.hpp"
#include "support/synth.hpp"

using namespace mia;

namespace {

Chunk make_chunk(std::string id, std::string doc, std::string text) {
    Chunk c;
    c.chunk_id = std::move(id);
    c.doc_id = std::move(doc);
    c.title = "A title";
    c.text = std::move(text);
    c.char_len = text::utf8_length(c.text);
    c.proper_spans = detect_proper_names(c.text);
    c.token_count = text::tokenize(c.text).size();
    return c;
}

ParaphraseSet paras_for(const Chunk& c) {
    ParaphraseSet p;
    p.chunk_id = c.chunk_id;
    p.paraphrases = {"first rewrite", "second rewrite", "third rewrite"};
    p.generator_model = "gen";
    p.generation_params = ParameterProfile::paraphrase();
    return p;
}

class Scripted final : public CompletionBackend {
public:
    explicit Scripted(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    CompletionResponse complete(const CompletionRequest& r, const InstanceMetadata&) override {
        nonces.push_back(r.nonce);
        CompletionResponse out;
        out.text = replies_.at(std::min(calls++, replies_.size() - 1));
        return out;
    }
    std::size_t calls = 0;
    std::vector<int> nonces;

private:
    std::vector<std::string> replies_;
};

}  // namespace

TEST_CASE("mask_chunk on the exemplar") {
    auto c = make_chunk("c", "d", "The collaboration between Einstein and Bohr changed physics.");
    REQUIRE(c.proper_spans.size() == 2);
    auto all = mask_chunk(c, MaskMode::all, 1);
    CHECK(all.masked_text == "The collaboration between [MASK] and [MASK] changed physics.");
    CHECK(all.gold_names == std::vector<std::string>{"Einstein", "Bohr"});

    auto one = mask_chunk(c, MaskMode::single, 1);
    REQUIRE(one.gold_names.size() == 1);
    const bool first = one.gold_names[0] == "Einstein";
    CHECK(one.masked_text == (first ? "The collaboration between [MASK] and Bohr changed physics."
                                    : "The collaboration between Einstein and [MASK] changed physics."));
}

TEST_CASE("mask_chunk invariants over synthetic chunks") {
    mia::Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        auto c = make_chunk("c" + std::to_string(i), "d", synth::paragraph(rng, 450));
        if (c.proper_spans.empty()) continue;
        for (auto mode : {MaskMode::single, MaskMode::all}) {
            auto m = mask_chunk(c, mode, 9);
            const std::size_t expected = mode == MaskMode::single ? 1 : c.proper_spans.size();
            CHECK(m.gold_names.size() == expected);
            std::size_t masks = 0;
            for (auto p = m.masked_text.find(kMaskToken); p != std::string::npos;
                 p = m.masked_text.find(kMaskToken, p + 1))
                ++masks;
            CHECK(masks == expected);
            // restoring the names in order gives back the original text
            std::string restored = m.masked_text;
            for (const auto& g : m.gold_names) restored.replace(restored.find(kMaskToken), kMaskToken.size(), g);
            CHECK(restored == c.text);
            CHECK(mask_chunk(c, mode, 9).masked_text == m.masked_text);
        }
    }
}

TEST_CASE("build_mcq places the original once among the paraphrases") {
    auto c = make_chunk("c1", "d1", "Original passage text by Smith.");
    auto q = build_mcq(c, paras_for(c), 3);
    const auto gold = static_cast<std::size_t>(q.gold_letter - 'A');
    REQUIRE(gold < 4);
    CHECK(q.options[gold] == c.text);
    std::multiset<std::string> opts(q.options.begin(), q.options.end());
    CHECK(opts == std::multiset<std::string>{c.text, "first rewrite", "second rewrite", "third rewrite"});
    CHECK(q.document_name == "A title");
    CHECK(build_mcq(c, paras_for(c), 3).gold_letter == q.gold_letter);

    auto other = paras_for(c);
    other.chunk_id = "elsewhere";
    CHECK_THROWS_AS(build_mcq(c, other, 3), FatalConfigError);
}

TEST_CASE("build_mcq gold position is uniform across chunks") {
    // Chi-square goodness of fit against uniform over 4 letters, 3 dof.
    std::array<int, 4> hist{};
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        auto c = make_chunk("chunk" + std::to_string(i), "d", "text");
        hist[static_cast<std::size_t>(build_mcq(c, paras_for(c), 17).gold_letter - 'A')]++;
    }
    double chi2 = 0;
    for (int h : hist) chi2 += (h - n / 4.0) * (h - n / 4.0) / (n / 4.0);
    MESSAGE("gold letter histogram " << hist[0] << " " << hist[1] << " " << hist[2] << " " << hist[3]);
    CHECK(chi2 < 16.27);  // p = 0.001
}

TEST_CASE("build_ranking composition") {
    std::vector<Chunk> pool;
    for (int i = 0; i < 6; ++i)
        pool.push_back(make_chunk("p" + std::to_string(i), "doc" + std::to_string(i), "pool text " + std::to_string(i)));
    auto c = make_chunk("self", "doc0", "the chunk itself");
    pool.push_back(c);

    auto r3 = build_ranking(c, paras_for(c), pool, 3, RankScale::rank_1_to_3, 1);
    REQUIRE(r3.presented.size() == 3);
    std::map<Category, int> cats;
    for (const auto& p : r3.presented) {
        cats[p.category]++;
        if (p.category == Category::random) {
            CHECK(p.text != c.text);
            CHECK(p.text != "pool text 0");  // same document as the chunk
        }
    }
    CHECK(cats[Category::original] == 1);
    CHECK(cats[Category::paraphrase] == 1);
    CHECK(cats[Category::random] == 1);

    auto r5 = build_ranking(c, paras_for(c), pool, 5, RankScale::score_0_to_10, 1);
    REQUIRE(r5.presented.size() == 5);
    std::set<std::string> texts;
    for (const auto& p : r5.presented) texts.insert(p.text);
    CHECK(texts.size() == 5);  // randoms drawn without replacement
    CHECK(r5.gold().size() == 5);

    CHECK_THROWS_AS(build_ranking(c, paras_for(c), pool, 5, RankScale::rank_1_to_3, 1), FatalConfigError);
    CHECK_THROWS_AS(build_ranking(c, paras_for(c), pool, 4, RankScale::score_0_to_10, 1), FatalConfigError);
    std::vector<Chunk> tiny{pool[1], c};
    CHECK_THROWS_AS(build_ranking(c, paras_for(c), tiny, 5, RankScale::score_0_to_10, 1), PoolExhausted);
}

TEST_CASE("split_prefix_suffix") {
    auto c = make_chunk("c", "d", "one two three four five six seven eight nine ten eleven");
    auto p = split_prefix_suffix(c);
    CHECK(p.prefix == "one two three four five");
    CHECK(p.gold_suffix == "six seven eight nine ten eleven");
    CHECK(p.prefix_tokens == 5);
    CHECK(p.suffix_tokens == 6);
    CHECK_THROWS_AS(split_prefix_suffix(make_chunk("s", "d", "too short to probe")), ChunkTooShort);

    mia::Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        auto long_chunk = make_chunk("l", "d", synth::paragraph(rng, 400));
        auto s = split_prefix_suffix(long_chunk);
        CHECK(s.prefix + " " + s.gold_suffix == text::join(text::tokenize(long_chunk.text), " "));
        CHECK(s.prefix_tokens == long_chunk.token_count / 2);
    }
}

TEST_CASE("parse_paraphrase_list") {
    CHECK(parse_paraphrase_list(R"(["a", "b", "c"])", "orig") == std::array<std::string, 3>{"a", "b", "c"});
    CHECK(parse_paraphrase_list("Sure:\n```json\n[\"a\", \" b \", \"c\"]\n```", "orig")[1] == "b");
    CHECK_THROWS_AS(parse_paraphrase_list("no list here", "o"), ParaphraseParseError);
    CHECK_THROWS_AS(parse_paraphrase_list(R"(["a", "b"])", "o"), ParaphraseParseError);
    CHECK_THROWS_AS(parse_paraphrase_list(R"(["a", "", "c"])", "o"), ParaphraseParseError);
    CHECK_THROWS_AS(parse_paraphrase_list(R"(["a", "o", "c"])", "o"), ParaphraseParseError);
    CHECK_THROWS_AS(parse_paraphrase_list(R"(["a", 2, "c"])", "o"), ParaphraseParseError);
}

TEST_CASE("generate_paraphrases retries once with a fresh nonce") {
    auto c = make_chunk("c", "d", "original");
    auto tpl = PromptTemplates::defaults();

    auto ok = std::make_shared<Scripted>(std::vector<std::string>{"garbage", R"(["x", "y", "z"])"});
    Gateway g1(ok, nullptr);
    auto set = generate_paraphrases(c, g1, "gen", tpl);
    CHECK(set.paraphrases[2] == "z");
    CHECK(ok->nonces == std::vector<int>{0, 1});
    CHECK(set.generation_params.max_tokens == 600);

    auto bad = std::make_shared<Scripted>(std::vector<std::string>{"garbage"});
    Gateway g2(bad, nullptr);
    CHECK_THROWS_AS(generate_paraphrases(c, g2, "gen", tpl), ParaphraseParseError);
    CHECK(bad->calls == 2);
}

TEST_CASE("ParaphraseStore round-trips and survives a torn tail") {
    auto dir = synth::temp_dir("paraphrase_store");
    auto path = dir / "p.jsonl";
    auto c = make_chunk("c1", "d", "t");
    {
        ParaphraseStore s(path);
        CHECK(s.size() == 0);
        s.append(paras_for(c));
    }
    std::ofstream(path, std::ios::app) << R"({"chunk_id": "c2", "parap)";  // interrupted write
    ParaphraseStore s(path);
    CHECK(s.size() == 1);
    REQUIRE(s.find("c1"));
    CHECK(s.find("c1")->paraphrases[1] == "second rewrite");
    CHECK(s.find("c1")->generation_params.top_p == doctest::Approx(0.9));
    CHECK_FALSE(s.contains("c2"));

    auto c3 = make_chunk("c3", "d", "t");
    s.append(paras_for(c3));
    ParaphraseStore reread(path);
    CHECK(reread.size() == 2);
    CHECK(reread.contains("c3"));
}

TEST_CASE("params_hash distinguishes sampling settings") {
    auto a = ParameterProfile::paraphrase();
    auto b = a;
    b.temperature = 0.5;
    CHECK(params_hash(a) == params_hash(ParameterProfile::paraphrase()));
    CHECK(params_hash(a) != params_hash(b));
}
