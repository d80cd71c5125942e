#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/errors.hpp"
#include "mia/kernels.hpp"
#include "mia/text.hpp"
#include "support/synth.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = MIA_FIXTURES;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const Section* section(const Document& d, const std::string& name) {
    for (const auto& s : d.sections)
        if (s.name == name) return &s;
    return nullptr;
}

bool contains(const std::string& hay, std::string_view needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("Date parsing and windows") {
    CHECK(Date::parse("2020-10") == Date{2020, 10, 1});
    CHECK(Date::parse("2024-02-29").to_string() == "2024-02-29");
    CHECK(Date{2021, 3, 9}.month_string() == "2021-03");
    CHECK_THROWS_AS(Date::parse("2020/10"), FatalConfigError);
    CHECK_THROWS_AS(Date::parse("2020-13"), FatalConfigError);

    auto s = synth::spec(10);
    CHECK(s.label_for({2020, 11, 5}) == MembershipLabel::member);
    CHECK(s.label_for({2025, 4, 30}) == MembershipLabel::non_member);
    CHECK_FALSE(s.label_for({2022, 1, 1}).has_value());
    s.non_member_window.first = {2020, 12, 1};
    CHECK_THROWS_AS(s.validate(), FatalConfigError);
}

TEST_CASE("LaTeX ingestion keeps prose by section") {
    auto raw = slurp(kFixtures / "arxiv/2020-10/2010.01234.tex");
    auto d = ingest_latex(raw, "2010.01234", {2020, 10, 1});
    CHECK(d.title == "Sparse Attention for Long Documents");
    const auto* method = section(d, "Method");
    REQUIRE(method);
    CHECK(contains(method->body, "as suggested by Beltagy in earlier work"));
    CHECK(contains(method->body, "which Loshchilov found"));  // subsection folds into its section
    CHECK_FALSE(contains(method->body, "softmax"));            // display math
    CHECK_FALSE(contains(method->body, "\\cite"));
    CHECK_FALSE(contains(method->body, "Attention pattern"));  // figure caption
    CHECK_FALSE(contains(method->body, "internal note"));      // comment
    CHECK(section(d, "Abstract"));
    CHECK(section(d, "Related Work"));
    for (const auto& s : d.sections) CHECK_FALSE(contains(s.body, "\\"));

    CHECK_THROWS_AS(ingest_latex("", "x", {2020, 1, 1}), UnparseableDocument);
    CHECK_THROWS_AS(ingest_latex("\\begin{document}\\end{document}", "x", {2020, 1, 1}), UnparseableDocument);
}

TEST_CASE("wiki ingestion for wikitext and JSON snapshots") {
    auto a = ingest_wiki(slurp(kFixtures / "wiki/2020-10/Lighthouse_of_Alexandria.txt"), "L", {2020, 10, 1});
    CHECK(a.title == "Lighthouse of Alexandria");
    REQUIRE(a.sections.size() == 1);
    const auto& body = a.sections[0].body;
    CHECK(contains(body, "commissioned by Ptolemy and"));  // piped link shows its label
    CHECK(contains(body, "island of Pharos."));
    CHECK_FALSE(contains(body, "cite book"));
    CHECK_FALSE(contains(body, "Infobox"));
    CHECK_FALSE(contains(body, "reconstruction"));
    CHECK_FALSE(contains(body, "'''"));

    auto b = ingest_wiki(slurp(kFixtures / "wiki/2025-01/Lighthouse_of_Alexandria.json"), "L", {2025, 1, 1});
    CHECK(b.title == "Lighthouse of Alexandria");
    CHECK(contains(b.sections[0].body, "reign of Philadelphus on"));
    CHECK_FALSE(contains(b.sections[0].body, "<ref"));
    CHECK_THROWS_AS(ingest_wiki("   ", "e", {2020, 1, 1}), UnparseableDocument);
}

TEST_CASE("list_corpus reads month directories in order") {
    auto files = list_corpus(kFixtures / "arxiv");
    REQUIRE(files.size() == 3);
    CHECK(files[0].doc_id == "2010.01234");
    CHECK(files[2].snapshot_date == Date{2025, 1, 1});
    CHECK_THROWS_AS(list_corpus(kFixtures / "does-not-exist"), IoError);
}

TEST_CASE("sentence_bounds respects abbreviations and initials") {
    const std::string s = "We follow Smith et al. in this. Results by J. Doe hold! Is it so? Yes.";
    auto b = sentence_bounds(s);
    REQUIRE(b.size() == 4);
    CHECK(s.substr(b[0].first, b[0].second - b[0].first) == "We follow Smith et al. in this.");
    CHECK(s.substr(b[1].first, b[1].second - b[1].first) == "Results by J. Doe hold!");
}

TEST_CASE("extract_chunks honours bounds, names and the blacklist") {
    auto d = ingest_latex(slurp(kFixtures / "arxiv/2020-10/2010.01234.tex"), "2010.01234", {2020, 10, 1});
    DatasetSpec spec = synth::spec(1);
    spec.one_chunk_per_doc = false;
    auto chunks = extract_chunks(d, spec);
    REQUIRE_FALSE(chunks.empty());
    for (const auto& c : chunks) {
        CHECK(c.char_len >= 400);
        CHECK(c.char_len <= 600);
        CHECK_FALSE(c.proper_spans.empty());
        CHECK(c.membership_label == MembershipLabel::member);
        CHECK(c.chunk_id.rfind("2010.01234@2020-10#", 0) == 0);
        CHECK_FALSE(contains(c.text, "Vaswani"));  // only in the blacklisted introduction
        for (const auto& span : c.proper_spans) CHECK(c.text.substr(span.start, span.end - span.start) == span.surface);
    }

    spec.one_chunk_per_doc = true;
    auto one = extract_chunks(d, spec);
    REQUIRE(one.size() == 1);
    CHECK(extract_chunks(d, spec)[0].chunk_id == one[0].chunk_id);

    Document nameless{"x", Source::arxiv, "T", {{"Method", std::string(500, 'a') + "."}}, {2020, 10, 1}};
    CHECK_THROWS_AS(extract_chunks(nameless, spec), NoEligibleChunk);
    Document intro_only{"y", Source::arxiv, "T", {{"Introduction", d.sections[2].body}}, {2020, 10, 1}};
    CHECK_THROWS_AS(extract_chunks(intro_only, spec), NoEligibleChunk);
}

TEST_CASE("extract_chunks falls back to word-boundary cuts for long sentences") {
    std::string longest = "The survey by Okafor";
    while (longest.size() < 900) longest += " covers the estimator and the sampler";
    longest += ".";
    Document d{"z", Source::arxiv, "T", {{"Method", longest}}, {2020, 10, 1}};
    auto chunks = extract_chunks(d, synth::spec(1));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].char_len <= 600);
    CHECK(chunks[0].char_len >= 400);
    CHECK(chunks[0].text.back() != ' ');
}

TEST_CASE("assemble_dataset balances classes and is deterministic") {
    auto docs = synth::documents(120, 120, 1);
    docs.push_back(synth::document("outside", {2022, 6, 1}, 1));
    auto spec = synth::spec(100);
    auto ds = assemble_dataset(docs, spec);
    CHECK(ds.n_member == 100);
    CHECK(ds.n_non_member == 100);
    CHECK(ds.chunks.size() == 200);
    CHECK(ds.docs_considered == 240);
    std::set<std::string> doc_ids;
    for (std::size_t i = 0; i < ds.chunks.size(); ++i) {
        const auto& c = ds.chunks[i];
        CHECK(c.membership_label == (i < 100 ? MembershipLabel::member : MembershipLabel::non_member));
        CHECK(doc_ids.insert(c.doc_id).second);  // one chunk per document
        CHECK(c.doc_id != "outside");
    }
    auto again = assemble_dataset(docs, spec);
    for (std::size_t i = 0; i < ds.chunks.size(); ++i) CHECK(again.chunks[i].chunk_id == ds.chunks[i].chunk_id);

    spec.seed = 8;
    auto other = assemble_dataset(docs, spec);
    std::size_t same = 0;
    for (std::size_t i = 0; i < ds.chunks.size(); ++i) same += other.chunks[i].chunk_id == ds.chunks[i].chunk_id;
    CHECK(same < ds.chunks.size());

    spec.target_count_per_class = 121;
    CHECK_THROWS_AS(assemble_dataset(docs, spec), InsufficientData);
}

TEST_CASE("paired wiki versions select the same articles in both classes") {
    std::vector<Document> docs;
    for (int i = 0; i < 8; ++i) {
        const auto id = "article" + std::to_string(i);
        docs.push_back(synth::document(id, synth::kMemberDate, 3, Source::wikipedia));
        if (i % 4 != 3) docs.push_back(synth::document(id, synth::kNonMemberDate, 4, Source::wikipedia));
    }
    auto spec = synth::spec(4);
    spec.source = Source::wikipedia;
    spec.paired_versions = true;
    auto ds = assemble_dataset(docs, spec);
    REQUIRE(ds.chunks.size() == 8);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ds.chunks[i].doc_id == ds.chunks[i + 4].doc_id);
    spec.target_count_per_class = 7;
    CHECK_THROWS_AS(assemble_dataset(docs, spec), InsufficientData);
}

TEST_CASE("dataset files round-trip") {
    auto ds = assemble_dataset(synth::documents(12, 12, 2), synth::spec(10));
    auto dir = synth::temp_dir("dataset_io");
    write_dataset(ds, dir);
    CHECK(fs::exists(dir / "dataset.jsonl"));
    CHECK(fs::exists(dir / "manifest.json"));
    auto back = read_dataset(dir);
    REQUIRE(back.chunks.size() == ds.chunks.size());
    for (std::size_t i = 0; i < ds.chunks.size(); ++i) {
        CHECK(back.chunks[i].chunk_id == ds.chunks[i].chunk_id);
        CHECK(back.chunks[i].text == ds.chunks[i].text);
        CHECK(back.chunks[i].proper_spans == ds.chunks[i].proper_spans);
        CHECK(back.chunks[i].membership_label == ds.chunks[i].membership_label);
    }
    CHECK(back.spec.seed == ds.spec.seed);
    CHECK(dataset_manifest_json(back) == dataset_manifest_json(ds));
}

TEST_CASE("OpenMP kernels agree with the serial reference") {
    auto docs = synth::documents(60, 60, 5);
    docs.push_back({"empty", Source::arxiv, "T", {{"Method", "too short"}}, synth::kMemberDate});
    const auto& det = default_name_detector();
    auto s = kernels::extract_all(docs, synth::spec(1), det, kernels::Exec::serial);
    auto p = kernels::extract_all(docs, synth::spec(1), det, kernels::Exec::parallel);
    REQUIRE(s.size() == p.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i].error == p[i].error);
        REQUIRE(s[i].chunks.size() == p[i].chunks.size());
        for (std::size_t k = 0; k < s[i].chunks.size(); ++k) CHECK(s[i].chunks[k].text == p[i].chunks[k].text);
    }
    CHECK_FALSE(s.back().error.empty());

    auto dir = synth::temp_dir("kernels_corpus");
    synth::write_latex_corpus(dir, synth::documents(10, 10, 6));
    std::ofstream(dir / "2020-10" / "broken.tex") << "   ";
    auto files = list_corpus(dir);
    auto si = kernels::ingest_all(files, Source::arxiv, kernels::Exec::serial);
    auto pi = kernels::ingest_all(files, Source::arxiv, kernels::Exec::parallel);
    REQUIRE(si.size() == 21);
    for (std::size_t i = 0; i < si.size(); ++i) {
        CHECK(si[i].document.has_value() == pi[i].document.has_value());
        if (si[i].document) CHECK(si[i].document->sections.size() == pi[i].document->sections.size());
    }
    auto r = ingest_corpus(files, Source::arxiv);
    CHECK(r.documents.size() == 20);
    CHECK(r.failures.size() == 1);
}

TEST_CASE("synthetic LaTeX corpus survives ingestion") {
    auto docs = synth::documents(3, 0, 9);
    auto d = ingest_latex(synth::latex(docs[0]), docs[0].doc_id, docs[0].snapshot_date);
    const auto* results = section(d, "Results");
    REQUIRE(results);
    CHECK(text::collapse_whitespace(results->body).rfind(text::collapse_whitespace(docs[0].sections[1].body), 0) == 0);
}
