#include "mia/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mia/errors.hpp"
#include "mia/kernels.hpp"
#include "mia/rng.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

// ---- small types --------------------------------------------------------------

Date Date::parse(std::string_view s) {
    auto fail = [&] { throw FatalConfigError("unparseable date '" + std::string(s) + "'"); };
    auto field = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        if (pos + len > s.size()) fail();
        auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
        if (ec != std::errc{} || p != s.data() + pos + len) fail();
        return v;
    };
    Date d;
    if (s.size() != 7 && s.size() != 10) fail();
    d.year = field(0, 4);
    if (s[4] != '-') fail();
    d.month = field(5, 2);
    d.day = 1;
    if (s.size() == 10) {
        if (s[7] != '-') fail();
        d.day = field(8, 2);
    }
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) fail();
    return d;
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

std::string Date::month_string() const { return to_string().substr(0, 7); }

std::string_view to_string(Source s) { return s == Source::arxiv ? "arxiv" : "wikipedia"; }

Source parse_source(std::string_view s) {
    if (s == "arxiv") return Source::arxiv;
    if (s == "wikipedia" || s == "wiki") return Source::wikipedia;
    throw FatalConfigError("unknown source '" + std::string(s) + "'");
}

std::string_view to_string(MembershipLabel l) {
    return l == MembershipLabel::member ? "member" : "non_member";
}

MembershipLabel parse_membership_label(std::string_view s) {
    if (s == "member") return MembershipLabel::member;
    if (s == "non_member") return MembershipLabel::non_member;
    throw ParseError("unknown membership label '" + std::string(s) + "'");
}

void DatasetSpec::validate() const {
    if (member_window.last < member_window.first || non_member_window.last < non_member_window.first)
        throw FatalConfigError("date window ends before it starts");
    if (member_window.overlaps(non_member_window))
        throw FatalConfigError("member and non-member windows overlap");
    if (min_chars >= max_chars) throw FatalConfigError("chunk length bounds must satisfy min < max");
    if (target_count_per_class == 0) throw FatalConfigError("target_count_per_class must be positive");
}

std::optional<MembershipLabel> DatasetSpec::label_for(const Date& d) const {
    if (member_window.contains(d)) return MembershipLabel::member;
    if (non_member_window.contains(d)) return MembershipLabel::non_member;
    return std::nullopt;
}

bool DatasetSpec::is_blacklisted(std::string_view section_name) const {
    auto name = text::to_lower_ascii(text::trim(section_name));
    for (const auto& pattern : section_blacklist) {
        auto p = text::to_lower_ascii(text::trim(pattern));
        if (!p.empty() && name.find(p) != std::string::npos) return true;
    }
    return false;
}

// ---- sentences and windows ------------------------------------------------------

namespace {

bool is_abbreviation(std::string_view word) {
    static const std::unordered_set<std::string> abbrev = {
        "e.g", "i.e", "al", "fig", "figs", "eq", "eqs", "dr", "mr", "mrs", "ms", "prof", "vs",
        "cf", "sec", "no", "st", "approx", "resp", "ref", "refs", "jr", "sr", "inc", "ltd", "co"};
    if (word.size() == 1 && word[0] >= 'A' && word[0] <= 'Z') return true;  // initials
    return abbrev.contains(text::to_lower_ascii(word));
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> sentence_bounds(std::string_view s) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    while (start < s.size() && s[start] == ' ') ++start;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t end = i + 1;
        while (end < s.size() && (s[end] == '"' || s[end] == '\'' || s[end] == ')' || s[end] == ']'))
            ++end;
        if (end < s.size() && s[end] != ' ') continue;
        std::size_t next = end;
        while (next < s.size() && s[next] == ' ') ++next;
        if (next < s.size()) {
            auto n = static_cast<unsigned char>(s[next]);
            bool opener = (n >= 'A' && n <= 'Z') || (n >= '0' && n <= '9') || n == '"' ||
                          n == '(' || n == '[' || n >= 0x80;
            if (!opener) continue;
        }
        if (c == '.') {
            std::size_t w = i;
            while (w > start && s[w - 1] != ' ') --w;
            if (is_abbreviation(s.substr(w, i - w))) continue;
        }
        out.emplace_back(start, end);
        start = next;
        i = next == 0 ? 0 : next - 1;
    }
    if (start < s.size()) {
        std::size_t end = s.size();
        while (end > start && s[end - 1] == ' ') --end;
        if (end > start) out.emplace_back(start, end);
    }
    return out;
}

namespace {

// Byte offset of the `count`-th code point after `from` (or s.size()).
std::size_t advance_codepoints(std::string_view s, std::size_t from, std::size_t count) {
    std::size_t i = from;
    while (i < s.size() && count > 0) {
        ++i;
        while (i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) ++i;
        --count;
    }
    return i;
}

Chunk make_chunk(const Document& doc, std::size_t section_index, std::size_t offset,
                 std::string text_, std::vector<NameSpan> spans) {
    Chunk c;
    c.chunk_id = doc.doc_id + "@" + doc.snapshot_date.month_string() + "#s" +
                 std::to_string(section_index) + "o" + std::to_string(offset);
    c.doc_id = doc.doc_id;
    c.title = doc.title;
    c.char_len = text::utf8_length(text_);
    c.token_count = text::tokenize(text_).size();
    c.text = std::move(text_);
    c.proper_spans = std::move(spans);
    c.snapshot_date = doc.snapshot_date;
    return c;
}

}  // namespace

std::vector<Chunk> candidate_chunks(const Document& doc, const DatasetSpec& spec,
                                    const NameDetector& detector) {
    std::vector<Chunk> out;
    const auto label = spec.label_for(doc.snapshot_date).value_or(MembershipLabel::non_member);
    for (std::size_t si = 0; si < doc.sections.size(); ++si) {
        const auto& section = doc.sections[si];
        if (spec.is_blacklisted(section.name)) continue;
        std::string_view body = section.body;
        auto sentences = sentence_bounds(body);

        std::vector<Chunk> aligned;
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            const std::size_t b = sentences[i].first;
            for (std::size_t j = i; j < sentences.size(); ++j) {
                auto window = body.substr(b, sentences[j].second - b);
                auto len = text::utf8_length(window);
                if (len < spec.min_chars) continue;
                if (len <= spec.max_chars) {
                    auto spans = detector.detect(window);
                    if (!spans.empty())
                        aligned.push_back(make_chunk(doc, si, b, std::string(window), std::move(spans)));
                }
                break;
            }
        }
        if (!aligned.empty()) {
            for (auto& c : aligned) out.push_back(std::move(c));
            continue;
        }
        // No sentence-aligned window fits: cut at the last word boundary
        // inside the bounds, starting from each sentence start.
        for (const auto& [b, e] : sentences) {
            std::size_t limit = advance_codepoints(body, b, spec.max_chars);
            if (limit >= body.size()) {
                if (text::utf8_length(body.substr(b)) < spec.min_chars) break;
                limit = body.size();
            } else {
                auto sp = body.rfind(' ', limit);
                if (sp == std::string_view::npos || sp <= b) continue;
                limit = sp;
            }
            auto window = text::trim(body.substr(b, limit - b));
            if (text::utf8_length(window) < spec.min_chars) continue;
            auto spans = detector.detect(window);
            if (!spans.empty()) out.push_back(make_chunk(doc, si, b, std::string(window), std::move(spans)));
        }
    }
    for (auto& c : out) c.membership_label = label;
    return out;
}

std::vector<Chunk> extract_chunks(const Document& doc, const DatasetSpec& spec,
                                  const NameDetector& detector) {
    auto candidates = candidate_chunks(doc, spec, detector);
    if (candidates.empty())
        throw NoEligibleChunk(doc.doc_id + " (" + doc.snapshot_date.month_string() +
                              "): no window satisfies length and proper-name constraints");
    if (spec.one_chunk_per_doc) {
        Rng rng(derive_seed(spec.seed, "chunk", doc.doc_id, doc.snapshot_date.to_string()));
        return {std::move(candidates[rng.below(candidates.size())])};
    }
    // Greedy non-overlapping selection in document order.
    std::vector<Chunk> picked;
    std::string last_section;
    std::size_t last_end = 0;
    for (auto& c : candidates) {
        auto sec = c.chunk_id.substr(0, c.chunk_id.rfind('o'));
        auto offset = std::stoull(c.chunk_id.substr(c.chunk_id.rfind('o') + 1));
        if (sec == last_section && offset < last_end) continue;
        last_section = sec;
        last_end = offset + c.text.size();
        picked.push_back(std::move(c));
    }
    return picked;
}

std::vector<Chunk> extract_chunks(const Document& doc, const DatasetSpec& spec) {
    return extract_chunks(doc, spec, default_name_detector());
}

// ---- assembly ---------------------------------------------------------------------

Dataset assemble_dataset(const std::vector<Document>& docs, const DatasetSpec& spec,
                         const NameDetector& detector) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;

    std::vector<Document> in_window;
    for (const auto& d : docs)
        if (spec.label_for(d.snapshot_date)) in_window.push_back(d);
    ds.docs_considered = in_window.size();

    auto extracted = kernels::extract_all(in_window, spec, detector, kernels::Exec::parallel);

    std::vector<Chunk> pools[2];
    std::unordered_set<std::string> seen_doc;
    for (auto& r : extracted) {
        if (r.chunks.empty()) {
            ++ds.docs_without_chunk;
            continue;
        }
        for (auto& c : r.chunks) {
            if (spec.one_chunk_per_doc && !spec.paired_versions && !seen_doc.insert(c.doc_id).second)
                continue;
            pools[c.membership_label == MembershipLabel::member ? 0 : 1].push_back(std::move(c));
        }
    }

    std::vector<Chunk> selected[2];
    if (spec.paired_versions) {
        // doc_id -> first chunk index per class, in document order
        std::map<std::string, std::pair<long, long>> by_doc;
        std::vector<std::string> order;
        for (int k = 0; k < 2; ++k) {
            for (std::size_t i = 0; i < pools[k].size(); ++i) {
                auto [it, fresh] = by_doc.try_emplace(pools[k][i].doc_id, -1, -1);
                if (fresh) order.push_back(pools[k][i].doc_id);
                long& slot = k == 0 ? it->second.first : it->second.second;
                if (slot < 0) slot = static_cast<long>(i);
            }
        }
        std::vector<std::string> paired;
        for (const auto& id : order)
            if (by_doc[id].first >= 0 && by_doc[id].second >= 0) paired.push_back(id);
        if (paired.size() < spec.target_count_per_class)
            throw InsufficientData("only " + std::to_string(paired.size()) +
                                   " articles have chunks in both windows; need " +
                                   std::to_string(spec.target_count_per_class));
        std::vector<std::size_t> idx(paired.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(spec.seed, "paired"));
        rng.shuffle(idx);
        idx.resize(spec.target_count_per_class);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) {
            selected[0].push_back(pools[0][by_doc[paired[i]].first]);
            selected[1].push_back(pools[1][by_doc[paired[i]].second]);
        }
    } else {
        for (int k = 0; k < 2; ++k) {
            if (pools[k].size() < spec.target_count_per_class)
                throw InsufficientData(std::string(k == 0 ? "member" : "non_member") + " class has " +
                                       std::to_string(pools[k].size()) + " chunks; need " +
                                       std::to_string(spec.target_count_per_class));
            std::vector<std::size_t> idx(pools[k].size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            Rng rng(derive_seed(spec.seed, k == 0 ? "member" : "non_member"));
            rng.shuffle(idx);
            idx.resize(spec.target_count_per_class);
            std::sort(idx.begin(), idx.end());
            for (auto i : idx) selected[k].push_back(pools[k][i]);
        }
    }

    for (int k = 0; k < 2; ++k) {
        for (auto& c : selected[k]) {
            ds.provenance.push_back({c.doc_id, c.snapshot_date.to_string(),
                                     std::string(to_string(c.membership_label)), c.chunk_id});
            ds.chunks.push_back(std::move(c));
        }
    }
    ds.n_member = selected[0].size();
    ds.n_non_member = selected[1].size();
    return ds;
}

Dataset assemble_dataset(const std::vector<Document>& docs, const DatasetSpec& spec) {
    return assemble_dataset(docs, spec, default_name_detector());
}

// ---- corpus directories -------------------------------------------------------------

std::vector<CorpusFile> list_corpus(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec))
        throw IoError("corpus directory '" + root.string() + "' does not exist");
    std::vector<CorpusFile> files;
    for (const auto& month_dir : fs::directory_iterator(root)) {
        if (!month_dir.is_directory()) continue;
        Date d;
        try {
            d = Date::parse(month_dir.path().filename().string());
        } catch (const FatalConfigError&) {
            continue;  // not a YYYY-MM directory
        }
        for (const auto& f : fs::directory_iterator(month_dir.path())) {
            if (!f.is_regular_file()) continue;
            auto name = f.path().filename().string();
            if (name.starts_with('.')) continue;
            files.push_back({f.path(), f.path().stem().string(), d});
        }
    }
    std::sort(files.begin(), files.end(), [](const CorpusFile& a, const CorpusFile& b) {
        return std::tie(a.snapshot_date, a.path) < std::tie(b.snapshot_date, b.path);
    });
    return files;
}

IngestResult ingest_corpus(const std::vector<CorpusFile>& files, Source source) {
    IngestResult r;
    auto slots = kernels::ingest_all(files, source, kernels::Exec::parallel);
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].document)
            r.documents.push_back(std::move(*slots[i].document));
        else
            r.failures.push_back({files[i].path, slots[i].error});
    }
    return r;
}

// ---- dataset files ----------------------------------------------------------------

namespace {

json spec_to_json(const DatasetSpec& s) {
    return json{{"source", to_string(s.source)},
                {"member_window", {s.member_window.first.to_string(), s.member_window.last.to_string()}},
                {"non_member_window",
                 {s.non_member_window.first.to_string(), s.non_member_window.last.to_string()}},
                {"target_count_per_class", s.target_count_per_class},
                {"chunk_len_bounds", {s.min_chars, s.max_chars}},
                {"section_blacklist", s.section_blacklist},
                {"one_chunk_per_doc", s.one_chunk_per_doc},
                {"paired_versions", s.paired_versions},
                {"seed", s.seed}};
}

DatasetSpec spec_from_json(const json& j) {
    DatasetSpec s;
    s.source = parse_source(j.at("source").get<std::string>());
    s.member_window = {Date::parse(j.at("member_window").at(0).get<std::string>()),
                       Date::parse(j.at("member_window").at(1).get<std::string>())};
    s.non_member_window = {Date::parse(j.at("non_member_window").at(0).get<std::string>()),
                           Date::parse(j.at("non_member_window").at(1).get<std::string>())};
    s.target_count_per_class = j.at("target_count_per_class").get<std::size_t>();
    s.min_chars = j.at("chunk_len_bounds").at(0).get<std::size_t>();
    s.max_chars = j.at("chunk_len_bounds").at(1).get<std::size_t>();
    s.section_blacklist = j.at("section_blacklist").get<std::vector<std::string>>();
    s.one_chunk_per_doc = j.at("one_chunk_per_doc").get<bool>();
    s.paired_versions = j.value("paired_versions", false);
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

}  // namespace

std::string chunk_to_json_line(const Chunk& c) {
    json spans = json::array();
    for (const auto& s : c.proper_spans)
        spans.push_back({{"start", s.start}, {"end", s.end}, {"surface", s.surface}});
    json j{{"chunk_id", c.chunk_id},
           {"doc_id", c.doc_id},
           {"title", c.title},
           {"text", c.text},
           {"char_len", c.char_len},
           {"proper_spans", spans},
           {"membership_label", to_string(c.membership_label)},
           {"token_count", c.token_count},
           {"snapshot_date", c.snapshot_date.to_string()}};
    return j.dump();
}

Chunk chunk_from_json_line(std::string_view line) {
    try {
        auto j = json::parse(line);
        Chunk c;
        c.chunk_id = j.at("chunk_id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.title = j.at("title").get<std::string>();
        c.text = j.at("text").get<std::string>();
        c.char_len = j.at("char_len").get<std::size_t>();
        for (const auto& s : j.at("proper_spans"))
            c.proper_spans.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>(),
                                      s.at("surface").get<std::string>()});
        c.membership_label = parse_membership_label(j.at("membership_label").get<std::string>());
        c.token_count = j.at("token_count").get<std::size_t>();
        c.snapshot_date = Date::parse(j.at("snapshot_date").get<std::string>());
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed chunk record: ") + e.what());
    }
}

std::string dataset_manifest_json(const Dataset& ds) {
    json prov = json::array();
    for (const auto& p : ds.provenance)
        prov.push_back({{"doc_id", p.doc_id},
                        {"snapshot_date", p.snapshot_date},
                        {"label", p.label},
                        {"chunk_id", p.chunk_id}});
    json j{{"schema", "mia.dataset.manifest"},
           {"schema_version", 1},
           {"spec", spec_to_json(ds.spec)},
           {"seed", ds.spec.seed},
           {"counts", {{"member", ds.n_member}, {"non_member", ds.n_non_member}}},
           {"docs_considered", ds.docs_considered},
           {"docs_without_chunk", ds.docs_without_chunk},
           {"provenance", prov}};
    return j.dump(2) + "\n";
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream data(dir / "dataset.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream manifest(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!data || !manifest) throw IoError("cannot write dataset into '" + dir.string() + "'");
    for (const auto& c : ds.chunks) data << chunk_to_json_line(c) << '\n';
    manifest << dataset_manifest_json(ds);
    if (!data || !manifest) throw IoError("write failed in '" + dir.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream data(dir / "dataset.jsonl", std::ios::binary);
    std::ifstream manifest(dir / "manifest.json", std::ios::binary);
    if (!data || !manifest) throw IoError("no dataset found in '" + dir.string() + "'");
    Dataset ds;
    json m;
    try {
        m = json::parse(manifest);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dataset manifest: ") + e.what());
    }
    ds.spec = spec_from_json(m.at("spec"));
    ds.docs_considered = m.value("docs_considered", std::size_t{0});
    ds.docs_without_chunk = m.value("docs_without_chunk", std::size_t{0});
    for (const auto& p : m.at("provenance"))
        ds.provenance.push_back({p.at("doc_id"), p.at("snapshot_date"), p.at("label"), p.at("chunk_id")});
    std::string line;
    while (std::getline(data, line)) {
        if (text::trim(line).empty()) continue;
        ds.chunks.push_back(chunk_from_json_line(line));
        (ds.chunks.back().membership_label == MembershipLabel::member ? ds.n_member : ds.n_non_member)++;
    }
    return ds;
}

}  // namespace mia
