#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mia/names.hpp"

namespace mia {

struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    /// Accepts `YYYY-MM-DD` or `YYYY-MM` (day defaults to 1).
    static Date parse(std::string_view s);
    std::string to_string() const;
    std::string month_string() const;  // YYYY-MM
};

/// Closed interval of dates.
struct DateRange {
    Date first;
    Date last;

    bool contains(const Date& d) const { return first <= d && d <= last; }
    bool overlaps(const DateRange& o) const { return first <= o.last && o.first <= last; }
};

enum class Source { arxiv, wikipedia };
enum class MembershipLabel { member, non_member };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);
std::string_view to_string(MembershipLabel l);
MembershipLabel parse_membership_label(std::string_view s);

struct Section {
    std::string name;
    std::string body;
};

struct Document {
    std::string doc_id;
    Source source = Source::arxiv;
    std::string title;
    std::vector<Section> sections;
    Date snapshot_date;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::string title;
    std::string text;
    std::size_t char_len = 0;
    std::vector<NameSpan> proper_spans;
    MembershipLabel membership_label = MembershipLabel::member;
    std::size_t token_count = 0;
    Date snapshot_date;
};

struct DatasetSpec {
    Source source = Source::arxiv;
    DateRange member_window;
    DateRange non_member_window;
    std::size_t target_count_per_class = 100;
    std::size_t min_chars = 400;
    std::size_t max_chars = 600;
    std::vector<std::string> section_blacklist = {"introduction", "related work", "background",
                                                  "abstract"};
    bool one_chunk_per_doc = true;
    /// Wikipedia mode: keep only articles that have a chunk in both windows and
    /// select member/non-member versions of the same articles together.
    bool paired_versions = false;
    std::uint64_t seed = 0;

    /// Throws FatalConfigError when the windows overlap or bounds are inverted.
    void validate() const;
    std::optional<MembershipLabel> label_for(const Date& d) const;
    bool is_blacklisted(std::string_view section_name) const;
};

struct DocProvenance {
    std::string doc_id;
    std::string snapshot_date;
    std::string label;
    std::string chunk_id;
};

struct Dataset {
    DatasetSpec spec;
    std::vector<Chunk> chunks;  // members first, then non-members, each in selection order
    std::vector<DocProvenance> provenance;
    std::size_t n_member = 0;
    std::size_t n_non_member = 0;
    std::size_t docs_considered = 0;
    std::size_t docs_without_chunk = 0;
};

// ---- ingestion -------------------------------------------------------------

/// Strips LaTeX markup and segments prose by section. Throws
/// UnparseableDocument when no prose survives.
Document ingest_latex(std::string_view raw, std::string doc_id, Date snapshot_date);

/// Parses a Wikipedia snapshot (JSON record, wikitext or plain text) into a
/// single-section Document.
Document ingest_wiki(std::string_view raw, std::string doc_id, Date snapshot_date);

// ---- chunking --------------------------------------------------------------

/// Splits prose into sentences; returns [begin, end) byte offsets.
std::vector<std::pair<std::size_t, std::size_t>> sentence_bounds(std::string_view text);

/// Candidate windows of `doc` that satisfy the length and proper-name
/// constraints, in document order.
std::vector<Chunk> candidate_chunks(const Document& doc, const DatasetSpec& spec,
                                    const NameDetector& detector);

/// Throws NoEligibleChunk when no window qualifies.
std::vector<Chunk> extract_chunks(const Document& doc, const DatasetSpec& spec,
                                  const NameDetector& detector);
std::vector<Chunk> extract_chunks(const Document& doc, const DatasetSpec& spec);

/// Labels documents by window and truncates each class to the target.
/// Throws InsufficientData when a class comes up short.
Dataset assemble_dataset(const std::vector<Document>& docs, const DatasetSpec& spec,
                         const NameDetector& detector);
Dataset assemble_dataset(const std::vector<Document>& docs, const DatasetSpec& spec);

// ---- corpus directories -----------------------------------------------------

struct CorpusFile {
    std::filesystem::path path;
    std::string doc_id;
    Date snapshot_date;
};

struct IngestFailure {
    std::filesystem::path path;
    std::string reason;
};

struct IngestResult {
    std::vector<Document> documents;  // in CorpusFile order
    std::vector<IngestFailure> failures;
};

/// Lists `<root>/YYYY-MM/<doc_id>.<ext>` files in sorted order. Throws IoError
/// when the root is missing.
std::vector<CorpusFile> list_corpus(const std::filesystem::path& root);

IngestResult ingest_corpus(const std::vector<CorpusFile>& files, Source source);

// ---- dataset files ----------------------------------------------------------

/// Writes `dataset.jsonl` and `manifest.json` into `dir`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);
std::string dataset_manifest_json(const Dataset& dataset);
std::string chunk_to_json_line(const Chunk& chunk);
Chunk chunk_from_json_line(std::string_view line);

}  // namespace mia
