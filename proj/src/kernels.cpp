#include "mia/kernels.hpp"

#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mia/errors.hpp"
#include "mia/lcs.hpp"

namespace mia::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

std::vector<std::size_t> batch_token_lcs(std::span<const TokenPair> pairs, Exec exec) {
    std::vector<std::size_t> out(pairs.size());
    const auto n = static_cast<std::ptrdiff_t>(pairs.size());
    if (exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = token_lcs(pairs[i].a, pairs[i].b);
        return out;
    }
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = token_lcs(pairs[i].a, pairs[i].b);
    return out;
}

namespace {

ExtractResult extract_one(const Document& doc, const DatasetSpec& spec,
                          const NameDetector& detector) {
    ExtractResult r;
    try {
        r.chunks = extract_chunks(doc, spec, detector);
    } catch (const NoEligibleChunk& e) {
        r.error = e.what();
    }
    return r;
}

IngestSlot ingest_one(const CorpusFile& f, Source source) {
    IngestSlot slot;
    std::ifstream in(f.path, std::ios::binary);
    if (!in) {
        slot.error = "cannot open file";
        return slot;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        slot.document = source == Source::arxiv ? ingest_latex(ss.str(), f.doc_id, f.snapshot_date)
                                                : ingest_wiki(ss.str(), f.doc_id, f.snapshot_date);
    } catch (const UnparseableDocument& e) {
        slot.error = e.what();
    }
    return slot;
}

}  // namespace

std::vector<ExtractResult> extract_all(const std::vector<Document>& docs, const DatasetSpec& spec,
                                       const NameDetector& detector, Exec exec) {
    std::vector<ExtractResult> out(docs.size());
    const auto n = static_cast<std::ptrdiff_t>(docs.size());
    if (exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = extract_one(docs[i], spec, detector);
        return out;
    }
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = extract_one(docs[i], spec, detector);
    return out;
}

std::vector<IngestSlot> ingest_all(const std::vector<CorpusFile>& files, Source source, Exec exec) {
    std::vector<IngestSlot> out(files.size());
    const auto n = static_cast<std::ptrdiff_t>(files.size());
    if (exec == Exec::serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = ingest_one(files[i], source);
        return out;
    }
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = ingest_one(files[i], source);
    return out;
}

}  // namespace mia::kernels
