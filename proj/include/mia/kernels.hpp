#pragma once

// Data-parallel batch kernels. Each kernel has a serial path, kept as the
// reference the OpenMP path is tested against, selected by `Exec`.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mia/corpus.hpp"

namespace mia::kernels {

enum class Exec { serial, parallel };

int max_threads();

struct TokenPair {
    std::vector<std::string> a;
    std::vector<std::string> b;
};

std::vector<std::size_t> batch_token_lcs(std::span<const TokenPair> pairs, Exec exec);

struct ExtractResult {
    std::vector<Chunk> chunks;
    std::string error;  // non-empty when the document yielded no chunk
};

/// extract_chunks() over every document; results are index-aligned with `docs`.
std::vector<ExtractResult> extract_all(const std::vector<Document>& docs, const DatasetSpec& spec,
                                       const NameDetector& detector, Exec exec);

struct IngestSlot {
    std::optional<Document> document;
    std::string error;
};

std::vector<IngestSlot> ingest_all(const std::vector<CorpusFile>& files, Source source, Exec exec);

}  // namespace mia::kernels
