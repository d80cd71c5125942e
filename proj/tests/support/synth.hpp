#pragma once

// Deterministic synthetic corpora for tests: prose with embedded surnames,
// either as Document objects or as LaTeX / wiki files on disk.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/rng.hpp"

namespace synth {

inline constexpr std::array<const char*, 24> kNames = {
    "Okonkwo", "Haldane",  "Petrov",   "Lindgren", "Moreno",  "Takahashi", "Whitfield", "Abara",
    "Kowalski", "Brennan", "Suzuki",   "Fairbairn", "Oyelaran", "Castell",  "Dufresne",  "Varga",
    "Nakagawa", "Rostova", "Ellery",   "Quintero", "Marchetti", "Holloway", "Ibsen",    "Yamada"};

inline constexpr std::array<const char*, 12> kNouns = {
    "estimator", "gradient", "baseline", "posterior", "encoder", "spectrum",
    "kernel",    "variance", "corpus",   "sampler",   "decoder", "manifold"};

inline constexpr std::array<const char*, 8> kAdjectives = {
    "sparse", "robust", "stable", "noisy", "linear", "adaptive", "compact", "shallow"};

template <std::size_t N>
const char* pick(mia::Rng& rng, const std::array<const char*, N>& a) {
    return a[rng.below(N)];
}

/// One sentence of 80-130 characters; most contain a mid-sentence surname.
inline std::string sentence(mia::Rng& rng) {
    const std::string n1 = pick(rng, kNames), n2 = pick(rng, kNames);
    const std::string a = pick(rng, kNouns), b = pick(rng, kNouns), adj = pick(rng, kAdjectives);
    const auto k = std::to_string(8 + rng.below(90));
    switch (rng.below(6)) {
        case 0: return "The method proposed by " + n1 + " was evaluated on the " + adj + " benchmark with " + k + " samples.";
        case 1: return "In this setting, " + n1 + " and " + n2 + " observed that the " + a + " improves when the " + b + " is " + adj + ".";
        case 2: return "We follow the protocol of " + n1 + " to measure the " + a + " across " + k + " independent runs.";
        case 3: return "These results confirm the earlier analysis by " + n1 + " of the " + adj + " " + a + ".";
        case 4: return "Our " + a + " remains " + adj + ", although the " + b + " grows with the number of layers.";
        default: return "A comparison with the " + b + " of " + n1 + " shows a gap of " + k + " points on average.";
    }
}

inline std::string paragraph(mia::Rng& rng, std::size_t min_chars) {
    std::string p;
    while (p.size() < min_chars) {
        if (!p.empty()) p += ' ';
        p += sentence(rng);
    }
    return p;
}

/// Document with an introduction and a results section of ~1500 characters.
inline mia::Document document(const std::string& doc_id, mia::Date date, std::uint64_t seed,
                              mia::Source source = mia::Source::arxiv) {
    mia::Rng rng(mia::derive_seed(seed, doc_id));
    mia::Document d;
    d.doc_id = doc_id;
    d.source = source;
    d.title = "On the " + std::string(pick(rng, kAdjectives)) + " " + pick(rng, kNouns) + " " + doc_id;
    d.snapshot_date = date;
    if (source == mia::Source::arxiv) {
        d.sections.push_back({"Introduction", paragraph(rng, 600)});
        d.sections.push_back({"Results", paragraph(rng, 1500)});
    } else {
        d.sections.push_back({"Article", paragraph(rng, 1500)});
    }
    return d;
}

inline const mia::Date kMemberDate{2020, 10, 1};
inline const mia::Date kNonMemberDate{2025, 1, 1};

inline std::vector<mia::Document> documents(std::size_t members, std::size_t non_members, std::uint64_t seed) {
    std::vector<mia::Document> docs;
    for (std::size_t i = 0; i < members; ++i) docs.push_back(document("m" + std::to_string(i), kMemberDate, seed));
    for (std::size_t i = 0; i < non_members; ++i)
        docs.push_back(document("n" + std::to_string(i), kNonMemberDate, seed));
    return docs;
}

inline mia::DatasetSpec spec(std::size_t target) {
    mia::DatasetSpec s;
    s.member_window = {{2020, 9, 1}, {2020, 12, 31}};
    s.non_member_window = {{2024, 11, 1}, {2025, 4, 30}};
    s.target_count_per_class = target;
    s.seed = 7;
    return s;
}

inline std::string latex(const mia::Document& d) {
    std::string t = "% synthetic source\n\\documentclass{article}\n\\title{" + d.title +
                    "}\n\\begin{document}\n\\maketitle\n\\begin{abstract}\nWe study things.\n\\end{abstract}\n";
    for (const auto& s : d.sections) {
        t += "\\section{" + s.name + "}\\label{sec:" + s.name + "}\n";
        t += s.body + " See Table~\\ref{tab:main} and \\cite{ref2020}.\n";
        t += "\\begin{table}[h]\\begin{tabular}{cc} 1 & 2 \\end{tabular}\\end{table}\n";
        t += "$$ x = \\frac{1}{2} $$\n";
    }
    t += "\\bibliographystyle{plain}\n\\bibliography{refs}\n\\end{document}\n";
    return t;
}

/// Writes `<root>/YYYY-MM/<doc_id>.tex` for every document.
inline void write_latex_corpus(const std::filesystem::path& root, const std::vector<mia::Document>& docs) {
    for (const auto& d : docs) {
        auto dir = root / d.snapshot_date.month_string();
        std::filesystem::create_directories(dir);
        std::ofstream(dir / (d.doc_id + ".tex")) << latex(d);
    }
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mia_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace synth
