#pragma once

// Offline experiment configurations over a synthetic corpus and the scripted
// oracle, shared by the pipeline tests and the acceptance binary.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mia/config.hpp"

namespace synth {

struct OracleRates {
    double member = 0.9;
    double non_member = 0.1;
};

/// Config JSON for an arXiv-style dataset under `root`: corpus in
/// root/corpus, outputs in root/out.
inline nlohmann::json oracle_config(const std::filesystem::path& root, std::size_t per_class,
                                    OracleRates rates = {}, std::uint64_t seed = 1) {
    return nlohmann::json{
        {"out", (root / "out").string()},
        {"seed", seed},
        {"workers", 4},
        {"dataset",
         {{"name", "synthetic"},
          {"corpus_dir", (root / "corpus").string()},
          {"source", "arxiv"},
          {"member_window", {"2020-09", "2020-12"}},
          {"non_member_window", {"2024-11", "2025-04"}},
          {"target_count_per_class", per_class}}},
        {"method", {{"name", "ncq"}}},
        {"model",
         {{"id", "oracle-model"},
          {"provider", "oracle"},
          {"oracle", {{"p_member_correct", rates.member}, {"p_nonmember_correct", rates.non_member}}}}},
        {"paraphrase_model", {{"id", "oracle-paraphraser"}, {"provider", "oracle"}}},
        {"cache", {{"mode", "record"}}}};
}

inline mia::ExperimentConfig with_method(nlohmann::json j, const std::string& method) {
    j["method"] = {{"name", method}};
    return mia::parse_config(j);
}

}  // namespace synth
