#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mia/attacks.hpp"
#include "mia/corpus.hpp"
#include "mia/gateway.hpp"

namespace mia {

struct ModelConfig {
    std::string id;
    /// "oracle" or a wire format name.
    std::string provider;
    ProviderProfile profile;
    OracleSpec oracle;
    ParameterProfile params;
    std::optional<std::string> system_prompt;

    bool is_oracle() const { return provider == "oracle"; }
};

struct GatewayConfig {
    int max_in_flight = 4;
    int min_request_interval_ms = 0;
    std::vector<std::string> refusal_phrases = default_refusal_phrases();
    RetryPolicy retry;
    int timeout_s = 120;
};

struct DatasetConfig {
    std::string name;
    std::filesystem::path path;        // dataset directory (dataset.jsonl + manifest.json)
    std::filesystem::path corpus_dir;  // raw YYYY-MM/ tree; build-dataset only
    DatasetSpec spec;
    bool has_windows = false;
};

/// Fully resolved experiment settings. Every default is written back by
/// to_json(), so the manifest shows exactly what ran.
struct ExperimentConfig {
    std::filesystem::path out = "out";
    std::uint64_t seed = 0;
    int workers = 4;
    std::optional<std::filesystem::path> templates_dir;
    DatasetConfig dataset;
    Method method = Method::ncq;
    Variant variant;
    ModelConfig model;
    ModelConfig paraphrase_model;
    GatewayConfig gateway;
    CacheMode cache_mode = CacheMode::record;
    std::filesystem::path cache_path;
    std::filesystem::path paraphrase_cache;
};

/// Throws FatalConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& c);
/// to_json() without filesystem locations, for content hashing.
nlohmann::json substantive_json(const ExperimentConfig& c);

/// Provider defaults for a wire format: endpoint, credential variable and
/// parameter support.
ProviderProfile default_provider_profile(WireFormat w);

}  // namespace mia
