#pragma once

// Subcommand implementations shared by the command-line tool and the tests.

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "mia/config.hpp"
#include "mia/gateway.hpp"
#include "mia/report.hpp"

namespace mia {

/// Oracle or HTTP backend for `model`. A null `transport` means a real
/// HTTP client. With `check_credential`, throws AuthError up front when the
/// credential variable is unset.
std::shared_ptr<CompletionBackend> make_backend(const ModelConfig& model, const GatewayConfig& gateway,
                                                std::shared_ptr<HttpTransport> transport = nullptr,
                                                bool check_credential = true);

std::shared_ptr<Gateway> make_gateway(const ExperimentConfig& cfg, const ModelConfig& model,
                                      std::shared_ptr<HttpTransport> transport = nullptr);

PromptTemplates load_templates(const ExperimentConfig& cfg);

struct BuildSummary {
    std::filesystem::path dir;
    std::size_t files = 0;
    std::size_t ingest_failures = 0;
    std::size_t n_member = 0;
    std::size_t n_non_member = 0;
};

BuildSummary cmd_build_dataset(const ExperimentConfig& cfg, std::ostream& log);

struct ParaphraseSummary {
    std::size_t already_cached = 0;
    std::size_t generated = 0;
    std::size_t failed = 0;
    std::size_t backend_calls = 0;
};

ParaphraseSummary cmd_paraphrase(const ExperimentConfig& cfg, std::ostream& log,
                                 std::shared_ptr<HttpTransport> transport = nullptr);

struct RunSummary {
    std::string manifest_id;
    std::filesystem::path dir;
    std::filesystem::path outcomes;
    std::size_t total = 0;
    std::size_t errors = 0;
    std::size_t backend_calls = 0;
};

RunSummary cmd_run(const ExperimentConfig& cfg, std::ostream& log,
                   std::shared_ptr<HttpTransport> transport = nullptr);

struct EvaluateSummary {
    std::string manifest_id;
    std::filesystem::path dir;
    std::vector<MetricsReport> reports;
    std::vector<std::filesystem::path> heatmaps;
};

/// Writes metrics.jsonl, one CSV per table layout and, when a model has two or
/// more predicting outcome sets on a dataset, heatmap_<dataset>.csv.
EvaluateSummary cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& outcome_files,
                             std::ostream& log);

/// Merges metrics files (from several evaluations) into tables under `out_dir`.
std::vector<std::filesystem::path> cmd_report(const std::vector<std::filesystem::path>& metrics_files,
                                              const std::vector<TableLayout>& layouts,
                                              const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace mia
