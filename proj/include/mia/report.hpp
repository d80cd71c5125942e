#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mia/attacks.hpp"
#include "mia/metrics.hpp"

namespace mia {

inline constexpr int kOutcomeSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

// ---- outcomes --------------------------------------------------------------------

nlohmann::json outcome_to_json(const AttackOutcome& o);
AttackOutcome outcome_from_json(const nlohmann::json& j);

/// Header record first, then one record per outcome. Keys are sorted and
/// numbers printed in shortest round-trip form, so equal inputs give equal
/// bytes.
void write_outcomes(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path,
                    const std::string& manifest_id = "");

struct OutcomeFile {
    std::string manifest_id;
    std::vector<AttackOutcome> outcomes;
};

/// Throws IoError when unreadable, ParseError on a bad header or record.
OutcomeFile read_outcomes(const std::filesystem::path& path);

// ---- metric tables ---------------------------------------------------------------

enum class TableLayout { auc, tpr_fpr, accuracy, lcs };
std::string_view to_string(TableLayout l);
TableLayout parse_table_layout(std::string_view s);

/// Fixed three decimals, half-up.
std::string format_fixed3(double x);

/// Rows are models, columns method/dataset pairs ordered by method then
/// dataset; missing cells print "-". A `# manifest_id=` line leads when an id
/// is given.
std::string format_metrics_table(std::span<const MetricsReport> reports, TableLayout layout,
                                 const std::string& manifest_id = "");
void write_metrics_table(std::span<const MetricsReport> reports, TableLayout layout,
                         const std::filesystem::path& path, const std::string& manifest_id = "");

nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);
void write_reports(std::span<const MetricsReport> reports, const std::filesystem::path& path,
                   const std::string& manifest_id = "");
std::vector<MetricsReport> read_reports(const std::filesystem::path& path);

/// Columns: row, chunk_id, class, then one 0/1 flag per model.
std::string format_heatmap(const AgreementGrid& grid, const std::string& manifest_id = "");
void write_agreement_heatmap_data(const AgreementGrid& grid, const std::filesystem::path& path,
                                  const std::string& manifest_id = "");

// ---- run manifest ------------------------------------------------------------------

/// Everything needed to reproduce a run. Timestamps are kept out of the id.
struct RunManifest {
    nlohmann::json content = nlohmann::json::object();
    std::string started_at;
    std::string finished_at;

    /// First 16 hex digits of the SHA-256 over `content`.
    std::string id() const;
    nlohmann::json to_json() const;
};

std::string utc_now();
std::filesystem::path run_directory(const std::filesystem::path& out_root, const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mia
