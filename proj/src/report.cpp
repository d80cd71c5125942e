#include "mia/report.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "mia/errors.hpp"
#include "mia/hash.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

// ---- files -------------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- outcomes --------------------------------------------------------------------

json outcome_to_json(const AttackOutcome& o) {
    return json{{"record", "outcome"},
                {"chunk_id", o.chunk_id},
                {"method", to_string(o.method)},
                {"variant", o.variant},
                {"model_id", o.model_id},
                {"dataset", o.dataset},
                {"membership_label", to_string(o.membership_label)},
                {"raw_response", o.raw_response},
                {"finish_reason", o.finish_reason},
                {"parsed", o.parsed ? *o.parsed : json(nullptr)},
                {"gold", o.gold},
                {"score", o.score},
                {"predicted_member", o.predicted_member ? json(*o.predicted_member) : json(nullptr)},
                {"error", o.error ? json(*o.error) : json(nullptr)},
                {"reference_tokens", o.reference_tokens}};
}

AttackOutcome outcome_from_json(const json& j) {
    try {
        AttackOutcome o;
        o.chunk_id = j.at("chunk_id").get<std::string>();
        o.method = parse_method(j.at("method").get<std::string>());
        o.variant = j.at("variant").get<std::string>();
        o.model_id = j.at("model_id").get<std::string>();
        o.dataset = j.at("dataset").get<std::string>();
        o.membership_label = parse_membership_label(j.at("membership_label").get<std::string>());
        o.raw_response = j.at("raw_response").get<std::string>();
        o.finish_reason = j.at("finish_reason").get<std::string>();
        if (!j.at("parsed").is_null()) o.parsed = j.at("parsed");
        o.gold = j.at("gold");
        o.score = j.at("score").get<double>();
        if (!j.at("predicted_member").is_null()) o.predicted_member = j.at("predicted_member").get<bool>();
        if (!j.at("error").is_null()) o.error = j.at("error").get<std::string>();
        o.reference_tokens = j.at("reference_tokens").get<std::size_t>();
        return o;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed outcome record: ") + e.what());
    } catch (const FatalConfigError& e) {
        throw ParseError(std::string("malformed outcome record: ") + e.what());
    }
}

void write_outcomes(std::span<const AttackOutcome> outcomes, const std::filesystem::path& path,
                    const std::string& manifest_id) {
    if (outcomes.empty()) throw FatalConfigError("refusing to write an empty outcome file");
    std::string out;
    json header{{"record", "header"},
                {"schema", "mia.outcomes"},
                {"schema_version", kOutcomeSchemaVersion},
                {"manifest_id", manifest_id},
                {"count", outcomes.size()}};
    out += header.dump() + '\n';
    for (const auto& o : outcomes) out += outcome_to_json(o).dump() + '\n';
    write_text_file(path, out);
}

OutcomeFile read_outcomes(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    OutcomeFile f;
    bool have_header = false;
    std::size_t expected = 0, lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": not a JSON object");
        if (!have_header) {
            if (j.value("record", "") != "header" || j.value("schema", "") != "mia.outcomes")
                throw ParseError(path.string() + ": missing outcome header");
            if (j.value("schema_version", 0) != kOutcomeSchemaVersion)
                throw ParseError(path.string() + ": unsupported schema_version");
            f.manifest_id = j.value("manifest_id", "");
            expected = j.value("count", std::size_t{0});
            have_header = true;
            continue;
        }
        f.outcomes.push_back(outcome_from_json(j));
    }
    if (!have_header) throw ParseError(path.string() + ": empty outcome file");
    if (f.outcomes.size() != expected)
        throw ParseError(path.string() + ": header announces " + std::to_string(expected) +
                         " outcomes, found " + std::to_string(f.outcomes.size()));
    return f;
}

// ---- tables ----------------------------------------------------------------------

std::string_view to_string(TableLayout l) {
    switch (l) {
        case TableLayout::auc: return "auc";
        case TableLayout::tpr_fpr: return "tpr_fpr";
        case TableLayout::accuracy: return "accuracy";
        case TableLayout::lcs: return "lcs";
    }
    return "?";
}

TableLayout parse_table_layout(std::string_view s) {
    if (s == "auc" || s == "auc_table") return TableLayout::auc;
    if (s == "tpr_fpr" || s == "tpr_fpr_table") return TableLayout::tpr_fpr;
    if (s == "accuracy" || s == "accuracy_table") return TableLayout::accuracy;
    if (s == "lcs" || s == "lcs_table") return TableLayout::lcs;
    throw FatalConfigError("unknown table layout '" + std::string(s) + "'");
}

std::string format_fixed3(double x) {
    // the epsilon keeps decimal halves such as 0.5285 from rounding down
    const long long scaled = static_cast<long long>(std::floor(std::fabs(x) * 1000.0 + 0.5 + 1e-9));
    std::string s = (x < 0 && scaled != 0) ? "-" : "";
    s += std::to_string(scaled / 1000);
    s += '.';
    auto frac = std::to_string(scaled % 1000);
    s += std::string(3 - frac.size(), '0') + frac;
    return s;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    return "\"" + text::replace_all(s, "\"", "\"\"") + "\"";
}

std::string csv_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_field(cells[i]);
    }
    return out + '\n';
}

std::string manifest_line(const std::string& id) { return id.empty() ? "" : "# manifest_id=" + id + '\n'; }

using ColumnKey = std::tuple<Method, std::string, std::string>;  // method, dataset, variant

}  // namespace

std::string format_metrics_table(std::span<const MetricsReport> reports, TableLayout layout,
                                 const std::string& manifest_id) {
    std::set<ColumnKey> keys;
    std::set<std::string> models;
    std::map<Method, std::set<std::string>> variants;
    std::map<std::pair<std::string, ColumnKey>, const MetricsReport*> cell;
    for (const auto& r : reports) {
        if (layout == TableLayout::lcs && !r.lcs) continue;
        ColumnKey k{r.method, r.dataset, r.variant};
        keys.insert(k);
        models.insert(r.model_id);
        variants[r.method].insert(r.variant);
        cell[{r.model_id, k}] = &r;
    }

    std::vector<std::string> sub;
    switch (layout) {
        case TableLayout::auc: sub = {""}; break;
        case TableLayout::tpr_fpr: sub = {" TPR", " FPR"}; break;
        case TableLayout::accuracy:
        case TableLayout::lcs: sub = {" M", " non-M"}; break;
    }

    std::vector<std::string> header = {"model"};
    for (const auto& [method, dataset, variant] : keys) {
        auto label = std::string(to_string(method));
        if (variants[method].size() > 1) label += "[" + variant + "]";
        label += "/" + dataset;
        for (const auto& s : sub) header.push_back(label + s);
    }

    std::string out = manifest_line(manifest_id) + csv_row(header);
    for (const auto& model : models) {
        std::vector<std::string> row = {model};
        for (const auto& k : keys) {
            auto it = cell.find({model, k});
            const MetricsReport* r = it == cell.end() ? nullptr : it->second;
            auto opt = [](const std::optional<double>& v) { return v ? format_fixed3(*v) : std::string("-"); };
            switch (layout) {
                case TableLayout::auc: row.push_back(r ? format_fixed3(r->auc) : "-"); break;
                case TableLayout::tpr_fpr:
                    row.push_back(r ? opt(r->tpr) : "-");
                    row.push_back(r ? opt(r->fpr) : "-");
                    break;
                case TableLayout::accuracy:
                    row.push_back(r ? format_fixed3(r->acc_member) : "-");
                    row.push_back(r ? format_fixed3(r->acc_nonmember) : "-");
                    break;
                case TableLayout::lcs:
                    row.push_back(r ? std::to_string(r->lcs->rounded_member) : "-");
                    row.push_back(r ? std::to_string(r->lcs->rounded_nonmember) : "-");
                    break;
            }
        }
        out += csv_row(row);
    }
    return out;
}

void write_metrics_table(std::span<const MetricsReport> reports, TableLayout layout,
                         const std::filesystem::path& path, const std::string& manifest_id) {
    write_text_file(path, format_metrics_table(reports, layout, manifest_id));
}

json report_to_json(const MetricsReport& r) {
    json j{{"method", to_string(r.method)},
           {"variant", r.variant},
           {"model_id", r.model_id},
           {"dataset", r.dataset},
           {"auc", r.auc},
           {"tpr", r.tpr ? json(*r.tpr) : json(nullptr)},
           {"fpr", r.fpr ? json(*r.fpr) : json(nullptr)},
           {"acc_member", r.acc_member},
           {"acc_nonmember", r.acc_nonmember},
           {"n_member", r.n_member},
           {"n_nonmember", r.n_nonmember},
           {"n_errors", r.n_errors},
           {"lcs", nullptr}};
    if (r.lcs)
        j["lcs"] = json{{"mean_member", r.lcs->mean_member},
                        {"mean_nonmember", r.lcs->mean_nonmember},
                        {"rounded_member", r.lcs->rounded_member},
                        {"rounded_nonmember", r.lcs->rounded_nonmember}};
    return j;
}

MetricsReport report_from_json(const json& j) {
    try {
        MetricsReport r;
        r.method = parse_method(j.at("method").get<std::string>());
        r.variant = j.at("variant").get<std::string>();
        r.model_id = j.at("model_id").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.auc = j.at("auc").get<double>();
        if (!j.at("tpr").is_null()) r.tpr = j.at("tpr").get<double>();
        if (!j.at("fpr").is_null()) r.fpr = j.at("fpr").get<double>();
        r.acc_member = j.at("acc_member").get<double>();
        r.acc_nonmember = j.at("acc_nonmember").get<double>();
        r.n_member = j.at("n_member").get<std::size_t>();
        r.n_nonmember = j.at("n_nonmember").get<std::size_t>();
        r.n_errors = j.at("n_errors").get<std::size_t>();
        if (!j.at("lcs").is_null()) {
            const auto& l = j.at("lcs");
            r.lcs = LcsSummary{l.at("mean_member").get<double>(), l.at("mean_nonmember").get<double>(),
                               l.at("rounded_member").get<long long>(),
                               l.at("rounded_nonmember").get<long long>()};
        }
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed metrics record: ") + e.what());
    }
}

void write_reports(std::span<const MetricsReport> reports, const std::filesystem::path& path,
                   const std::string& manifest_id) {
    std::string out = json{{"record", "header"},
                           {"schema", "mia.metrics"},
                           {"schema_version", kOutcomeSchemaVersion},
                           {"manifest_id", manifest_id}}
                          .dump() +
                      '\n';
    for (const auto& r : reports) out += report_to_json(r).dump() + '\n';
    write_text_file(path, out);
}

std::vector<MetricsReport> read_reports(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<MetricsReport> out;
    bool header = false;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": not a JSON object");
        if (!header) {
            if (j.value("schema", "") != "mia.metrics") throw ParseError(path.string() + ": missing metrics header");
            header = true;
            continue;
        }
        out.push_back(report_from_json(j));
    }
    if (!header) throw ParseError(path.string() + ": empty metrics file");
    return out;
}

std::string format_heatmap(const AgreementGrid& grid, const std::string& manifest_id) {
    std::vector<std::string> header = {"row", "chunk_id", "class"};
    header.insert(header.end(), grid.models.begin(), grid.models.end());
    std::string out = manifest_line(manifest_id) + csv_row(header);
    for (std::size_t r = 0; r < grid.chunk_ids.size(); ++r) {
        std::vector<std::string> row = {std::to_string(r), grid.chunk_ids[r],
                                        std::string(to_string(grid.labels[r]))};
        for (bool f : grid.flags[r]) row.push_back(f ? "1" : "0");
        out += csv_row(row);
    }
    return out;
}

void write_agreement_heatmap_data(const AgreementGrid& grid, const std::filesystem::path& path,
                                  const std::string& manifest_id) {
    write_text_file(path, format_heatmap(grid, manifest_id));
}

// ---- manifest ------------------------------------------------------------------------

std::string RunManifest::id() const { return sha256_hex(content.dump()).substr(0, 16); }

json RunManifest::to_json() const {
    json j = content;
    j["manifest_id"] = id();
    j["timestamps"] = json{{"started_at", started_at}, {"finished_at", finished_at}};
    return j;
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::filesystem::path run_directory(const std::filesystem::path& out_root, const RunManifest& m) {
    return out_root / "runs" / m.id();
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    write_text_file(path, m.to_json().dump(2) + '\n');
}

}  // namespace mia
