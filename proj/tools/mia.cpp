// mia: membership-inference experiment pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mia/errors.hpp"
#include "mia/pipeline.hpp"

namespace {

using nlohmann::json;

struct Overrides {
    std::string config;
    std::string method;
    std::string model;
    std::string cache_mode;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
    auto* c = cmd->add_option("--config", o.config, "Experiment configuration (JSON)");
    if (config_required) c->required()->check(CLI::ExistingFile);
    cmd->add_option("--method", o.method, "Attack method: ncq, decop, probing, familiarity");
    cmd->add_option("--model", o.model, "Model id to attack");
    cmd->add_option("--cache-mode", o.cache_mode, "record, replay or replay-strict")
        ->check(CLI::IsMember({"record", "replay", "replay-strict"}));
    cmd->add_option("--seed", o.seed, "Experiment seed");
    cmd->add_option("--out", o.out, "Output root directory");
}

mia::ExperimentConfig resolve(const Overrides& o) {
    json j = json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw mia::FatalConfigError("cannot read config '" + o.config + "'");
        j = json::parse(in, nullptr, false, true);
        if (j.is_discarded() || !j.is_object())
            throw mia::FatalConfigError("config '" + o.config + "' is not a JSON object");
    }
    if (!o.method.empty()) j["method"]["name"] = o.method;
    if (!o.model.empty()) j["model"]["id"] = o.model;
    if (!o.cache_mode.empty()) j["cache"]["mode"] = o.cache_mode;
    if (o.seed) j["seed"] = *o.seed;
    if (!o.out.empty()) j["out"] = o.out;
    return mia::parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-box membership-inference evaluation for chat-completion models"};
    app.require_subcommand(1);

    Overrides o;
    auto* build = app.add_subcommand("build-dataset", "Ingest a raw corpus and write a labeled chunk dataset");
    auto* para = app.add_subcommand("paraphrase", "Generate and cache 3 paraphrases per dataset chunk");
    auto* run = app.add_subcommand("run", "Run one attack method over the dataset");
    auto* eval = app.add_subcommand("evaluate", "Compute metrics and agreement grids from outcome files");
    auto* report = app.add_subcommand("report", "Merge metrics files into result tables");
    auto* show = app.add_subcommand("config", "Print the fully resolved configuration");
    for (auto* cmd : {build, para, run, show}) add_common(cmd, o, cmd != show);
    add_common(eval, o, false);

    std::vector<std::string> outcome_files;
    eval->add_option("outcomes", outcome_files, "Outcome files (outcomes.jsonl)")->required()->check(CLI::ExistingFile);

    std::vector<std::string> metrics_files;
    std::vector<std::string> layouts;
    std::string report_out = "report";
    report->add_option("metrics", metrics_files, "metrics.jsonl files from evaluate")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("--layout", layouts, "auc, tpr_fpr, accuracy, lcs (default: all)");
    report->add_option("--out", report_out, "Directory for the tables");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            mia::cmd_build_dataset(resolve(o), std::cout);
        } else if (para->parsed()) {
            auto s = mia::cmd_paraphrase(resolve(o), std::cout);
            if (s.failed) std::cerr << s.failed << " chunks without paraphrases\n";
        } else if (run->parsed()) {
            auto s = mia::cmd_run(resolve(o), std::cout);
            std::cout << "manifest " << s.manifest_id << '\n';
        } else if (eval->parsed()) {
            std::vector<std::filesystem::path> paths(outcome_files.begin(), outcome_files.end());
            if (o.config.empty()) {
                // evaluation reads no model or dataset settings; only the output root matters
                json j{{"model", {{"id", "none"}, {"provider", "oracle"}}}};
                if (!o.out.empty()) j["out"] = o.out;
                mia::cmd_evaluate(mia::parse_config(j), paths, std::cout);
            } else {
                mia::cmd_evaluate(resolve(o), paths, std::cout);
            }
        } else if (report->parsed()) {
            std::vector<mia::TableLayout> ls;
            for (const auto& l : layouts) ls.push_back(mia::parse_table_layout(l));
            if (ls.empty())
                ls = {mia::TableLayout::auc, mia::TableLayout::tpr_fpr, mia::TableLayout::accuracy,
                      mia::TableLayout::lcs};
            std::vector<std::filesystem::path> paths(metrics_files.begin(), metrics_files.end());
            mia::cmd_report(paths, ls, report_out, std::cout);
        } else if (show->parsed()) {
            std::cout << mia::to_json(resolve(o)).dump(2) << '\n';
        }
    } catch (const mia::Error& e) {
        std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
