#include "mia/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <tuple>

#include <omp.h>

#include "mia/attacks.hpp"
#include "mia/errors.hpp"
#include "mia/hash.hpp"
#include "mia/metrics.hpp"
#include "mia/perturb.hpp"

namespace mia {

using nlohmann::json;

std::shared_ptr<CompletionBackend> make_backend(const ModelConfig& model, const GatewayConfig& gateway,
                                                std::shared_ptr<HttpTransport> transport,
                                                bool check_credential) {
    if (model.is_oracle()) return std::make_shared<OracleBackend>(model.oracle);
    const char* cred = std::getenv(model.profile.auth_env_var.c_str());
    if (check_credential && (cred == nullptr || *cred == '\0'))
        throw AuthError("credential variable '" + model.profile.auth_env_var + "' for model '" + model.id +
                        "' is not set");
    if (!transport) transport = std::make_shared<HttplibTransport>(std::chrono::seconds(gateway.timeout_s));
    return std::make_shared<HttpBackend>(model.profile, std::move(transport), gateway.retry);
}

std::shared_ptr<Gateway> make_gateway(const ExperimentConfig& cfg, const ModelConfig& model,
                                      std::shared_ptr<HttpTransport> transport) {
    auto cache = std::make_shared<ResponseCache>(cfg.cache_path, cfg.cache_mode);
    GatewayOptions opts;
    opts.max_in_flight = cfg.gateway.max_in_flight;
    opts.min_request_interval = std::chrono::milliseconds(cfg.gateway.min_request_interval_ms);
    opts.refusal_phrases = cfg.gateway.refusal_phrases;
    // replay-strict never reaches the backend, so it runs without credentials
    const bool check = cfg.cache_mode != CacheMode::replay_strict;
    return std::make_shared<Gateway>(make_backend(model, cfg.gateway, std::move(transport), check),
                                     std::move(cache), opts);
}

PromptTemplates load_templates(const ExperimentConfig& cfg) {
    return cfg.templates_dir ? PromptTemplates::load(*cfg.templates_dir) : PromptTemplates::defaults();
}

namespace {

std::string error_text(const std::exception& e) {
    auto* err = dynamic_cast<const Error*>(&e);
    return (err ? err->kind() + ": " : std::string()) + e.what();
}

}  // namespace

// ---- build-dataset ------------------------------------------------------------------

BuildSummary cmd_build_dataset(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.dataset.corpus_dir.empty()) throw FatalConfigError("'dataset.corpus_dir' is required to build a dataset");
    if (!cfg.dataset.has_windows)
        throw FatalConfigError("'dataset.member_window' and 'dataset.non_member_window' are required");

    BuildSummary s;
    auto files = list_corpus(cfg.dataset.corpus_dir);
    s.files = files.size();
    auto ingested = ingest_corpus(files, cfg.dataset.spec.source);
    for (const auto& f : ingested.failures) log << "skipped " << f.path.string() << ": " << f.reason << '\n';
    s.ingest_failures = ingested.failures.size();

    auto dataset = assemble_dataset(ingested.documents, cfg.dataset.spec);
    write_dataset(dataset, cfg.dataset.path);
    s.dir = cfg.dataset.path;
    s.n_member = dataset.n_member;
    s.n_non_member = dataset.n_non_member;
    log << "dataset " << cfg.dataset.name << ": " << s.files << " files, " << dataset.docs_considered
        << " in window, " << dataset.docs_without_chunk << " without an eligible chunk; " << s.n_member
        << " member + " << s.n_non_member << " non-member chunks -> " << s.dir.string() << '\n';
    return s;
}

// ---- paraphrase ---------------------------------------------------------------------

ParaphraseSummary cmd_paraphrase(const ExperimentConfig& cfg, std::ostream& log,
                                 std::shared_ptr<HttpTransport> transport) {
    const auto dataset = read_dataset(cfg.dataset.path);
    ParaphraseStore store(cfg.paraphrase_cache);

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < dataset.chunks.size(); ++i)
        if (!store.contains(dataset.chunks[i].chunk_id)) todo.push_back(i);

    ParaphraseSummary s;
    s.already_cached = dataset.chunks.size() - todo.size();
    if (todo.empty()) {
        log << "paraphrases: all " << s.already_cached << " chunks cached\n";
        return s;
    }

    auto gateway = make_gateway(cfg, cfg.paraphrase_model, std::move(transport));
    const auto templates = load_templates(cfg);

    const auto n = todo.size();
    std::vector<std::optional<ParaphraseSet>> results(n);
    std::vector<std::string> errors(n);
    std::vector<char> done(n, 0);
    std::vector<std::exception_ptr> fatal(n);
    std::mutex commit_mutex;
    std::size_t next = 0;

    // Results are appended in dataset order as soon as a prefix is complete,
    // so the cache file is deterministic and survives interruption.
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.workers)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
        const auto idx = static_cast<std::size_t>(k);
        try {
            results[idx] = generate_paraphrases(dataset.chunks[todo[idx]], *gateway, cfg.paraphrase_model.id,
                                                templates, cfg.paraphrase_model.params);
        } catch (const AuthError&) {
            fatal[idx] = std::current_exception();
        } catch (const std::exception& e) {
            errors[idx] = error_text(e);
        }
        std::lock_guard lock(commit_mutex);
        done[idx] = 1;
        try {
            for (; next < n && done[next]; ++next)
                if (results[next]) store.append(*results[next]);
        } catch (const std::exception&) {
            fatal[idx] = std::current_exception();
        }
    }
    for (const auto& f : fatal)
        if (f) std::rethrow_exception(f);

    for (std::size_t k = 0; k < n; ++k) {
        if (results[k]) {
            ++s.generated;
        } else {
            ++s.failed;
            log << "paraphrase failed for " << dataset.chunks[todo[k]].chunk_id << ": " << errors[k] << '\n';
        }
    }
    s.backend_calls = gateway->backend_calls();
    log << "paraphrases: " << s.generated << " generated, " << s.already_cached << " already cached, "
        << s.failed << " failed, " << s.backend_calls << " backend calls\n";
    return s;
}

// ---- run ------------------------------------------------------------------------------

RunSummary cmd_run(const ExperimentConfig& cfg, std::ostream& log, std::shared_ptr<HttpTransport> transport) {
    const auto dataset = read_dataset(cfg.dataset.path);
    const auto templates = load_templates(cfg);
    const bool needs_paraphrases = cfg.method == Method::decop || cfg.method == Method::familiarity;

    std::optional<ParaphraseStore> store;
    std::string paraphrase_digest;
    if (needs_paraphrases) {
        if (!std::filesystem::exists(cfg.paraphrase_cache))
            throw FatalConfigError("paraphrase cache '" + cfg.paraphrase_cache.string() +
                                   "' not found; run the paraphrase step first");
        store.emplace(cfg.paraphrase_cache);
        std::string all;
        for (const auto& c : dataset.chunks)
            if (const auto* p = store->find(c.chunk_id)) all += paraphrase_to_json_line(*p) + '\n';
        paraphrase_digest = sha256_hex(all);
    }

    RunManifest manifest;
    manifest.started_at = utc_now();
    manifest.content = json{
        {"kind", "run"},
        {"tool_version", kToolVersion},
        {"dataset", {{"name", cfg.dataset.name}, {"manifest_sha256", sha256_hex(dataset_manifest_json(dataset))}}},
        {"method", to_string(cfg.method)},
        {"variant", cfg.variant.tag(cfg.method)},
        {"model_id", cfg.model.id},
        {"templates", templates.hashes()},
        {"paraphrases_sha256", paraphrase_digest},
        {"seeds", {{"seed", cfg.seed}, {"dataset", dataset.spec.seed}, {"oracle", cfg.model.oracle.seed}}},
        {"cache_mode", to_string(cfg.cache_mode)},
        {"config", substantive_json(cfg)}};

    auto gateway = make_gateway(cfg, cfg.model, std::move(transport));
    AttackContext ctx;
    ctx.gateway = gateway.get();
    ctx.templates = &templates;
    ctx.model_id = cfg.model.id;
    ctx.params = cfg.model.params;
    ctx.system_prompt = cfg.model.system_prompt;
    ctx.source = dataset.spec.source;
    ctx.dataset = cfg.dataset.name;

    std::vector<json> instances;
    RunOptions opts;
    opts.seed = cfg.seed;
    opts.paraphrases = store ? &*store : nullptr;
    opts.workers = cfg.workers;
    opts.instances = &instances;

    auto outcomes = run_method_over_dataset(dataset, cfg.method, cfg.variant, ctx, opts);
    manifest.finished_at = utc_now();

    RunSummary s;
    s.manifest_id = manifest.id();
    s.dir = run_directory(cfg.out, manifest);
    s.outcomes = s.dir / "outcomes.jsonl";
    s.total = outcomes.size();
    s.backend_calls = gateway->backend_calls();

    std::map<std::string, std::size_t> by_kind;
    for (const auto& o : outcomes)
        if (o.error) ++by_kind[*o.error];
    for (const auto& [k, v] : by_kind) s.errors += v;

    write_outcomes(outcomes, s.outcomes, s.manifest_id);
    std::string inst;
    for (const auto& j : instances) inst += j.dump() + '\n';
    write_text_file(s.dir / "instances.jsonl", inst);
    auto mj = manifest.to_json();
    mj["locations"] = json{{"dataset", cfg.dataset.path.string()},
                           {"cache", cfg.cache_path.string()},
                           {"paraphrase_cache", cfg.paraphrase_cache.string()},
                           {"out", cfg.out.string()}};
    write_text_file(s.dir / "manifest.json", mj.dump(2) + '\n');

    log << to_string(cfg.method) << " [" << cfg.variant.tag(cfg.method) << "] on " << cfg.model.id << ": "
        << s.total << " outcomes, " << s.errors << " with errors, " << s.backend_calls << " backend calls -> "
        << s.outcomes.string() << '\n';
    for (const auto& [k, v] : by_kind) log << "  " << k << ": " << v << '\n';
    return s;
}

// ---- evaluate -----------------------------------------------------------------------

EvaluateSummary cmd_evaluate(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& outcome_files,
                             std::ostream& log) {
    if (outcome_files.empty()) throw FatalConfigError("evaluate needs at least one outcome file");

    using Key = std::tuple<std::string, std::string, std::string, std::string>;  // dataset, model, method, variant
    std::map<Key, std::vector<AttackOutcome>> groups;
    std::vector<json> inputs;
    for (const auto& path : outcome_files) {
        auto file = read_outcomes(path);
        inputs.push_back({{"manifest_id", file.manifest_id}, {"sha256", sha256_hex(read_text_file(path))}});
        std::map<Key, std::vector<AttackOutcome>> local;
        for (auto& o : file.outcomes)
            local[{o.dataset, o.model_id, std::string(to_string(o.method)), o.variant}].push_back(std::move(o));
        for (auto& [k, v] : local) {
            if (groups.contains(k))
                throw FatalConfigError("outcome set " + std::get<2>(k) + " [" + std::get<3>(k) + "] for " +
                                       std::get<1>(k) + " supplied twice");
            groups.emplace(k, std::move(v));
        }
    }
    std::sort(inputs.begin(), inputs.end(),
              [](const json& a, const json& b) { return a["sha256"].get<std::string>() < b["sha256"].get<std::string>(); });

    RunManifest manifest;
    manifest.started_at = utc_now();
    manifest.content = json{{"kind", "evaluate"}, {"tool_version", kToolVersion}, {"inputs", inputs}};
    const auto id = manifest.id();

    EvaluateSummary s;
    s.manifest_id = id;
    s.dir = cfg.out / "eval" / id;

    std::vector<MetricsReport> reports;
    for (const auto& [k, v] : groups) reports.push_back(compute_report(v));
    std::stable_sort(reports.begin(), reports.end(), [](const MetricsReport& a, const MetricsReport& b) {
        return std::tie(a.dataset, a.model_id, a.method, a.variant) <
               std::tie(b.dataset, b.model_id, b.method, b.variant);
    });

    write_reports(reports, s.dir / "metrics.jsonl", id);
    for (auto layout : {TableLayout::auc, TableLayout::tpr_fpr, TableLayout::accuracy}) {
        write_metrics_table(reports, layout, s.dir / (std::string(to_string(layout)) + ".csv"), id);
    }
    if (std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.lcs.has_value(); }))
        write_metrics_table(reports, TableLayout::lcs, s.dir / "lcs.csv", id);

    // consensus grid per dataset over the predicting outcome sets
    std::map<std::string, std::map<std::string, std::vector<std::vector<AttackOutcome>>>> per_dataset;
    for (const auto& [k, v] : groups)
        if (outcome_predicts(v.front())) per_dataset[std::get<0>(k)][std::get<1>(k)].push_back(v);
    for (auto& [dataset, per_model] : per_dataset) {
        std::erase_if(per_model, [](const auto& kv) { return kv.second.size() < 2; });
        if (per_model.empty()) continue;
        auto grid = agreement_matrix(per_model);
        auto path = s.dir / ("heatmap_" + dataset + ".csv");
        write_agreement_heatmap_data(grid, path, id);
        s.heatmaps.push_back(path);
    }

    manifest.finished_at = utc_now();
    write_manifest(manifest, s.dir / "manifest.json");
    s.reports = std::move(reports);

    log << "evaluated " << s.reports.size() << " outcome sets -> " << s.dir.string() << '\n';
    for (const auto& r : s.reports) {
        log << "  " << r.dataset << " " << r.model_id << " " << to_string(r.method) << " [" << r.variant
            << "] auc=" << format_fixed3(r.auc);
        if (r.tpr) log << " tpr=" << format_fixed3(*r.tpr) << " fpr=" << format_fixed3(*r.fpr);
        log << " acc_m=" << format_fixed3(r.acc_member) << " acc_nm=" << format_fixed3(r.acc_nonmember)
            << " errors=" << r.n_errors << '\n';
    }
    return s;
}

// ---- report ---------------------------------------------------------------------------

std::vector<std::filesystem::path> cmd_report(const std::vector<std::filesystem::path>& metrics_files,
                                              const std::vector<TableLayout>& layouts,
                                              const std::filesystem::path& out_dir, std::ostream& log) {
    if (metrics_files.empty()) throw FatalConfigError("report needs at least one metrics file");
    std::vector<MetricsReport> reports;
    std::vector<std::string> digests;
    for (const auto& path : metrics_files) {
        auto r = read_reports(path);
        reports.insert(reports.end(), r.begin(), r.end());
        digests.push_back(sha256_hex(read_text_file(path)));
    }
    std::sort(digests.begin(), digests.end());
    RunManifest manifest;
    manifest.content = json{{"kind", "report"}, {"tool_version", kToolVersion}, {"inputs", digests}};
    const auto id = manifest.id();

    std::vector<std::filesystem::path> written;
    for (auto layout : layouts) {
        auto path = out_dir / (std::string(to_string(layout)) + ".csv");
        write_metrics_table(reports, layout, path, id);
        written.push_back(path);
        log << "wrote " << path.string() << '\n';
    }
    return written;
}

}  // namespace mia
