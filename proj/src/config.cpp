#include "mia/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>

#include "mia/errors.hpp"

namespace mia {

using nlohmann::json;

namespace {

void check_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw FatalConfigError("'" + where + "' must be an object");
}

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    check_object(j, where);
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw FatalConfigError("unknown key '" + where + "." + key + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FatalConfigError("'" + where + "." + key + "' has the wrong type");
    }
}

std::string require_string(const json& j, const std::string& key, const std::string& where) {
    auto s = get_or<std::string>(j, key, where, "");
    if (s.empty()) throw FatalConfigError("'" + where + "." + key + "' is required");
    return s;
}

Date parse_date_field(const std::string& s, bool end_of_month, const std::string& where) {
    try {
        auto d = Date::parse(s);
        if (end_of_month && s.size() == 7) d.day = 31;  // YYYY-MM closes at month end
        return d;
    } catch (const Error& e) {
        throw FatalConfigError("'" + where + "': " + e.what());
    }
}

DateRange parse_window(const json& j, const std::string& where) {
    std::string first, last;
    if (j.is_array() && j.size() == 2 && j[0].is_string() && j[1].is_string()) {
        first = j[0].get<std::string>();
        last = j[1].get<std::string>();
    } else if (j.is_string()) {
        first = last = j.get<std::string>();
    } else if (j.is_object()) {
        check_keys(j, where, {"first", "last"});
        first = require_string(j, "first", where);
        last = require_string(j, "last", where);
    } else {
        throw FatalConfigError("'" + where + "' must be \"YYYY-MM\", [first, last] or {first, last}");
    }
    return {parse_date_field(first, false, where), parse_date_field(last, true, where)};
}

json window_json(const DateRange& r) { return json::array({r.first.to_string(), r.last.to_string()}); }

json params_json(const ParameterProfile& p) {
    return json{{"max_tokens", p.max_tokens},
                {"temperature", p.temperature},
                {"top_p", p.top_p},
                {"top_k", p.top_k ? json(*p.top_k) : json(nullptr)}};
}

ModelConfig parse_model(const json& j, const std::string& where, bool paraphrase, std::uint64_t seed) {
    check_keys(j, where,
               {"id", "provider", "endpoint_url", "auth_env_var", "supports_top_k", "supports_system_role",
                "system_prompt", "params", "oracle"});
    ModelConfig m;
    m.id = require_string(j, "id", where);
    m.provider = require_string(j, "provider", where);

    if (!m.is_oracle()) {
        m.profile = default_provider_profile(parse_wire_format(m.provider));
    } else {
        m.profile.supports_top_k = false;
        m.profile.endpoint_url.clear();
        m.profile.auth_env_var.clear();
    }
    m.profile.endpoint_url = get_or<std::string>(j, "endpoint_url", where, m.profile.endpoint_url);
    m.profile.auth_env_var = get_or<std::string>(j, "auth_env_var", where, m.profile.auth_env_var);
    m.profile.supports_top_k = get_or<bool>(j, "supports_top_k", where, m.profile.supports_top_k);
    m.profile.supports_system_role =
        get_or<bool>(j, "supports_system_role", where, m.profile.supports_system_role);
    if (!m.is_oracle()) {
        if (m.profile.endpoint_url.empty()) throw FatalConfigError("'" + where + ".endpoint_url' is required");
        if (m.profile.auth_env_var.empty()) throw FatalConfigError("'" + where + ".auth_env_var' is required");
    }
    if (j.contains("system_prompt") && !j.at("system_prompt").is_null())
        m.system_prompt = get_or<std::string>(j, "system_prompt", where, "");

    m.params = paraphrase ? ParameterProfile::paraphrase() : ParameterProfile::evaluation(m.profile.supports_top_k);
    if (j.contains("params")) {
        const auto& p = j.at("params");
        const auto w = where + ".params";
        check_keys(p, w, {"max_tokens", "temperature", "top_p", "top_k"});
        m.params.max_tokens = get_or<int>(p, "max_tokens", w, m.params.max_tokens);
        m.params.temperature = get_or<double>(p, "temperature", w, m.params.temperature);
        m.params.top_p = get_or<double>(p, "top_p", w, m.params.top_p);
        if (p.contains("top_k")) {
            if (p.at("top_k").is_null()) m.params.top_k.reset();
            else m.params.top_k = get_or<int>(p, "top_k", w, 0);
        }
    }
    if (!m.profile.supports_top_k) m.params.top_k.reset();
    if (m.params.max_tokens < 1) throw FatalConfigError("'" + where + ".params.max_tokens' must be positive");

    m.oracle.seed = seed;
    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        const auto w = where + ".oracle";
        check_keys(o, w, {"p_member_correct", "p_nonmember_correct", "seed"});
        m.oracle.p_member_correct = get_or<double>(o, "p_member_correct", w, m.oracle.p_member_correct);
        m.oracle.p_nonmember_correct = get_or<double>(o, "p_nonmember_correct", w, m.oracle.p_nonmember_correct);
        m.oracle.seed = get_or<std::uint64_t>(o, "seed", w, m.oracle.seed);
    }
    try {
        m.oracle.validate();
    } catch (const Error& e) {
        throw FatalConfigError("'" + where + ".oracle': " + e.what());
    }
    return m;
}

json model_json(const ModelConfig& m, bool with_locations) {
    json j{{"id", m.id},
           {"provider", m.provider},
           {"supports_top_k", m.profile.supports_top_k},
           {"supports_system_role", m.profile.supports_system_role},
           {"system_prompt", m.system_prompt ? json(*m.system_prompt) : json(nullptr)},
           {"params", params_json(m.params)}};
    if (m.is_oracle())
        j["oracle"] = json{{"p_member_correct", m.oracle.p_member_correct},
                           {"p_nonmember_correct", m.oracle.p_nonmember_correct},
                           {"seed", m.oracle.seed}};
    if (with_locations || !m.is_oracle()) {
        j["endpoint_url"] = m.profile.endpoint_url;
        j["auth_env_var"] = m.profile.auth_env_var;
    }
    return j;
}

json method_json(Method m, const Variant& v) {
    json j{{"name", to_string(m)}};
    switch (m) {
        case Method::ncq: j["mask_mode"] = to_string(v.mask_mode); break;
        case Method::probing:
            j["threshold_tokens"] = v.threshold_tokens;
            j["probing_frame"] = v.probing_framed ? "capability" : "none";
            break;
        case Method::familiarity:
            j["scale"] = to_string(v.scale);
            j["set_size"] = v.set_size;
            j["criterion"] = to_string(v.criterion);
            break;
        default: break;
    }
    return j;
}

json build_json(const ExperimentConfig& c, bool with_locations) {
    json dataset{{"name", c.dataset.name}, {"source", to_string(c.dataset.spec.source)}};
    const auto& s = c.dataset.spec;
    if (c.dataset.has_windows) {
        dataset["member_window"] = window_json(s.member_window);
        dataset["non_member_window"] = window_json(s.non_member_window);
        dataset["target_count_per_class"] = s.target_count_per_class;
        dataset["chunk_len_bounds"] = json::array({s.min_chars, s.max_chars});
        dataset["section_blacklist"] = s.section_blacklist;
        dataset["one_chunk_per_doc"] = s.one_chunk_per_doc;
        dataset["paired_versions"] = s.paired_versions;
        dataset["seed"] = s.seed;
    }
    json j{{"seed", c.seed},
           {"workers", c.workers},
           {"dataset", dataset},
           {"method", method_json(c.method, c.variant)},
           {"model", model_json(c.model, with_locations)},
           {"paraphrase_model", model_json(c.paraphrase_model, with_locations)},
           {"gateway",
            {{"max_in_flight", c.gateway.max_in_flight},
             {"min_request_interval_ms", c.gateway.min_request_interval_ms},
             {"refusal_phrases", c.gateway.refusal_phrases},
             {"max_attempts", c.gateway.retry.max_attempts},
             {"initial_backoff_ms", c.gateway.retry.initial_backoff.count()},
             {"backoff_factor", c.gateway.retry.backoff_factor},
             {"timeout_s", c.gateway.timeout_s}}},
           {"cache", {{"mode", to_string(c.cache_mode)}}}};
    if (with_locations) {
        j["out"] = c.out.string();
        j["templates_dir"] = c.templates_dir ? json(c.templates_dir->string()) : json(nullptr);
        j["dataset"]["path"] = c.dataset.path.string();
        j["dataset"]["corpus_dir"] = c.dataset.corpus_dir.string();
        j["cache"]["path"] = c.cache_path.string();
        j["paraphrase_cache"] = c.paraphrase_cache.string();
    }
    return j;
}

}  // namespace

ProviderProfile default_provider_profile(WireFormat w) {
    ProviderProfile p;
    p.wire_format = w;
    switch (w) {
        case WireFormat::openai_chat:
            p.endpoint_url = "https://api.openai.com/v1/chat/completions";
            p.auth_env_var = "OPENAI_API_KEY";
            p.supports_top_k = false;
            break;
        case WireFormat::anthropic_messages:
            p.endpoint_url = "https://api.anthropic.com/v1/messages";
            p.auth_env_var = "ANTHROPIC_API_KEY";
            p.supports_top_k = true;
            break;
        case WireFormat::generic_json:
            p.supports_top_k = true;
            break;
    }
    return p;
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"out", "seed", "workers", "templates_dir", "dataset", "method", "model", "paraphrase_model",
                "gateway", "cache", "paraphrase_cache"});
    ExperimentConfig c;
    c.out = get_or<std::string>(j, "out", "config", "out");
    c.seed = get_or<std::uint64_t>(j, "seed", "config", 0);
    c.workers = get_or<int>(j, "workers", "config", 4);
    if (c.workers < 1) throw FatalConfigError("'config.workers' must be positive");
    if (j.contains("templates_dir") && !j.at("templates_dir").is_null())
        c.templates_dir = get_or<std::string>(j, "templates_dir", "config", "");

    // dataset
    const json dj = j.value("dataset", json::object());
    check_keys(dj, "dataset",
               {"name", "path", "corpus_dir", "source", "member_window", "non_member_window",
                "target_count_per_class", "chunk_len_bounds", "section_blacklist", "one_chunk_per_doc",
                "paired_versions", "seed"});
    auto& spec = c.dataset.spec;
    spec.source = parse_source(get_or<std::string>(dj, "source", "dataset", "arxiv"));
    c.dataset.name = get_or<std::string>(dj, "name", "dataset", std::string(to_string(spec.source)));
    c.dataset.path = get_or<std::string>(dj, "path", "dataset", (c.out / "dataset").string());
    c.dataset.corpus_dir = get_or<std::string>(dj, "corpus_dir", "dataset", "");
    spec.paired_versions = get_or<bool>(dj, "paired_versions", "dataset", spec.source == Source::wikipedia);
    spec.one_chunk_per_doc = get_or<bool>(dj, "one_chunk_per_doc", "dataset", true);
    spec.target_count_per_class = get_or<std::size_t>(dj, "target_count_per_class", "dataset",
                                                      spec.source == Source::wikipedia ? 200 : 100);
    if (dj.contains("chunk_len_bounds")) {
        auto b = get_or<std::vector<std::size_t>>(dj, "chunk_len_bounds", "dataset", {});
        if (b.size() != 2) throw FatalConfigError("'dataset.chunk_len_bounds' must be [min, max]");
        spec.min_chars = b[0];
        spec.max_chars = b[1];
    }
    if (dj.contains("section_blacklist"))
        spec.section_blacklist = get_or<std::vector<std::string>>(dj, "section_blacklist", "dataset", {});
    spec.seed = get_or<std::uint64_t>(dj, "seed", "dataset", c.seed);
    const bool has_member = dj.contains("member_window"), has_non = dj.contains("non_member_window");
    if (has_member != has_non)
        throw FatalConfigError("'dataset' needs both member_window and non_member_window");
    if (has_member) {
        spec.member_window = parse_window(dj.at("member_window"), "dataset.member_window");
        spec.non_member_window = parse_window(dj.at("non_member_window"), "dataset.non_member_window");
        c.dataset.has_windows = true;
        spec.validate();
    }

    // method
    const json mj = j.value("method", json::object());
    check_keys(mj, "method",
               {"name", "mask_mode", "threshold_tokens", "probing_frame", "scale", "set_size", "criterion"});
    c.method = parse_method(get_or<std::string>(mj, "name", "method", "ncq"));
    if (c.method == Method::paraphrase) throw FatalConfigError("'method.name' must be an attack method");
    auto& v = c.variant;
    v.mask_mode = parse_mask_mode(get_or<std::string>(mj, "mask_mode", "method", "single"));
    v.threshold_tokens = get_or<std::size_t>(mj, "threshold_tokens", "method", kDefaultProbeThreshold);
    if (v.threshold_tokens < 1) throw FatalConfigError("'method.threshold_tokens' must be at least 1");
    auto frame = get_or<std::string>(mj, "probing_frame", "method", "capability");
    if (frame != "capability" && frame != "none")
        throw FatalConfigError("'method.probing_frame' must be \"capability\" or \"none\"");
    v.probing_framed = frame == "capability";
    v.scale = parse_rank_scale(get_or<std::string>(mj, "scale", "method", "rank_1_to_3"));
    v.set_size = get_or<int>(mj, "set_size", "method", 3);
    if (v.set_size != 3 && v.set_size != 5) throw FatalConfigError("'method.set_size' must be 3 or 5");
    if (v.scale == RankScale::rank_1_to_3 && v.set_size != 3)
        throw FatalConfigError("'method.scale' rank_1_to_3 requires set_size 3");
    v.criterion = parse_score_criterion(get_or<std::string>(mj, "criterion", "method", "separation"));

    // models
    if (!j.contains("model")) throw FatalConfigError("'model' is required");
    c.model = parse_model(j.at("model"), "model", false, c.seed);
    json pj = j.value("paraphrase_model",
                      json{{"id", "claude-3-haiku-20240307"}, {"provider", "anthropic_messages"}});
    c.paraphrase_model = parse_model(pj, "paraphrase_model", true, c.seed);

    // gateway
    const json gj = j.value("gateway", json::object());
    check_keys(gj, "gateway",
               {"max_in_flight", "min_request_interval_ms", "refusal_phrases", "max_attempts",
                "initial_backoff_ms", "backoff_factor", "timeout_s"});
    auto& g = c.gateway;
    g.max_in_flight = get_or<int>(gj, "max_in_flight", "gateway", 4);
    g.min_request_interval_ms = get_or<int>(gj, "min_request_interval_ms", "gateway", 0);
    g.refusal_phrases = get_or<std::vector<std::string>>(gj, "refusal_phrases", "gateway", g.refusal_phrases);
    g.retry.max_attempts = get_or<int>(gj, "max_attempts", "gateway", 3);
    g.retry.initial_backoff =
        std::chrono::milliseconds(get_or<long long>(gj, "initial_backoff_ms", "gateway", 1000));
    g.retry.backoff_factor = get_or<double>(gj, "backoff_factor", "gateway", 2.0);
    g.timeout_s = get_or<int>(gj, "timeout_s", "gateway", 120);
    if (g.max_in_flight < 1 || g.max_in_flight > 1024)
        throw FatalConfigError("'gateway.max_in_flight' must be in [1, 1024]");
    if (g.retry.max_attempts < 1) throw FatalConfigError("'gateway.max_attempts' must be positive");
    if (g.min_request_interval_ms < 0 || g.timeout_s < 1)
        throw FatalConfigError("'gateway' intervals must be non-negative");

    // caches
    const json cj = j.value("cache", json::object());
    check_keys(cj, "cache", {"mode", "path"});
    c.cache_mode = parse_cache_mode(get_or<std::string>(cj, "mode", "cache", "record"));
    c.cache_path = get_or<std::string>(cj, "path", "cache", (c.out / "cache" / "responses.jsonl").string());
    c.paraphrase_cache =
        get_or<std::string>(j, "paraphrase_cache", "config", (c.out / "paraphrases.jsonl").string());
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FatalConfigError("cannot read config '" + path.string() + "'");
    auto j = json::parse(in, nullptr, false, true);
    if (j.is_discarded()) throw FatalConfigError("config '" + path.string() + "' is not valid JSON");
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) { return build_json(c, true); }

json substantive_json(const ExperimentConfig& c) { return build_json(c, false); }

}  // namespace mia
