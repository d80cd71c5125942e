#include "mia/gateway.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include <json.hpp>

#include "mia/errors.hpp"
#include "mia/hash.hpp"
#include "mia/text.hpp"

namespace mia {

using nlohmann::json;

std::string_view to_string(FinishReason f) {
    switch (f) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
        case FinishReason::refusal: return "refusal";
    }
    return "?";
}

FinishReason parse_finish_reason(std::string_view s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    if (s == "error") return FinishReason::error;
    if (s == "refusal") return FinishReason::refusal;
    throw ParseError("unknown finish reason '" + std::string(s) + "'");
}

std::string_view to_string(WireFormat w) {
    switch (w) {
        case WireFormat::openai_chat: return "openai_chat";
        case WireFormat::anthropic_messages: return "anthropic_messages";
        case WireFormat::generic_json: return "generic_json";
    }
    return "?";
}

WireFormat parse_wire_format(std::string_view s) {
    if (s == "openai_chat") return WireFormat::openai_chat;
    if (s == "anthropic_messages") return WireFormat::anthropic_messages;
    if (s == "generic_json") return WireFormat::generic_json;
    throw FatalConfigError("unknown wire format '" + std::string(s) + "'");
}

std::string_view to_string(CacheMode m) {
    switch (m) {
        case CacheMode::record: return "record";
        case CacheMode::replay: return "replay";
        case CacheMode::replay_strict: return "replay-strict";
    }
    return "?";
}

CacheMode parse_cache_mode(std::string_view s) {
    if (s == "record") return CacheMode::record;
    if (s == "replay") return CacheMode::replay;
    if (s == "replay-strict" || s == "replay_strict") return CacheMode::replay_strict;
    throw FatalConfigError("unknown cache mode '" + std::string(s) + "'");
}

ParameterProfile ParameterProfile::evaluation(bool supports_top_k) {
    ParameterProfile p;
    p.max_tokens = 200;
    p.temperature = 0.0;
    p.top_p = 1.0;
    if (supports_top_k) p.top_k = 50;
    return p;
}

ParameterProfile ParameterProfile::paraphrase() {
    ParameterProfile p;
    p.max_tokens = 600;
    p.temperature = 1.0;
    p.top_p = 0.9;
    return p;
}

CompletionRequest CompletionRequest::make(std::string model_id, const ParameterProfile& params,
                                          std::string user_prompt,
                                          std::optional<std::string> system_prompt) {
    CompletionRequest r;
    r.model_id = std::move(model_id);
    r.system_prompt = std::move(system_prompt);
    r.user_prompt = std::move(user_prompt);
    r.max_tokens = params.max_tokens;
    r.temperature = params.temperature;
    r.top_p = params.top_p;
    r.top_k = params.top_k;
    return r;
}

// ---- request identity ----------------------------------------------------------------

namespace {

std::string format_real(double v) {
    if (v == 0.0) v = 0.0;  // folds -0
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string quote(const std::string& s) { return json(s).dump(); }

}  // namespace

std::string canonical_request(const CompletionRequest& r) {
    std::string s = "{";
    s += "\"max_tokens\":" + std::to_string(r.max_tokens);
    s += ",\"model_id\":" + quote(r.model_id);
    if (r.nonce != 0) s += ",\"nonce\":" + std::to_string(r.nonce);
    s += ",\"system_prompt\":" + (r.system_prompt ? quote(*r.system_prompt) : "null");
    s += ",\"temperature\":" + format_real(r.temperature);
    s += ",\"top_k\":" + (r.top_k ? std::to_string(*r.top_k) : "null");
    s += ",\"top_p\":" + format_real(r.top_p);
    s += ",\"user_prompt\":" + quote(r.user_prompt);
    s += "}";
    return s;
}

std::string hash_request(const CompletionRequest& r) { return sha256_hex(canonical_request(r)); }

// ---- wire formats ----------------------------------------------------------------

std::string encode_payload(const CompletionRequest& r, const ProviderProfile& p) {
    json body;
    body["model"] = r.model_id;
    body["max_tokens"] = r.max_tokens;
    body["temperature"] = r.temperature;
    body["top_p"] = r.top_p;
    if (r.top_k && p.supports_top_k) body["top_k"] = *r.top_k;

    std::string user = r.user_prompt;
    std::optional<std::string> system = r.system_prompt;
    if (system && !p.supports_system_role) {
        user = *system + "\n\n" + user;
        system.reset();
    }

    json messages = json::array();
    if (p.wire_format == WireFormat::anthropic_messages) {
        if (system) body["system"] = *system;
    } else if (system) {
        messages.push_back({{"role", "system"}, {"content", *system}});
    }
    messages.push_back({{"role", "user"}, {"content", user}});
    body["messages"] = messages;
    return body.dump();
}

std::vector<std::pair<std::string, std::string>> request_headers(const ProviderProfile& p,
                                                                 const std::string& credential) {
    if (p.wire_format == WireFormat::anthropic_messages)
        return {{"x-api-key", credential}, {"anthropic-version", "2023-06-01"}};
    return {{"Authorization", "Bearer " + credential}};
}

namespace {

std::string excerpt(std::string_view body) {
    constexpr std::size_t kMax = 300;
    return std::string(body.substr(0, kMax));
}

}  // namespace

CompletionResponse decode_response(WireFormat format, std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ProviderError(200, "non-JSON body: " + excerpt(body));
    CompletionResponse r;
    if (format == WireFormat::anthropic_messages) {
        if (!j.contains("content") || !j["content"].is_array())
            throw ProviderError(200, "missing content: " + excerpt(body));
        for (const auto& block : j["content"])
            if (block.value("type", "") == "text") r.text += block.value("text", "");
        auto reason = j.value("stop_reason", std::string("end_turn"));
        if (reason == "max_tokens") r.finish_reason = FinishReason::length;
        else if (reason == "refusal") r.finish_reason = FinishReason::refusal;
        else r.finish_reason = FinishReason::stop;
        return r;
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw ProviderError(200, "missing choices: " + excerpt(body));
    const auto& choice = j["choices"][0];
    const auto& message = choice.contains("message") ? choice["message"] : json::object();
    if (message.contains("content") && message["content"].is_string())
        r.text = message["content"].get<std::string>();
    else if (choice.contains("text") && choice["text"].is_string())
        r.text = choice["text"].get<std::string>();
    auto reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                      ? choice["finish_reason"].get<std::string>()
                      : std::string("stop");
    if (reason == "length") r.finish_reason = FinishReason::length;
    else if (reason == "content_filter") r.finish_reason = FinishReason::refusal;
    else r.finish_reason = FinishReason::stop;
    if (message.contains("refusal") && message["refusal"].is_string()) {
        r.text = message["refusal"].get<std::string>();
        r.finish_reason = FinishReason::refusal;
    }
    return r;
}

// ---- HTTP backend ---------------------------------------------------------------

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

HttpBackend::HttpBackend(ProviderProfile profile, std::shared_ptr<HttpTransport> transport,
                         RetryPolicy retry, Sleeper sleeper)
    : profile_(std::move(profile)),
      transport_(std::move(transport)),
      retry_(retry),
      sleep_(std::move(sleeper)) {}

CompletionResponse HttpBackend::complete(const CompletionRequest& request, const InstanceMetadata&) {
    return complete(request);
}

namespace {

std::optional<std::chrono::milliseconds> retry_hint(const HttpResponse& r) {
    auto parse = [](const std::string& v) -> std::optional<double> {
        char* end = nullptr;
        double d = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || !std::isfinite(d) || d < 0) return std::nullopt;
        return d;
    };
    if (auto it = r.headers.find("retry-after-ms"); it != r.headers.end())
        if (auto v = parse(it->second)) return std::chrono::milliseconds(static_cast<long>(*v));
    if (auto it = r.headers.find("retry-after"); it != r.headers.end())
        if (auto v = parse(it->second)) return std::chrono::milliseconds(static_cast<long>(*v * 1000));
    return std::nullopt;
}

}  // namespace

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    const char* cred = profile_.auth_env_var.empty() ? nullptr : std::getenv(profile_.auth_env_var.c_str());
    if (cred == nullptr || *cred == '\0')
        throw AuthError("credential variable '" + profile_.auth_env_var + "' is not set");

    HttpRequest http{profile_.endpoint_url, request_headers(profile_, cred),
                     encode_payload(request, profile_)};

    enum class Last { none, transport, rate_limit, server } last = Last::none;
    std::string last_detail;
    int last_status = 0;
    auto backoff = retry_.initial_backoff;

    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        std::optional<std::chrono::milliseconds> hint;
        auto start = std::chrono::steady_clock::now();
        try {
            HttpResponse resp = transport_->post(http);
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            if (resp.status >= 200 && resp.status < 300) {
                auto out = decode_response(profile_.wire_format, resp.body);
                out.latency_ms = elapsed.count();
                return out;
            }
            if (resp.status == 401 || resp.status == 403)
                throw AuthError("provider rejected credential (HTTP " + std::to_string(resp.status) +
                                "): " + excerpt(resp.body));
            if (resp.status == 429) {
                last = Last::rate_limit;
                hint = retry_hint(resp);
            } else if (resp.status == 408 || resp.status >= 500) {
                last = Last::server;
                hint = retry_hint(resp);
            } else {
                throw ProviderError(resp.status, excerpt(resp.body));
            }
            last_status = resp.status;
            last_detail = excerpt(resp.body);
        } catch (const TransportError& e) {
            last = Last::transport;
            last_detail = e.what();
        }
        if (attempt < retry_.max_attempts) {
            auto wait = hint ? std::min(*hint, retry_.max_retry_hint) : backoff;
            sleep_(wait);
            backoff = std::chrono::milliseconds(
                static_cast<long>(static_cast<double>(backoff.count()) * retry_.backoff_factor));
        }
    }
    switch (last) {
        case Last::rate_limit:
            throw RateLimitExhausted("rate limited on all " + std::to_string(retry_.max_attempts) +
                                     " attempts: " + last_detail);
        case Last::transport:
            throw TransportError("transport failed on all attempts: " + last_detail);
        default:
            throw ProviderError(last_status, last_detail);
    }
}

void OracleSpec::validate() const {
    auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!ok(p_member_correct) || !ok(p_nonmember_correct))
        throw FatalConfigError("oracle probabilities must lie in [0, 1]");
}

// ---- cache --------------------------------------------------------------------

namespace {

std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path, CacheMode mode)
    : path_(std::move(path)), mode_(mode) {
    if (mode_ == CacheMode::replay_strict && !std::filesystem::is_regular_file(path_))
        throw FatalConfigError("replay-strict cache '" + path_.string() + "' does not exist");
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (in && std::getline(in, line)) {
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("key")) continue;  // torn tail
        try {
            CompletionResponse r;
            const auto& resp = j.at("response");
            r.text = resp.at("text").get<std::string>();
            r.finish_reason = parse_finish_reason(resp.at("finish_reason").get<std::string>());
            r.latency_ms = resp.value("latency_ms", std::int64_t{0});
            entries_.try_emplace(j.at("key").get<std::string>(), std::move(r));
        } catch (const std::exception&) {
            continue;
        }
    }
    if (mode_ == CacheMode::record) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        bool torn = false;
        if (std::filesystem::is_regular_file(path_) && std::filesystem::file_size(path_) > 0) {
            std::ifstream tail(path_, std::ios::binary);
            tail.seekg(-1, std::ios::end);
            torn = tail.get() != '\n';
        }
        out_.open(path_, std::ios::binary | std::ios::app);
        if (!out_) throw IoError("cannot open cache '" + path_.string() + "' for appending");
        if (torn) out_ << '\n';  // keep the next record on its own line
    }
}

std::optional<CompletionResponse> ResponseCache::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::append(const CompletionRequest& request, const std::string& key,
                           const CompletionResponse& response) {
    if (mode_ != CacheMode::record) return;
    json rec{{"key", key},
             {"request", json::parse(canonical_request(request))},
             {"response",
              {{"text", response.text},
               {"finish_reason", to_string(response.finish_reason)},
               {"latency_ms", response.latency_ms}}},
             {"timestamp", utc_timestamp()}};
    std::unique_lock lock(mutex_);
    if (!entries_.try_emplace(key, response).second) return;
    out_ << rec.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("cache append failed for '" + path_.string() + "'");
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

// ---- gateway ------------------------------------------------------------------

std::vector<std::string> default_refusal_phrases() {
    return {"I cannot",      "I can't",      "I can not",  "I'm sorry",  "I am sorry",
            "I apologize",   "I'm unable",   "I am unable", "I'm not able", "I am not able",
            "I won't",       "I will not",   "Sorry,",      "As an AI"};
}

bool matches_refusal(std::string_view t, const std::vector<std::string>& phrases) {
    t = text::trim(t);
    while (!t.empty() && (t.front() == '"' || t.front() == '*')) t.remove_prefix(1);
    // typographic apostrophe -> ASCII
    std::string norm = text::replace_all(std::string(t.substr(0, 64)), "\xE2\x80\x99", "'");
    for (const auto& p : phrases)
        if (text::starts_with_icase(norm, p)) return true;
    return false;
}

Gateway::Gateway(std::shared_ptr<CompletionBackend> backend, std::shared_ptr<ResponseCache> cache,
                 GatewayOptions options)
    : backend_(std::move(backend)),
      cache_(std::move(cache)),
      options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 1024)) {}

void Gateway::pace() {
    if (options_.min_request_interval.count() <= 0) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(pace_mutex_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + options_.min_request_interval;
    }
    std::this_thread::sleep_until(slot);
}

CompletionResponse Gateway::complete(const CompletionRequest& request, const InstanceMetadata& meta) {
    auto classify = [&](CompletionResponse r) {
        if (r.finish_reason == FinishReason::stop && matches_refusal(r.text, options_.refusal_phrases))
            r.finish_reason = FinishReason::refusal;
        return r;
    };

    const std::string key = hash_request(request);
    if (cache_) {
        if (auto hit = cache_->lookup(key)) {
            hit->from_cache = true;
            return classify(std::move(*hit));
        }
        if (cache_->mode() == CacheMode::replay_strict)
            throw CacheMiss("no cached response for request " + key.substr(0, 16) + " (chunk " +
                            meta.chunk_id + ")");
    }

    CompletionResponse resp;
    {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{in_flight_};
        pace();
        ++backend_calls_;
        resp = backend_->complete(request, meta);
    }
    resp.from_cache = false;
    if (cache_ && resp.finish_reason != FinishReason::error) cache_->append(request, key, resp);
    return classify(std::move(resp));
}

}  // namespace mia
