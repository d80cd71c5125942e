#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mia/corpus.hpp"
#include "mia/method.hpp"

namespace mia {

// ---- exchange types -------------------------------------------------------------

enum class FinishReason { stop, length, error, refusal };
std::string_view to_string(FinishReason f);
FinishReason parse_finish_reason(std::string_view s);

/// Sampling parameters of one model. top_k is absent for providers that do
/// not take it.
struct ParameterProfile {
    int max_tokens = 200;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<int> top_k;

    /// Attacked models: 200 tokens, temperature 0, top_p 1, top_k 50 where supported.
    static ParameterProfile evaluation(bool supports_top_k);
    /// Paraphrase generator: 600 tokens, temperature 1, top_p 0.9.
    static ParameterProfile paraphrase();
};

struct CompletionRequest {
    std::string model_id;
    std::optional<std::string> system_prompt;
    std::string user_prompt;
    int max_tokens = 200;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<int> top_k;
    /// Distinguishes deliberate re-asks of an identical prompt. Never sent on
    /// the wire; folded into the key only when non-zero.
    int nonce = 0;

    static CompletionRequest make(std::string model_id, const ParameterProfile& params,
                                  std::string user_prompt,
                                  std::optional<std::string> system_prompt = std::nullopt);
};

/// Canonical serialization: keys sorted, reals printed in shortest
/// round-trip form, absent fields as null.
std::string canonical_request(const CompletionRequest& r);

/// SHA-256 (hex) of canonical_request().
std::string hash_request(const CompletionRequest& r);

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;
    std::int64_t latency_ms = 0;
    bool from_cache = false;
};

/// What the attack knows about the instance behind a request. Real providers
/// ignore it; the scripted oracle answers from it.
struct InstanceMetadata {
    std::string chunk_id;
    Method method = Method::ncq;
    MembershipLabel label = MembershipLabel::member;
    std::vector<std::string> gold_names;      // ncq
    char gold_letter = 0;                     // decop
    std::string gold_suffix;                  // probing
    std::vector<Category> gold_categories;    // familiarity, per presented position
    RankScale scale = RankScale::rank_1_to_3; // familiarity
    std::string source_text;                  // paraphrase
};

class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;
    virtual CompletionResponse complete(const CompletionRequest& request,
                                        const InstanceMetadata& meta) = 0;
};

// ---- providers -------------------------------------------------------------------

enum class WireFormat { openai_chat, anthropic_messages, generic_json };
std::string_view to_string(WireFormat w);
WireFormat parse_wire_format(std::string_view s);

struct ProviderProfile {
    WireFormat wire_format = WireFormat::openai_chat;
    std::string endpoint_url;
    std::string auth_env_var;
    bool supports_top_k = false;
    bool supports_system_role = true;
};

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lower-cased names
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// Throws TransportError when no HTTP response was obtained.
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib transport with TLS support.
class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120));
    HttpResponse post(const HttpRequest& request) override;

private:
    std::chrono::seconds timeout_;
};

/// JSON body for the provider. Parameters the provider does not accept are
/// left out, never zero-filled.
std::string encode_payload(const CompletionRequest& r, const ProviderProfile& p);
std::vector<std::pair<std::string, std::string>> request_headers(const ProviderProfile& p,
                                                                 const std::string& credential);
/// Throws ProviderError on a body without completion text.
CompletionResponse decode_response(WireFormat format, std::string_view body);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_factor = 2.0;
    std::chrono::milliseconds max_retry_hint{60000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// One provider endpoint over HTTP with bounded retries.
class HttpBackend final : public CompletionBackend {
public:
    HttpBackend(ProviderProfile profile, std::shared_ptr<HttpTransport> transport,
                RetryPolicy retry = {}, Sleeper sleeper = real_sleeper());

    CompletionResponse complete(const CompletionRequest& request,
                                const InstanceMetadata& meta) override;
    CompletionResponse complete(const CompletionRequest& request);

    const ProviderProfile& profile() const { return profile_; }

private:
    ProviderProfile profile_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    Sleeper sleep_;
};

// ---- scripted oracle --------------------------------------------------------------

struct OracleSpec {
    double p_member_correct = 0.9;
    double p_nonmember_correct = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Simulated model: answers correctly with the class probability, drawn from
/// a stream keyed by (seed, chunk_id, method). Wrong answers keep the valid
/// output format.
CompletionResponse oracle_complete(const CompletionRequest& request, const OracleSpec& spec,
                                   const InstanceMetadata& meta);

class OracleBackend final : public CompletionBackend {
public:
    explicit OracleBackend(OracleSpec spec) : spec_(spec) { spec_.validate(); }
    CompletionResponse complete(const CompletionRequest& request,
                                const InstanceMetadata& meta) override {
        return oracle_complete(request, spec_, meta);
    }

private:
    OracleSpec spec_;
};

// ---- record / replay cache ---------------------------------------------------------

enum class CacheMode { record, replay, replay_strict };
std::string_view to_string(CacheMode m);
CacheMode parse_cache_mode(std::string_view s);

/// Line-delimited (request_key, canonical request, response, timestamp)
/// records. Concurrent lookups, exclusive appends; every append is flushed so
/// an interrupted run resumes from what was recorded.
class ResponseCache {
public:
    ResponseCache(std::filesystem::path path, CacheMode mode);

    CacheMode mode() const { return mode_; }
    const std::filesystem::path& path() const { return path_; }
    std::optional<CompletionResponse> lookup(const std::string& key) const;
    void append(const CompletionRequest& request, const std::string& key,
                const CompletionResponse& response);
    std::size_t size() const;

private:
    std::filesystem::path path_;
    CacheMode mode_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, CompletionResponse> entries_;
    std::ofstream out_;
};

// ---- gateway ------------------------------------------------------------------

std::vector<std::string> default_refusal_phrases();

struct GatewayOptions {
    int max_in_flight = 4;
    /// Minimum spacing between backend calls; zero disables the ceiling.
    std::chrono::milliseconds min_request_interval{0};
    std::vector<std::string> refusal_phrases = default_refusal_phrases();
};

/// True when the trimmed text opens with one of the phrases (case-insensitive).
bool matches_refusal(std::string_view text, const std::vector<std::string>& phrases);

/// Backend + optional cache + concurrency bound + refusal classification.
/// Safe for concurrent use.
class Gateway {
public:
    Gateway(std::shared_ptr<CompletionBackend> backend, std::shared_ptr<ResponseCache> cache,
            GatewayOptions options = {});

    /// Cached completion: a hit never reaches the backend; replay-strict
    /// misses throw CacheMiss.
    CompletionResponse complete(const CompletionRequest& request, const InstanceMetadata& meta);

    std::size_t backend_calls() const { return backend_calls_.load(); }
    const std::shared_ptr<ResponseCache>& cache() const { return cache_; }

private:
    void pace();

    std::shared_ptr<CompletionBackend> backend_;
    std::shared_ptr<ResponseCache> cache_;
    GatewayOptions options_;
    std::counting_semaphore<1024> in_flight_;
    std::mutex pace_mutex_;
    std::chrono::steady_clock::time_point next_slot_{};
    std::atomic<std::size_t> backend_calls_{0};
};

}  // namespace mia
