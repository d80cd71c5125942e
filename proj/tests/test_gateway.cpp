#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "mia/errors.hpp"
#include "mia/gateway.hpp"
#include "mia/hash.hpp"
#include "support/synth.hpp"

using namespace mia;
using nlohmann::json;

namespace {

CompletionRequest request(std::string prompt = "hello") {
    return CompletionRequest::make("model-x", ParameterProfile::evaluation(true), std::move(prompt));
}

class Echo final : public CompletionBackend {
public:
    CompletionResponse complete(const CompletionRequest& r, const InstanceMetadata&) override {
        ++calls;
        return {"echo: " + r.user_prompt, FinishReason::stop, 1, false};
    }
    std::atomic<int> calls{0};
};

// Replays a fixed sequence of HTTP responses and records each request.
class FakeTransport final : public HttpTransport {
public:
    explicit FakeTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}
    HttpResponse post(const HttpRequest& r) override {
        requests.push_back(r);
        if (script_.empty()) throw TransportError("connection refused");
        auto next = script_.front();
        if (script_.size() > 1) script_.erase(script_.begin());
        return next;
    }
    std::vector<HttpRequest> requests;

private:
    std::vector<HttpResponse> script_;
};

const char* kOpenAiOk = R"({"choices":[{"message":{"role":"assistant","content":"B"},"finish_reason":"stop"}]})";

ProviderProfile openai_profile() {
    ProviderProfile p;
    p.wire_format = WireFormat::openai_chat;
    p.endpoint_url = "https://example.invalid/v1/chat/completions";
    p.auth_env_var = "MIA_TEST_KEY";
    return p;
}

struct SleepLog {
    std::vector<long> waits;
    Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); };
    }
};

}  // namespace

TEST_CASE("sha256 matches published test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("request hashing is canonical") {
    auto a = request();
    auto b = request();
    CHECK(canonical_request(a) ==
          R"({"max_tokens":200,"model_id":"model-x","system_prompt":null,"temperature":0,"top_k":50,"top_p":1,"user_prompt":"hello"})");
    CHECK(hash_request(a) == hash_request(b));
    CHECK(hash_request(a) == sha256_hex(canonical_request(a)));
    b.nonce = 1;
    CHECK(hash_request(a) != hash_request(b));
    CHECK(canonical_request(b).find("\"nonce\":1") != std::string::npos);
    auto c = request();
    c.temperature = -0.0;
    CHECK(hash_request(a) == hash_request(c));
    c.top_k.reset();
    CHECK(hash_request(a) != hash_request(c));
    c = request();
    c.system_prompt = "be brief";
    CHECK(hash_request(a) != hash_request(c));
}

TEST_CASE("parameter profiles") {
    auto e = ParameterProfile::evaluation(false);
    CHECK(e.max_tokens == 200);
    CHECK(e.temperature == 0.0);
    CHECK(e.top_p == 1.0);
    CHECK_FALSE(e.top_k.has_value());
    CHECK(ParameterProfile::evaluation(true).top_k == 50);
    auto p = ParameterProfile::paraphrase();
    CHECK(p.max_tokens == 600);
    CHECK(p.temperature == 1.0);
    CHECK(p.top_p == doctest::Approx(0.9));
}

TEST_CASE("wire payloads omit unsupported parameters") {
    auto r = request();
    r.system_prompt = "sys";
    auto p = openai_profile();
    auto j = json::parse(encode_payload(r, p));
    CHECK_FALSE(j.contains("top_k"));
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["messages"][1]["content"] == "hello");
    CHECK(j["max_tokens"] == 200);

    p.wire_format = WireFormat::anthropic_messages;
    p.supports_top_k = true;
    j = json::parse(encode_payload(r, p));
    CHECK(j["top_k"] == 50);
    CHECK(j["system"] == "sys");
    CHECK(j["messages"].size() == 1);

    p.supports_system_role = false;
    j = json::parse(encode_payload(r, p));
    CHECK_FALSE(j.contains("system"));
    CHECK(j["messages"][0]["content"] == "sys\n\nhello");

    CHECK(request_headers(p, "k")[0] == std::pair<std::string, std::string>{"x-api-key", "k"});
    CHECK(request_headers(openai_profile(), "k")[0].second == "Bearer k");
}

TEST_CASE("response decoding") {
    auto r = decode_response(WireFormat::openai_chat, kOpenAiOk);
    CHECK(r.text == "B");
    CHECK(r.finish_reason == FinishReason::stop);
    r = decode_response(WireFormat::openai_chat,
                        R"({"choices":[{"message":{"content":"long"},"finish_reason":"length"}]})");
    CHECK(r.finish_reason == FinishReason::length);
    r = decode_response(WireFormat::openai_chat,
                        R"({"choices":[{"message":{"content":null,"refusal":"No."},"finish_reason":"stop"}]})");
    CHECK(r.finish_reason == FinishReason::refusal);
    r = decode_response(WireFormat::anthropic_messages,
                        R"({"content":[{"type":"text","text":"<name>Bohr</name>"}],"stop_reason":"end_turn"})");
    CHECK(r.text == "<name>Bohr</name>");
    CHECK_THROWS_AS(decode_response(WireFormat::openai_chat, "not json"), ProviderError);
    CHECK_THROWS_AS(decode_response(WireFormat::anthropic_messages, R"({"id":1})"), ProviderError);
}

TEST_CASE("HttpBackend requires the credential variable") {
    ::unsetenv("MIA_TEST_KEY");
    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{{200, kOpenAiOk, {}}});
    HttpBackend b(openai_profile(), t);
    CHECK_THROWS_AS(b.complete(request()), AuthError);
    CHECK(t->requests.empty());
}

TEST_CASE("HttpBackend retries with backoff and honours retry hints") {
    ::setenv("MIA_TEST_KEY", "secret", 1);
    const Sleeper no_sleep = [](std::chrono::milliseconds) {};
    SleepLog log;
    RetryPolicy policy;
    policy.max_attempts = 3;
    policy.initial_backoff = std::chrono::milliseconds(100);
    policy.backoff_factor = 2.0;

    auto t = std::make_shared<FakeTransport>(std::vector<HttpResponse>{
        {503, "busy", {}}, {429, "slow down", {{"retry-after", "2"}}}, {200, kOpenAiOk, {}}});
    HttpBackend b(openai_profile(), t, policy, log.sleeper());
    auto r = b.complete(request());
    CHECK(r.text == "B");
    CHECK(t->requests.size() == 3);
    CHECK(log.waits == std::vector<long>{100, 2000});
    CHECK(t->requests[0].headers[0].second == "Bearer secret");

    SleepLog log2;
    auto limited = std::make_shared<FakeTransport>(std::vector<HttpResponse>{{429, "no", {}}});
    HttpBackend b2(openai_profile(), limited, policy, log2.sleeper());
    CHECK_THROWS_AS(b2.complete(request()), RateLimitExhausted);
    CHECK(limited->requests.size() == 3);
    CHECK(log2.waits == std::vector<long>{100, 200});

    auto down = std::make_shared<FakeTransport>(std::vector<HttpResponse>{});
    HttpBackend b3(openai_profile(), down, policy, no_sleep);
    CHECK_THROWS_AS(b3.complete(request()), TransportError);

    auto bad = std::make_shared<FakeTransport>(std::vector<HttpResponse>{{400, "bad request", {}}});
    HttpBackend b4(openai_profile(), bad, policy, no_sleep);
    try {
        b4.complete(request());
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.status() == 400);
    }
    CHECK(bad->requests.size() == 1);  // client errors are not retried

    auto denied = std::make_shared<FakeTransport>(std::vector<HttpResponse>{{401, "bad key", {}}});
    HttpBackend b5(openai_profile(), denied, policy, no_sleep);
    CHECK_THROWS_AS(b5.complete(request()), AuthError);
}

TEST_CASE("HttplibTransport against a local server") {
    httplib::Server server;
    std::string seen_body, seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(kOpenAiOk, "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("MIA_TEST_KEY", "local", 1);
    auto profile = openai_profile();
    profile.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    HttpBackend backend(profile, std::make_shared<HttplibTransport>(std::chrono::seconds(5)));
    auto r = backend.complete(request("ping"));
    server.stop();
    th.join();

    CHECK(r.text == "B");
    CHECK(seen_auth == "Bearer local");
    CHECK(json::parse(seen_body)["messages"][0]["content"] == "ping");
}

TEST_CASE("cache record, replay and replay-strict") {
    auto dir = synth::temp_dir("cache_modes");
    auto path = dir / "responses.jsonl";
    auto echo = std::make_shared<Echo>();

    CHECK_THROWS_AS(ResponseCache(path, CacheMode::replay_strict), FatalConfigError);
    {
        Gateway g(echo, std::make_shared<ResponseCache>(path, CacheMode::record));
        CHECK(g.complete(request("a"), {}).text == "echo: a");
        CHECK(g.complete(request("a"), {}).from_cache);
        g.complete(request("b"), {});
        CHECK(g.backend_calls() == 2);
    }
    std::ofstream(path, std::ios::app) << R"({"key":"torn)";

    auto strict = std::make_shared<ResponseCache>(path, CacheMode::replay_strict);
    CHECK(strict->size() == 2);
    auto never = std::make_shared<Echo>();
    Gateway gs(never, strict);
    auto hit = gs.complete(request("b"), {});
    CHECK(hit.text == "echo: b");
    CHECK(hit.from_cache);
    CHECK_THROWS_AS(gs.complete(request("c"), {}), CacheMiss);
    CHECK(never->calls == 0);

    Gateway gr(never, std::make_shared<ResponseCache>(path, CacheMode::replay));
    CHECK(gr.complete(request("c"), {}).text == "echo: c");  // miss falls through
    CHECK(never->calls == 1);

    // resuming a record run after a torn write keeps every record parseable
    {
        Gateway g(echo, std::make_shared<ResponseCache>(path, CacheMode::record));
        g.complete(request("d"), {});
    }
    CHECK(ResponseCache(path, CacheMode::replay).size() == 3);
}

TEST_CASE("refusals are classified by leading phrase") {
    const auto phrases = default_refusal_phrases();
    CHECK(matches_refusal("  I'm sorry, but I can't help.", phrases));
    CHECK(matches_refusal("I\xE2\x80\x99m sorry", phrases));
    CHECK(matches_refusal("\"I cannot provide that", phrases));
    CHECK_FALSE(matches_refusal("B", phrases));
    CHECK_FALSE(matches_refusal("The answer: I cannot be sure", phrases));

    class Refuser final : public CompletionBackend {
    public:
        CompletionResponse complete(const CompletionRequest&, const InstanceMetadata&) override {
            return {"I cannot reproduce copyrighted text.", FinishReason::stop, 0, false};
        }
    };
    Gateway g(std::make_shared<Refuser>(), nullptr);
    CHECK(g.complete(request(), {}).finish_reason == FinishReason::refusal);
}

TEST_CASE("gateway bounds concurrent backend calls") {
    class Slow final : public CompletionBackend {
    public:
        CompletionResponse complete(const CompletionRequest&, const InstanceMetadata&) override {
            const int now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --active;
            return {"ok", FinishReason::stop, 0, false};
        }
        std::atomic<int> active{0}, peak{0};
    };
    auto slow = std::make_shared<Slow>();
    GatewayOptions opt;
    opt.max_in_flight = 2;
    Gateway g(slow, nullptr, opt);
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { g.complete(request(std::to_string(i)), {}); });
    for (auto& t : threads) t.join();
    CHECK(slow->peak.load() <= 2);
    CHECK(g.backend_calls() == 8);
}

TEST_CASE("oracle answers correctly at the configured class rates") {
    OracleSpec spec{0.8, 0.3, 5};
    OracleBackend oracle(spec);
    int member_ok = 0, non_ok = 0;
    const int n = 4000;
    for (int i = 0; i < n; ++i) {
        InstanceMetadata m;
        m.chunk_id = "c" + std::to_string(i);
        m.method = Method::decop;
        m.gold_letter = "ABCD"[i % 4];
        m.label = i % 2 ? MembershipLabel::non_member : MembershipLabel::member;
        auto r = oracle.complete(request(), m);
        const bool ok = r.text.find(m.gold_letter) != std::string::npos;
        (i % 2 ? non_ok : member_ok) += ok;
    }
    // three-sigma bands around the configured rates
    CHECK(member_ok / (n / 2.0) == doctest::Approx(0.8).epsilon(0.05));
    CHECK(non_ok / (n / 2.0) == doctest::Approx(0.3).epsilon(0.12));

    InstanceMetadata m;
    m.chunk_id = "same";
    m.method = Method::probing;
    m.gold_suffix = "one two three four five six";
    CHECK(oracle.complete(request(), m).text == oracle.complete(request("other"), m).text);
    CHECK_THROWS_AS(OracleBackend(OracleSpec{1.5, 0.0, 0}), FatalConfigError);
}
