#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "guard/errors.hpp"
#include "guard/gateway.hpp"

using namespace guard;
using namespace guard::llm;
namespace fs = std::filesystem;

namespace {

CompletionRequest sample_request(const std::string& content = "defend this: gurl") {
    CompletionRequest request;
    request.model = "test-model";
    request.temperature = 0.0;
    request.max_tokens = 128;
    request.messages = {{Role::system, "analyst"}, {Role::user, content}};
    return request;
}

std::string provider_body(const std::string& content,
                          const std::string& reasoning = "") {
    nlohmann::json j;
    j["choices"] = nlohmann::json::array();
    nlohmann::json message = {{"role", "assistant"}, {"content", content}};
    if (!reasoning.empty()) message["reasoning_content"] = reasoning;
    j["choices"].push_back({{"index", 0}, {"message", message}});
    j["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 5}};
    return j.dump();
}

GatewayConfig test_config() {
    GatewayConfig config;
    config.api_base = "http://127.0.0.1:1";  // never reached through stubs
    config.retries = 2;
    config.backoff_base_ms = 0;  // no sleeping in tests
    return config;
}

struct EnvKey {
    EnvKey() { setenv("GUARD_API_KEY", "test-key", 1); }
    ~EnvKey() { unsetenv("GUARD_API_KEY"); }
};

}  // namespace

TEST_CASE("fingerprints are stable and canonical") {
    const std::string fp = fingerprint(sample_request());
    CHECK(fp.size() == 16);
    CHECK(fp == fingerprint(sample_request()));

    // the tag is correlation-only
    CompletionRequest tagged = sample_request();
    tagged.request_tag = "run-42";
    CHECK(fingerprint(tagged) == fp);

    // max_tokens is a decoding knob, not request identity
    CompletionRequest budget = sample_request();
    budget.max_tokens = 999;
    CHECK(fingerprint(budget) == fp);

    CompletionRequest warm = sample_request();
    warm.temperature = 0.7;
    CHECK(fingerprint(warm) != fp);

    CompletionRequest other = sample_request("different text");
    CHECK(fingerprint(other) != fp);

    // frozen value; a change here breaks every recorded cassette
    CHECK(fp == "GUARD_FROZEN_FP");
}

TEST_CASE("cassette replays duplicates in recorded order then repeats the last") {
    Cassette cassette;
    CompletionResponse first{"one", std::nullopt, 1, 1};
    CompletionResponse second{"two", std::nullopt, 2, 2};
    cassette.append("fp", first);
    cassette.append("fp", second);

    CHECK(*cassette.next_for("fp") == first);
    CHECK(*cassette.next_for("fp") == second);
    CHECK(*cassette.next_for("fp") == second);
    CHECK_FALSE(cassette.next_for("other").has_value());

    cassette.reset_cursors();
    CHECK(*cassette.next_for("fp") == first);
}

TEST_CASE("cassette files round-trip") {
    const fs::path path = fs::temp_directory_path() / "guard_cassette_test.jsonl";
    Cassette cassette;
    cassette.append("aa", {"hello", "thinking...", 3, 4});
    cassette.append("bb", {"world", std::nullopt, 0, 0});
    cassette.save_to(path.string());

    Cassette loaded = Cassette::from_file(path.string());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.entries()[0].first == "aa");
    CHECK(loaded.entries()[0].second.reasoning_content == "thinking...");
    CHECK(loaded.entries()[1].second.content == "world");
    fs::remove(path);

    CHECK_THROWS_AS(Cassette::from_file("/nonexistent/cassette.jsonl"), CassetteMiss);
}

TEST_CASE("replay mode never touches the transport") {
    EnvKey key;
    GatewayConfig config = test_config();
    Gateway gateway(config, [](const std::string&, const std::string&,
                               const std::string&) -> HttpReply {
        FAIL("transport must not be called in replay mode");
        return {};
    });
    const CompletionRequest request = sample_request();
    CompletionResponse canned{"canned", std::nullopt, 0, 0};
    gateway.cassette().append(fingerprint(request), canned);
    gateway.mark_cassette_loaded();

    CHECK(gateway.complete(request, CallMode::replay) == canned);
    CHECK_THROWS_AS(gateway.complete(sample_request("unknown"), CallMode::replay),
                    CassetteMiss);
}

TEST_CASE("replay without any cassette is a miss") {
    EnvKey key;
    Gateway gateway(test_config());
    CHECK_THROWS_AS(gateway.complete(sample_request(), CallMode::replay), CassetteMiss);
}

TEST_CASE("live mode needs a credential") {
    unsetenv("GUARD_API_KEY");
    Gateway gateway(test_config(), [](const std::string&, const std::string&,
                                      const std::string&) -> HttpReply {
        return {200, provider_body("x"), false, ""};
    });
    CHECK_THROWS_AS(gateway.complete(sample_request(), CallMode::live),
                    MissingCredential);
}

TEST_CASE("live mode parses provider replies and reasoning") {
    EnvKey key;
    Gateway gateway(test_config(), [](const std::string& url, const std::string& body,
                                      const std::string& bearer) -> HttpReply {
        CHECK(url == "/chat/completions");
        CHECK(bearer == "test-key");
        const auto parsed = nlohmann::json::parse(body);
        CHECK(parsed["model"] == "test-model");
        CHECK(parsed["messages"].size() == 2);
        return {200, provider_body("the answer", "step by step"), false, ""};
    });
    const CompletionResponse response =
        gateway.complete(sample_request(), CallMode::live);
    CHECK(response.content == "the answer");
    CHECK(response.reasoning_content == "step by step");
    CHECK(response.prompt_tokens == 12);
    CHECK(response.completion_tokens == 5);
}

TEST_CASE("record mode appends to the cassette and replays later") {
    EnvKey key;
    const fs::path path = fs::temp_directory_path() / "guard_record_test.jsonl";
    fs::remove(path);

    GatewayConfig config = test_config();
    config.cassette_path = path.string();
    std::atomic<int> calls{0};
    Gateway gateway(config, [&](const std::string&, const std::string&,
                                const std::string&) -> HttpReply {
        ++calls;
        return {200, provider_body("recorded"), false, ""};
    });

    const CompletionRequest request = sample_request();
    CHECK(gateway.cassette().size() == 0);
    gateway.complete(request, CallMode::record);
    CHECK(gateway.cassette().size() == 1);
    CHECK(calls == 1);

    // a fresh gateway replays from the file without any transport call
    Gateway replayer(config, [](const std::string&, const std::string&,
                                const std::string&) -> HttpReply {
        FAIL("replay must not call the transport");
        return {};
    });
    CHECK(replayer.complete(request, CallMode::replay).content == "recorded");
    fs::remove(path);
}

TEST_CASE("transient failures retry up to R times then map to errors") {
    EnvKey key;

    SUBCASE("rate limiting") {
        std::atomic<int> calls{0};
        Gateway gateway(test_config(), [&](const std::string&, const std::string&,
                                           const std::string&) -> HttpReply {
            ++calls;
            return {429, "", false, ""};
        });
        CHECK_THROWS_AS(gateway.complete(sample_request(), CallMode::live), RateLimited);
        CHECK(calls == 3);  // retries = 2 -> at most R+1 attempts
    }

    SUBCASE("transport failure") {
        std::atomic<int> calls{0};
        Gateway gateway(test_config(), [&](const std::string&, const std::string&,
                                           const std::string&) -> HttpReply {
            ++calls;
            return {0, "", true, "connection refused"};
        });
        CHECK_THROWS_AS(gateway.complete(sample_request(), CallMode::live), Timeout);
        CHECK(calls == 3);
    }

    SUBCASE("recovery on a later attempt") {
        std::atomic<int> calls{0};
        Gateway gateway(test_config(), [&](const std::string&, const std::string&,
                                           const std::string&) -> HttpReply {
            if (++calls < 3) return {500, "", false, ""};
            return {200, provider_body("eventually"), false, ""};
        });
        CHECK(gateway.complete(sample_request(), CallMode::live).content == "eventually");
        CHECK(calls == 3);
    }

    SUBCASE("non-transient status does not retry") {
        std::atomic<int> calls{0};
        Gateway gateway(test_config(), [&](const std::string&, const std::string&,
                                           const std::string&) -> HttpReply {
            ++calls;
            return {400, "", false, ""};
        });
        CHECK_THROWS_AS(gateway.complete(sample_request(), CallMode::live),
                        MalformedProviderReply);
        CHECK(calls == 1);
    }
}

TEST_CASE("malformed provider replies are rejected") {
    EnvKey key;
    auto gateway_with_body = [&](std::string body) {
        return Gateway(test_config(),
                       [body = std::move(body)](const std::string&, const std::string&,
                                                const std::string&) -> HttpReply {
                           return {200, body, false, ""};
                       });
    };
    CHECK_THROWS_AS(
        gateway_with_body("not json").complete(sample_request(), CallMode::live),
        MalformedProviderReply);
    CHECK_THROWS_AS(
        gateway_with_body("{}").complete(sample_request(), CallMode::live),
        MalformedProviderReply);
    CHECK_THROWS_AS(gateway_with_body(R"({"choices":[{"message":{}}]})")
                        .complete(sample_request(), CallMode::live),
                    MalformedProviderReply);
}

TEST_CASE("request invariants are enforced") {
    EnvKey key;
    Gateway gateway(test_config());
    CompletionRequest no_messages;
    no_messages.model = "m";
    CHECK_THROWS_AS(gateway.complete(no_messages, CallMode::live), std::invalid_argument);

    CompletionRequest assistant_first;
    assistant_first.model = "m";
    assistant_first.messages = {{Role::assistant, "hello"}};
    CHECK_THROWS_AS(gateway.complete(assistant_first, CallMode::live),
                    std::invalid_argument);

    CompletionRequest empty_user;
    empty_user.model = "m";
    empty_user.messages = {{Role::user, ""}};
    CHECK_THROWS_AS(gateway.complete(empty_user, CallMode::live), std::invalid_argument);
}

TEST_CASE("record mode against a local stub server") {
    EnvKey key;
    httplib::Server server;
    server.Post("/v1/chat/completions",
                [](const httplib::Request&, httplib::Response& response) {
                    response.set_content(provider_body("stub reply"), "application/json");
                });
    const int port = server.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("skipping: cannot bind a localhost socket in this environment");
        return;
    }
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    GatewayConfig config;
    config.api_base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.retries = 0;
    config.backoff_base_ms = 0;
    Gateway gateway(config);  // real transport

    const CompletionRequest request = sample_request();
    const size_t before = gateway.cassette().size();
    const CompletionResponse response = gateway.complete(request, CallMode::record);
    CHECK(response.content == "stub reply");
    CHECK(gateway.cassette().size() == before + 1);

    // the second identical call replays without the network
    server.stop();
    server_thread.join();
    CHECK(gateway.complete(request, CallMode::replay).content == "stub reply");
}
