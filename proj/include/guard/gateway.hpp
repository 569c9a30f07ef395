#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "guard/rng.hpp"

namespace guard::llm {

enum class Role { system, user, assistant };
std::string to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct CompletionRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string request_tag;  // correlation only, excluded from the fingerprint
};

struct CompletionResponse {
    std::string content;
    std::optional<std::string> reasoning_content;
    long prompt_tokens = 0;
    long completion_tokens = 0;

    bool operator==(const CompletionResponse&) const = default;
};

enum class CallMode { live, record, replay };

// Stable hash of model + messages + temperature over a canonical,
// field-ordered serialization. Identical requests fingerprint identically
// across runs and platforms; request_tag and max_tokens do not participate.
std::string fingerprint(const CompletionRequest& request);

// Recorded transcript of (fingerprint, response) pairs. Duplicate
// fingerprints replay in recorded order; once exhausted, the last recorded
// response repeats. File format: one JSON object per line, UTF-8, LF.
class Cassette {
  public:
    static Cassette from_file(const std::string& path);  // CassetteMiss if unreadable

    void append(const std::string& fp, const CompletionResponse& response);
    std::optional<CompletionResponse> next_for(const std::string& fp);
    void reset_cursors();
    size_t size() const { return entries_.size(); }
    const std::vector<std::pair<std::string, CompletionResponse>>& entries() const {
        return entries_;
    }
    void save_to(const std::string& path) const;

  private:
    std::vector<std::pair<std::string, CompletionResponse>> entries_;
    std::unordered_map<std::string, std::vector<size_t>> by_fp_;
    std::unordered_map<std::string, size_t> cursors_;
};

// Outcome of one HTTP exchange as seen by the gateway; the default
// transport wraps cpp-httplib, tests substitute their own.
struct HttpReply {
    int status = 0;
    std::string body;
    bool transport_failed = false;  // connection/timeout level failure
    std::string error;
};
using Transport =
    std::function<HttpReply(const std::string& url, const std::string& json_body,
                            const std::string& bearer_token)>;

struct GatewayConfig {
    std::string api_base = "https://api.deepseek.com/v1";
    std::string credential_env = "GUARD_API_KEY";
    int timeout_ms = 30000;
    int retries = 2;            // transient failures retried up to this many times
    int backoff_base_ms = 100;  // delay k is in [0.5, 1.0) * min(base * 2^k, max)
    int backoff_max_ms = 2000;
    int concurrency = 4;  // max in-flight live requests
    std::string cassette_path;
};

// Provider-agnostic chat-completion client with deterministic
// record/replay. Replay never touches the network.
class Gateway {
  public:
    explicit Gateway(GatewayConfig config, Transport transport = nullptr);

    CompletionResponse complete(const CompletionRequest& request, CallMode mode);

    Cassette& cassette() { return cassette_; }
    const GatewayConfig& config() const { return config_; }

    // Loads the configured cassette file now instead of on first use.
    void load_cassette();

    // Marks the in-memory cassette authoritative; callers that append
    // entries programmatically use this instead of a cassette file.
    void mark_cassette_loaded() { cassette_loaded_ = true; }

  private:
    CompletionResponse complete_live(const CompletionRequest& request);
    void ensure_cassette_loaded(bool must_exist);

    GatewayConfig config_;
    Transport transport_;
    Cassette cassette_;
    bool cassette_loaded_ = false;
    std::mutex cassette_mu_;

    // bounded concurrency for live calls
    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    int free_slots_;

    std::mutex rng_mu_;
    Rng jitter_rng_;
};

}  // namespace guard::llm
