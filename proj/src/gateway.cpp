#include "guard/gateway.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "guard/errors.hpp"

namespace guard::llm {

using nlohmann::json;

std::string to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "?";
}

namespace {

std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string to_hex(uint64_t value) {
    static const char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

void validate(const CompletionRequest& request) {
    if (request.messages.empty()) {
        throw std::invalid_argument("completion request has no messages");
    }
    const Role first = request.messages.front().role;
    if (first != Role::system && first != Role::user) {
        throw std::invalid_argument("first message must be system or user");
    }
    for (const ChatMessage& m : request.messages) {
        if (m.role != Role::assistant && m.content.empty()) {
            throw std::invalid_argument("system/user message content must be non-empty");
        }
    }
    if (request.temperature < 0) {
        throw std::invalid_argument("temperature must be >= 0");
    }
    if (request.max_tokens <= 0) {
        throw std::invalid_argument("max_tokens must be positive");
    }
}

json response_to_json(const std::string& fp, const CompletionResponse& r) {
    json j;
    j["fingerprint"] = fp;
    j["content"] = r.content;
    if (r.reasoning_content) j["reasoning_content"] = *r.reasoning_content;
    j["prompt_tokens"] = r.prompt_tokens;
    j["completion_tokens"] = r.completion_tokens;
    return j;
}

}  // namespace

std::string fingerprint(const CompletionRequest& request) {
    // canonical serialization: model, temperature, then role/content pairs,
    // joined with field (0x1F) and record (0x1E) separators
    std::string canon;
    canon += "model\x1F";
    canon += request.model;
    canon += "\x1E";
    canon += "temperature\x1F";
    canon += format_double(request.temperature);
    canon += "\x1E";
    for (const ChatMessage& m : request.messages) {
        canon += to_string(m.role);
        canon += "\x1F";
        canon += m.content;
        canon += "\x1E";
    }
    return to_hex(fnv1a64(canon));
}

// --- Cassette ----------------------------------------------------------------

Cassette Cassette::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CassetteMiss("cassette file not found: " + path);
    Cassette cassette;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("fingerprint") || !j.contains("content")) {
            throw CassetteMiss("malformed cassette record at " + path + ":" +
                               std::to_string(line_no));
        }
        CompletionResponse r;
        r.content = j["content"].get<std::string>();
        if (j.contains("reasoning_content") && !j["reasoning_content"].is_null()) {
            r.reasoning_content = j["reasoning_content"].get<std::string>();
        }
        r.prompt_tokens = j.value("prompt_tokens", 0L);
        r.completion_tokens = j.value("completion_tokens", 0L);
        cassette.append(j["fingerprint"].get<std::string>(), r);
    }
    return cassette;
}

void Cassette::append(const std::string& fp, const CompletionResponse& response) {
    by_fp_[fp].push_back(entries_.size());
    entries_.emplace_back(fp, response);
}

std::optional<CompletionResponse> Cassette::next_for(const std::string& fp) {
    auto it = by_fp_.find(fp);
    if (it == by_fp_.end()) return std::nullopt;
    size_t& cursor = cursors_[fp];
    const size_t idx = it->second[std::min(cursor, it->second.size() - 1)];
    ++cursor;
    return entries_[idx].second;
}

void Cassette::reset_cursors() { cursors_.clear(); }

void Cassette::save_to(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CassetteMiss("cannot write cassette: " + path);
    for (const auto& [fp, response] : entries_) {
        out << response_to_json(fp, response).dump() << '\n';
    }
}

// --- Gateway -------------------------------------------------------------------

namespace {

Transport make_http_transport(const GatewayConfig& config) {
    // split api_base into origin and base path
    std::string origin = config.api_base;
    std::string base_path;
    const size_t scheme = origin.find("://");
    const size_t path_start =
        scheme == std::string::npos ? origin.find('/') : origin.find('/', scheme + 3);
    if (path_start != std::string::npos) {
        base_path = origin.substr(path_start);
        origin = origin.substr(0, path_start);
        while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
    }
    const int timeout_ms = config.timeout_ms;
    return [origin, base_path, timeout_ms](const std::string& path,
                                           const std::string& body,
                                           const std::string& bearer) -> HttpReply {
        httplib::Client client(origin);
        client.set_connection_timeout(0, timeout_ms * 1000LL);
        client.set_read_timeout(timeout_ms / 1000, (timeout_ms % 1000) * 1000LL);
        httplib::Headers headers = {{"Authorization", "Bearer " + bearer}};
        auto res = client.Post(base_path + path, headers, body, "application/json");
        if (!res) {
            return {0, "", true, httplib::to_string(res.error())};
        }
        return {res->status, res->body, false, ""};
    };
}

CompletionResponse parse_provider_reply(const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) {
        throw MalformedProviderReply("provider reply is not valid JSON");
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw MalformedProviderReply("provider reply has no choices");
    }
    const json& message = j["choices"][0].contains("message")
                              ? j["choices"][0]["message"]
                              : json();
    if (!message.contains("content") || !message["content"].is_string()) {
        throw MalformedProviderReply("provider reply has no message content");
    }
    CompletionResponse r;
    r.content = message["content"].get<std::string>();
    if (message.contains("reasoning_content") && message["reasoning_content"].is_string()) {
        r.reasoning_content = message["reasoning_content"].get<std::string>();
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        r.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        r.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    return r;
}

uint64_t nondeterministic_seed() {
    std::random_device rd;
    return (static_cast<uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

Gateway::Gateway(GatewayConfig config, Transport transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      free_slots_(config_.concurrency > 0 ? config_.concurrency : 1),
      jitter_rng_(nondeterministic_seed()) {}

void Gateway::load_cassette() { ensure_cassette_loaded(true); }

void Gateway::ensure_cassette_loaded(bool must_exist) {
    if (cassette_loaded_) return;
    if (!config_.cassette_path.empty()) {
        std::ifstream probe(config_.cassette_path);
        if (probe) {
            cassette_ = Cassette::from_file(config_.cassette_path);
        } else if (must_exist) {
            throw CassetteMiss("cassette file not found: " + config_.cassette_path);
        }
    } else if (must_exist) {
        throw CassetteMiss("replay mode requires a cassette");
    }
    cassette_loaded_ = true;
}

CompletionResponse Gateway::complete(const CompletionRequest& request, CallMode mode) {
    validate(request);
    const std::string fp = fingerprint(request);

    if (mode == CallMode::replay) {
        std::lock_guard lock(cassette_mu_);
        ensure_cassette_loaded(true);
        auto hit = cassette_.next_for(fp);
        if (!hit) throw CassetteMiss("no cassette entry for fingerprint " + fp);
        return *hit;
    }

    CompletionResponse response = complete_live(request);

    if (mode == CallMode::record) {
        std::lock_guard lock(cassette_mu_);
        ensure_cassette_loaded(false);
        cassette_.append(fp, response);
        if (!config_.cassette_path.empty()) {
            std::ofstream out(config_.cassette_path, std::ios::binary | std::ios::app);
            if (!out) throw CassetteMiss("cannot write cassette: " + config_.cassette_path);
            out << response_to_json(fp, response).dump() << '\n';
        }
    }
    return response;
}

CompletionResponse Gateway::complete_live(const CompletionRequest& request) {
    const char* key = std::getenv(config_.credential_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw MissingCredential("environment variable " + config_.credential_env +
                                " is not set");
    }
    if (!transport_) transport_ = make_http_transport(config_);

    json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    body["messages"] = json::array();
    for (const ChatMessage& m : request.messages) {
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    const std::string payload = body.dump();

    HttpReply reply;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0 && config_.backoff_base_ms > 0) {
            const double cap = std::min<double>(
                config_.backoff_max_ms,
                static_cast<double>(config_.backoff_base_ms) * (1 << (attempt - 1)));
            double unit;
            {
                std::lock_guard lock(rng_mu_);
                unit = jitter_rng_.next_unit();
            }
            const auto delay = std::chrono::duration<double, std::milli>(
                cap * (0.5 + 0.5 * unit));
            std::this_thread::sleep_for(delay);
        }
        {
            std::unique_lock lock(slots_mu_);
            slots_cv_.wait(lock, [&] { return free_slots_ > 0; });
            --free_slots_;
        }
        reply = transport_("/chat/completions", payload, key);
        {
            std::lock_guard lock(slots_mu_);
            ++free_slots_;
            slots_cv_.notify_one();
        }
        const bool transient =
            reply.transport_failed || reply.status == 429 || reply.status >= 500;
        if (!transient) break;
    }

    if (reply.transport_failed) {
        throw Timeout("transport failure after retries: " + reply.error);
    }
    if (reply.status == 429) {
        throw RateLimited("provider rate limit persisted after retries");
    }
    if (reply.status < 200 || reply.status >= 300) {
        throw MalformedProviderReply("provider returned HTTP " +
                                     std::to_string(reply.status));
    }
    return parse_provider_reply(reply.body);
}

}  // namespace guard::llm
