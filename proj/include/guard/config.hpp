#pragma once

#include <cstdint>
#include <string>

#include "guard/bleu.hpp"
#include "guard/gateway.hpp"
#include "guard/resources.hpp"

namespace guard {

// Runtime configuration, loaded from a key=value file. Unknown keys are
// rejected. The API credential never lives here; it comes from the
// GUARD_API_KEY environment variable.
struct Config {
    std::string api_base = "https://api.deepseek.com/v1";
    std::string model = "deepseek-reasoner";
    std::string classifier_model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 4096;
    int concurrency = 4;
    int retries = 2;
    int timeout_ms = 30000;
    double fallback_threshold = 1.0;
    uint64_t seed = 0;
    std::string data_dir = "data";
    std::string confusables;  // empty: <data_dir>/confusables.tsv
    std::string lexicon;
    std::string synonyms;
    std::string distractors;
    std::string hedges;
    std::string prompts_dir;
    std::string cassette;
    std::string bleu_aggregation = "arithmetic";  // or "geometric"

    static Config load(const std::string& path);
    void set(const std::string& key, const std::string& value);

    ResourcePaths resource_paths() const;
    llm::GatewayConfig gateway_config() const;
    eval::BleuConfig bleu_config() const;
};

}  // namespace guard
