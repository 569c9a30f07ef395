#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "guard/gateway.hpp"
#include "guard/resources.hpp"

namespace guard::defense {

enum class PromptVariant { cot, no_cot };
enum class OutcomeSource { llm, rule_fallback };

std::string to_string(PromptVariant variant);
std::string to_string(OutcomeSource source);

// The defense result: purified text, human-readable explanation, the
// adversarial verdict, and the raw reasoning trace when one was produced.
struct DefenseOutcome {
    std::string cleaned_text;
    std::string explanation;
    bool is_adversarial = false;
    std::string reasoning;
    OutcomeSource source = OutcomeSource::llm;

    bool operator==(const DefenseOutcome&) const = default;
};

struct DefensePrompt {
    std::vector<llm::ChatMessage> messages;  // system + user
    PromptVariant variant = PromptVariant::cot;
    std::string begin_marker;
    std::string end_marker;
};

struct DefenseConfig {
    std::string model = "deepseek-reasoner";
    double temperature = 0.0;
    int max_tokens = 4096;
    double fallback_threshold = 1.0;  // suspicion score at which the rule
                                      // fallback declares the input adversarial
};

// Renders the staged analysis prompt (or its ablated variant, which omits
// the stage instructions but is otherwise identical). The input is wrapped
// in sentinels; if the text happens to contain a sentinel, the sentinels
// are renamed until no collision remains.
DefensePrompt build_prompt(std::string_view text, PromptVariant variant,
                           const PromptTemplates& templates);

// Extracts (cleaned, explanation, is_adv, reasoning) from the reply's
// summary block. Reasoning prefers the dedicated reasoning channel and
// falls back to the block's REASONING key. A benign verdict pins the
// cleaned text to the original (pass-through contract).
DefenseOutcome parse_outcome(const llm::CompletionResponse& response,
                             std::string_view original);

// Emits exactly the block parse_outcome accepts; round-trips modulo source.
std::string render_outcome(const DefenseOutcome& outcome);

// Single-line escaping used inside block values: \n, \r, \\.
std::string escape_value(std::string_view value);
std::string unescape_value(std::string_view value);

// Full defense: prompt, model call, parse; one re-ask with a format
// reminder on a malformed reply; rule-based purification when the model
// path fails entirely. Never throws for non-empty input except EmptyInput.
DefenseOutcome defend(std::string_view text, PromptVariant variant,
                      llm::Gateway& gateway, const Resources& resources,
                      const DefenseConfig& config = DefenseConfig{},
                      llm::CallMode mode = llm::CallMode::replay);

// The deterministic fallback on its own (also the rule_only pipeline mode).
DefenseOutcome rule_based_outcome(std::string_view text, const Resources& resources,
                                  double fallback_threshold);

}  // namespace guard::defense
