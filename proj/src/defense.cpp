#include "guard/defense.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <sstream>

#include "guard/errors.hpp"

namespace guard::defense {

std::string to_string(PromptVariant variant) {
    return variant == PromptVariant::cot ? "cot" : "no_cot";
}

std::string to_string(OutcomeSource source) {
    return source == OutcomeSource::llm ? "llm" : "rule_fallback";
}

namespace {

constexpr std::string_view kBlockBegin = "===OUTCOME===";
constexpr std::string_view kBlockEnd = "===END===";

std::string replace_all(std::string text, std::string_view needle,
                        std::string_view replacement) {
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), replacement);
        pos += replacement.size();
    }
    return text;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) nl = text.size();
        std::string line(text.substr(start, nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
        if (nl == text.size()) break;
    }
    return lines;
}

}  // namespace

std::string escape_value(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (char c : value) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_value(std::string_view value) {
    std::string out;
    out.reserve(value.size());
    for (size_t i = 0; i < value.size(); ++i) {
        if (value[i] != '\\' || i + 1 >= value.size()) {
            out += value[i];
            continue;
        }
        switch (value[++i]) {
            case 'n': out += '\n'; break;
            case 'r': out += '\r'; break;
            case '\\': out += '\\'; break;
            default:
                out += '\\';
                out += value[i];
        }
    }
    return out;
}

DefensePrompt build_prompt(std::string_view text, PromptVariant variant,
                           const PromptTemplates& templates) {
    if (text.empty()) throw EmptyInput("cannot build a defense prompt for empty text");

    std::string begin = "<<<INPUT_BEGIN>>>";
    std::string end = "<<<INPUT_END>>>";
    for (int salt = 1;
         text.find(begin) != std::string_view::npos ||
         text.find(end) != std::string_view::npos;
         ++salt) {
        begin = "<<<INPUT_BEGIN#" + std::to_string(salt) + ">>>";
        end = "<<<INPUT_END#" + std::to_string(salt) + ">>>";
    }

    std::string user = templates.user_template;
    user = replace_all(std::move(user), "{{STAGES}}",
                       variant == PromptVariant::cot ? templates.stages : "");
    user = replace_all(std::move(user), "{{BEGIN}}", begin);
    user = replace_all(std::move(user), "{{END}}", end);
    user = replace_all(std::move(user), "{{INPUT}}", text);

    DefensePrompt prompt;
    prompt.variant = variant;
    prompt.begin_marker = begin;
    prompt.end_marker = end;
    prompt.messages = {{llm::Role::system, templates.system},
                       {llm::Role::user, std::move(user)}};
    return prompt;
}

DefenseOutcome parse_outcome(const llm::CompletionResponse& response,
                             std::string_view original) {
    const std::vector<std::string> lines = split_lines(response.content);

    size_t block_start = std::string::npos;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]) == kBlockBegin) block_start = i;
    }
    if (block_start == std::string::npos) {
        throw MalformedOutcome("reply contains no summary block");
    }

    std::optional<std::string> is_adv_raw, cleaned_raw, explanation_raw, reasoning_raw;
    bool closed = false;
    for (size_t i = block_start + 1; i < lines.size(); ++i) {
        if (trim(lines[i]) == kBlockEnd) {
            closed = true;
            break;
        }
        const std::string& line = lines[i];
        const size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = trim(line.substr(0, colon));
        std::string value = line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.erase(0, 1);
        if (key == "IS_ADVERSARIAL") is_adv_raw = value;
        else if (key == "CLEANED_TEXT") cleaned_raw = value;
        else if (key == "EXPLANATION") explanation_raw = value;
        else if (key == "REASONING") reasoning_raw = value;
    }
    if (!closed) throw MalformedOutcome("summary block is not terminated");
    if (!is_adv_raw) throw MalformedOutcome("summary block lacks IS_ADVERSARIAL");
    if (!cleaned_raw) throw MalformedOutcome("summary block lacks CLEANED_TEXT");
    if (!explanation_raw) throw MalformedOutcome("summary block lacks EXPLANATION");

    std::string verdict = trim(*is_adv_raw);
    std::transform(verdict.begin(), verdict.end(), verdict.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    bool is_adv;
    if (verdict == "yes" || verdict == "true") is_adv = true;
    else if (verdict == "no" || verdict == "false") is_adv = false;
    else throw MalformedOutcome("IS_ADVERSARIAL is not a boolean: '" + verdict + "'");

    DefenseOutcome outcome;
    outcome.is_adversarial = is_adv;
    outcome.cleaned_text = unescape_value(*cleaned_raw);
    if (outcome.cleaned_text.empty() && !original.empty()) {
        throw MalformedOutcome("CLEANED_TEXT is empty");
    }
    outcome.explanation = unescape_value(*explanation_raw);
    if (response.reasoning_content && !response.reasoning_content->empty()) {
        outcome.reasoning = *response.reasoning_content;
    } else if (reasoning_raw) {
        outcome.reasoning = unescape_value(*reasoning_raw);
    }
    outcome.source = OutcomeSource::llm;

    // benign pass-through contract
    if (!outcome.is_adversarial && outcome.cleaned_text != original) {
        outcome.cleaned_text = std::string(original);
    }
    return outcome;
}

std::string render_outcome(const DefenseOutcome& outcome) {
    std::ostringstream out;
    out << kBlockBegin << '\n';
    out << "IS_ADVERSARIAL: " << (outcome.is_adversarial ? "yes" : "no") << '\n';
    out << "CLEANED_TEXT: " << escape_value(outcome.cleaned_text) << '\n';
    out << "EXPLANATION: " << escape_value(outcome.explanation) << '\n';
    if (!outcome.reasoning.empty()) {
        out << "REASONING: " << escape_value(outcome.reasoning) << '\n';
    }
    out << kBlockEnd << '\n';
    return out.str();
}

namespace {

std::string describe_findings(const text::AnalysisReport& report) {
    if (report.findings.empty()) {
        return "No anomalies detected by rule-based analysis; text left unchanged.";
    }
    std::ostringstream out;
    out << "Rule-based analysis found " << report.findings.size()
        << (report.findings.size() == 1 ? " anomaly: " : " anomalies: ");
    const size_t shown = std::min<size_t>(report.findings.size(), 6);
    for (size_t i = 0; i < shown; ++i) {
        const text::Finding& f = report.findings[i];
        if (i) out << "; ";
        out << text::to_string(f.kind) << " '" << f.original << "'";
        if (f.suggested && !f.suggested->empty()) out << " -> '" << *f.suggested << "'";
        else if (f.suggested) out << " removed";
    }
    if (shown < report.findings.size()) {
        out << "; and " << report.findings.size() - shown << " more";
    }
    out << ".";
    return out.str();
}

}  // namespace

DefenseOutcome rule_based_outcome(std::string_view text, const Resources& resources,
                                  double fallback_threshold) {
    DefenseOutcome outcome;
    outcome.source = OutcomeSource::rule_fallback;
    try {
        const text::AnalysisReport report =
            text::analyze(text, resources.confusables, resources.lexicon);
        outcome.cleaned_text = text::purify_rule_based(text, report);
        outcome.is_adversarial = report.suspicion_score >= fallback_threshold;
        outcome.explanation = describe_findings(report);
    } catch (const std::exception& e) {
        outcome.cleaned_text = std::string(text);
        outcome.is_adversarial = false;
        outcome.explanation = std::string("Rule-based analysis unavailable: ") + e.what();
    }
    return outcome;
}

DefenseOutcome defend(std::string_view text, PromptVariant variant,
                      llm::Gateway& gateway, const Resources& resources,
                      const DefenseConfig& config, llm::CallMode mode) {
    if (text.empty()) throw EmptyInput("cannot defend empty text");

    const DefensePrompt prompt = build_prompt(text, variant, resources.prompts);
    llm::CompletionRequest request;
    request.model = config.model;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.messages = prompt.messages;

    try {
        const llm::CompletionResponse response = gateway.complete(request, mode);
        try {
            return parse_outcome(response, text);
        } catch (const MalformedOutcome&) {
            // one re-ask with a format reminder, then give up on the model
            llm::CompletionRequest retry = request;
            retry.messages.push_back({llm::Role::assistant, response.content});
            retry.messages.push_back(
                {llm::Role::user, resources.prompts.format_reminder});
            const llm::CompletionResponse second = gateway.complete(retry, mode);
            return parse_outcome(second, text);
        }
    } catch (const std::exception& e) {
        std::cerr << "[guard] warning: model defense failed ("
                  << e.what() << "); falling back to rule-based purification\n";
        return rule_based_outcome(text, resources, config.fallback_threshold);
    }
}

}  // namespace guard::defense
