#include "guard/eval.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "guard/errors.hpp"

namespace guard::eval {

using nlohmann::json;

std::string to_string(Channel channel) {
    return channel == Channel::llm ? "llm" : "mock";
}

std::string to_string(DefenseMode mode) {
    switch (mode) {
        case DefenseMode::none: return "none";
        case DefenseMode::eg_cot: return "eg";
        case DefenseMode::eg_nocot: return "eg-nocot";
        case DefenseMode::rule_only: return "rule";
    }
    return "?";
}

Channel channel_from_string(std::string_view name) {
    if (name == "llm") return Channel::llm;
    if (name == "mock") return Channel::mock;
    throw std::invalid_argument("unknown channel: " + std::string(name));
}

DefenseMode defense_mode_from_string(std::string_view name) {
    if (name == "none") return DefenseMode::none;
    if (name == "eg" || name == "eg-cot") return DefenseMode::eg_cot;
    if (name == "eg-nocot" || name == "eg_nocot") return DefenseMode::eg_nocot;
    if (name == "rule" || name == "rule-only") return DefenseMode::rule_only;
    throw std::invalid_argument("unknown defense mode: " + std::string(name));
}

double compute_asr(const std::vector<PredictionRecord>& records, AsrChannel channel) {
    size_t denom = 0, flips = 0;
    for (const PredictionRecord& r : records) {
        if (!r.in_d_correct) continue;
        ++denom;
        const std::optional<std::string>& prediction =
            channel == AsrChannel::adversarial ? r.adversarial_prediction
                                               : r.defended_prediction;
        if (prediction && *prediction != r.true_label) ++flips;
    }
    if (denom == 0) {
        throw EmptyDCorrect("no record was correctly classified on the clean input");
    }
    return static_cast<double>(flips) / static_cast<double>(denom);
}

// --- classification ------------------------------------------------------------

llm::CompletionRequest classification_request(const data::LabeledSample& sample,
                                              const ClassifierConfig& config) {
    std::string user;
    switch (sample.task) {
        case data::Task::sst2:
            user = "Classify the sentiment of the following sentence as positive or "
                   "negative. Answer with exactly one word.\n\nSentence: " +
                   sample.text_a;
            break;
        case data::Task::imdb:
            user = "Classify the sentiment of the following movie review as positive "
                   "or negative. Answer with exactly one word.\n\nReview: " +
                   sample.text_a;
            break;
        case data::Task::rte:
            user = "Does the premise entail the hypothesis? Answer entailment or "
                   "not_entailment.\n\nPremise: " +
                   sample.text_a + "\nHypothesis: " + sample.text_b.value_or("");
            break;
        case data::Task::qqp:
            user = "Are these two questions duplicates? Answer duplicate or "
                   "not_duplicate.\n\nQuestion 1: " +
                   sample.text_a + "\nQuestion 2: " + sample.text_b.value_or("");
            break;
    }
    llm::CompletionRequest request;
    request.model = config.model;
    request.temperature = config.temperature;
    request.max_tokens = config.max_tokens;
    request.messages = {{llm::Role::system, "You are a precise text classifier."},
                        {llm::Role::user, std::move(user)}};
    return request;
}

std::string map_reply_to_label(data::Task task, std::string_view reply) {
    std::string lowered(reply);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    auto has = [&](std::string_view needle) {
        return lowered.find(needle) != std::string::npos;
    };
    switch (task) {
        case data::Task::sst2:
        case data::Task::imdb:
            if (has("positive")) return "positive";
            if (has("negative")) return "negative";
            break;
        case data::Task::rte:
            // check the negated form first; it contains the positive form
            if (has("not_entailment") || has("not entailment") || has("no entailment"))
                return "not_entailment";
            if (has("entailment")) return "entailment";
            break;
        case data::Task::qqp:
            if (has("not_duplicate") || has("not duplicate") || has("no duplicate"))
                return "not_duplicate";
            if (has("duplicate")) return "duplicate";
            break;
    }
    throw UnmappableReply("cannot map reply to a " + data::to_string(task) +
                          " label: '" + std::string(reply) + "'");
}

namespace {

const std::unordered_set<std::string>& positive_keywords() {
    static const std::unordered_set<std::string> words = {
        "love", "loved", "loves", "great", "excellent", "wonderful", "amazing",
        "best", "beautiful", "enjoyable", "touching", "brilliant", "fantastic",
        "perfect", "masterpiece", "winner", "winning", "smooth", "potential",
        "good", "fun", "charming", "delightful", "superb", "remarkable",
        "favorite", "recommend", "recommended", "moving", "powerful",
        "impressive", "glad", "happy",
    };
    return words;
}

const std::unordered_set<std::string>& negative_keywords() {
    static const std::unordered_set<std::string> words = {
        "hate", "hated", "hates", "terrible", "awful", "worst", "bad",
        "boring", "unfortunately", "sadly", "disappointing", "waste", "poor",
        "dull", "mess", "slump", "failure", "unwatchable", "regrettably",
        "horrible", "lame", "annoying", "forgettable", "dreadful", "ugly",
        "stupid", "weak",
    };
    return words;
}

std::vector<std::string> content_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (const text::Token& token : text::tokenize(text)) {
        std::string lowered = token.text;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (!attack::is_stopword(lowered)) out.push_back(std::move(lowered));
    }
    return out;
}

std::string mock_sentiment(std::string_view text, data::Task task) {
    int score = 0;
    for (const text::Token& token : text::tokenize(text)) {
        std::string lowered = token.text;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (positive_keywords().count(lowered)) ++score;
        else if (negative_keywords().count(lowered)) --score;
    }
    if (score > 0) return "positive";
    if (score < 0) return "negative";
    return data::default_label(task);
}

std::string mock_rte(const data::LabeledSample& sample) {
    const auto premise = content_tokens(sample.text_a);
    const auto hypothesis = content_tokens(sample.text_b.value_or(""));
    if (hypothesis.empty()) return data::default_label(data::Task::rte);
    const std::set<std::string> premise_set(premise.begin(), premise.end());
    size_t covered = 0;
    std::set<std::string> seen;
    for (const std::string& token : hypothesis) {
        if (seen.insert(token).second && premise_set.count(token)) ++covered;
    }
    const double coverage = static_cast<double>(covered) /
                            static_cast<double>(seen.size());
    return coverage >= 0.6 ? "entailment" : "not_entailment";
}

std::string mock_qqp(const data::LabeledSample& sample) {
    const auto a = content_tokens(sample.text_a);
    const auto b = content_tokens(sample.text_b.value_or(""));
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() && sb.empty()) return data::default_label(data::Task::qqp);
    size_t inter = 0;
    for (const std::string& t : sa) {
        if (sb.count(t)) ++inter;
    }
    const size_t uni = sa.size() + sb.size() - inter;
    const double jaccard = uni == 0 ? 0.0
                                    : static_cast<double>(inter) /
                                          static_cast<double>(uni);
    return jaccard >= 0.5 ? "duplicate" : "not_duplicate";
}

}  // namespace

std::string classify_mock(const data::LabeledSample& sample) {
    switch (sample.task) {
        case data::Task::sst2:
        case data::Task::imdb:
            if (sample.text_a.empty()) return data::default_label(sample.task);
            return mock_sentiment(sample.text_a, sample.task);
        case data::Task::rte: return mock_rte(sample);
        case data::Task::qqp: return mock_qqp(sample);
    }
    return data::default_label(sample.task);
}

std::string classify(const data::LabeledSample& sample, Channel channel,
                     llm::Gateway* gateway, llm::CallMode mode,
                     const ClassifierConfig& config) {
    if (channel == Channel::mock) return classify_mock(sample);
    if (gateway == nullptr) {
        throw std::invalid_argument("llm channel requires a gateway");
    }
    const llm::CompletionResponse response =
        gateway->complete(classification_request(sample, config), mode);
    return map_reply_to_label(sample.task, response.content);
}

// --- pipeline ------------------------------------------------------------------

PipelineResult run_pipeline(const std::vector<data::LabeledSample>& samples,
                            const PipelineConfig& config, llm::Gateway* gateway,
                            const Resources& resources) {
    if (samples.empty()) throw std::invalid_argument("run_pipeline needs samples");
    attack::validate(config.attack);

    PipelineResult result;
    result.report.task = samples.front().task;
    result.report.attack = config.attack;
    result.report.defense = config.defense;
    result.report.channel = config.channel;
    result.report.n_samples = samples.size();

    // attack the designated sentence of each sample
    std::vector<attack::CorpusSample> corpus_inputs;
    corpus_inputs.reserve(samples.size());
    for (const data::LabeledSample& sample : samples) {
        corpus_inputs.push_back({sample.id, sample.target_text(), sample.label});
    }
    const std::vector<attack::AdversarialExample> corpus =
        attack::forge_corpus(corpus_inputs, config.attack, resources);

    std::vector<PredictionRecord> records;
    std::vector<std::pair<std::string, std::string>> bleu_pairs;

    for (size_t i = 0; i < samples.size(); ++i) {
        const data::LabeledSample& sample = samples[i];
        const attack::AdversarialExample& example = corpus[i];

        SampleArtifact artifact;
        artifact.id = sample.id;
        artifact.task = sample.task;
        artifact.original_a = sample.text_a;
        artifact.original_b = sample.text_b;
        artifact.perturb_target = sample.perturb_target;
        artifact.original_target_text = example.original;
        artifact.perturbed_text = example.perturbed;
        artifact.trace = example.trace;
        artifact.unperturbed = example.unperturbed;
        artifact.true_label = sample.label;

        PredictionRecord record;
        record.sample_id = sample.id;
        record.true_label = sample.label;

        artifact.original_prediction =
            classify(sample, config.channel, gateway, config.mode, config.classifier);
        record.original_prediction = artifact.original_prediction;
        record.in_d_correct = *artifact.original_prediction == sample.label;
        artifact.in_d_correct = record.in_d_correct;

        data::LabeledSample adversarial = sample;
        adversarial.set_target_text(example.perturbed);
        artifact.adversarial_prediction = classify(adversarial, config.channel, gateway,
                                                   config.mode, config.classifier);
        record.adversarial_prediction = artifact.adversarial_prediction;

        if (config.defense != DefenseMode::none && !example.perturbed.empty()) {
            defense::DefenseOutcome outcome;
            switch (config.defense) {
                case DefenseMode::eg_cot:
                    outcome = defense::defend(example.perturbed,
                                              defense::PromptVariant::cot, *gateway,
                                              resources, config.defense_config,
                                              config.mode);
                    break;
                case DefenseMode::eg_nocot:
                    outcome = defense::defend(example.perturbed,
                                              defense::PromptVariant::no_cot, *gateway,
                                              resources, config.defense_config,
                                              config.mode);
                    break;
                default:
                    outcome = defense::rule_based_outcome(
                        example.perturbed, resources,
                        config.defense_config.fallback_threshold);
            }
            if (outcome.source == defense::OutcomeSource::rule_fallback) {
                ++result.report.rule_fallback_count;
            }
            data::LabeledSample defended = sample;
            defended.set_target_text(outcome.cleaned_text);
            artifact.defended_prediction = classify(defended, config.channel, gateway,
                                                    config.mode, config.classifier);
            record.defended_prediction = artifact.defended_prediction;
            artifact.successful_defense = *artifact.defended_prediction == sample.label;
            if (artifact.successful_defense) {
                ++result.report.successful_defenses;
                bleu_pairs.emplace_back(outcome.cleaned_text, example.original);
            }
            artifact.defense_outcome = std::move(outcome);
        }

        records.push_back(record);
        result.artifacts.push_back(std::move(artifact));
    }

    for (const PredictionRecord& r : records) {
        if (!r.in_d_correct) continue;
        ++result.report.d_correct;
        if (r.adversarial_prediction && *r.adversarial_prediction != r.true_label) {
            ++result.report.adversarial_flips;
        }
    }
    if (result.report.d_correct > 0) {
        result.report.adversarial_asr = compute_asr(records, AsrChannel::adversarial);
        if (config.defense != DefenseMode::none) {
            size_t flips = 0;
            for (const PredictionRecord& r : records) {
                if (r.in_d_correct && r.defended_prediction &&
                    *r.defended_prediction != r.true_label) {
                    ++flips;
                }
            }
            result.report.defended_flips = flips;
            result.report.defended_asr = compute_asr(records, AsrChannel::defended);
        }
    }
    if (!bleu_pairs.empty()) {
        result.report.bleu = compute_bleu(bleu_pairs, config.bleu);
    }
    return result;
}

// --- serialization ---------------------------------------------------------------

std::string report_to_json(const EvalReport& report) {
    json j;
    j["task"] = data::to_string(report.task);
    j["attack"] = {{"technique", attack::to_string(report.attack.technique)},
                   {"level", attack::to_string(report.attack.level)},
                   {"intensity", report.attack.intensity},
                   {"seed", report.attack.seed}};
    j["defense"] = to_string(report.defense);
    j["channel"] = to_string(report.channel);
    j["n_samples"] = report.n_samples;
    j["d_correct"] = report.d_correct;
    j["adversarial_flips"] = report.adversarial_flips;
    j["adversarial_asr"] =
        report.adversarial_asr ? json(*report.adversarial_asr) : json(nullptr);
    j["defended_flips"] =
        report.defended_flips ? json(*report.defended_flips) : json(nullptr);
    j["defended_asr"] = report.defended_asr ? json(*report.defended_asr) : json(nullptr);
    j["successful_defenses"] = report.successful_defenses;
    j["bleu"] = report.bleu ? json(*report.bleu) : json(nullptr);
    j["rule_fallback_count"] = report.rule_fallback_count;
    return j.dump(2);
}

std::string render_report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "task" << std::setw(20) << "attack"
        << std::setw(10) << "defense" << std::setw(6) << "n" << std::setw(6) << "|D|"
        << std::setw(10) << "ASR(adv)" << std::setw(10) << "ASR(def)" << std::setw(8)
        << "BLEU" << std::setw(8) << "N-succ" << "fallbacks\n";
    auto fmt_rate = [](const std::optional<double>& v) {
        if (!v) return std::string("-");
        std::ostringstream s;
        s << std::fixed << std::setprecision(4) << *v;
        return s.str();
    };
    for (const EvalReport& r : reports) {
        std::string attack_desc = attack::to_string(r.attack.technique) + "@" +
                                  std::to_string(r.attack.intensity);
        out << std::left << std::setw(6) << data::to_string(r.task) << std::setw(20)
            << attack_desc << std::setw(10) << to_string(r.defense) << std::setw(6)
            << r.n_samples << std::setw(6) << r.d_correct << std::setw(10)
            << fmt_rate(r.adversarial_asr) << std::setw(10) << fmt_rate(r.defended_asr)
            << std::setw(8) << fmt_rate(r.bleu) << std::setw(8)
            << (r.defense == DefenseMode::none ? std::string("-")
                                               : std::to_string(r.successful_defenses))
            << r.rule_fallback_count << "\n";
    }
    return out.str();
}

std::string artifact_to_json_line(const SampleArtifact& artifact) {
    json j;
    j["id"] = artifact.id;
    j["task"] = data::to_string(artifact.task);
    j["original_a"] = artifact.original_a;
    if (artifact.original_b) j["original_b"] = *artifact.original_b;
    j["perturb_target"] = std::string(1, artifact.perturb_target);
    j["original_target_text"] = artifact.original_target_text;
    j["perturbed_text"] = artifact.perturbed_text;
    j["unperturbed"] = artifact.unperturbed;
    j["true_label"] = artifact.true_label;
    j["trace"] = json::array();
    for (const attack::Edit& e : artifact.trace) {
        j["trace"].push_back({{"begin", e.span.begin},
                              {"end", e.span.end},
                              {"original", e.original},
                              {"replacement", e.replacement}});
    }
    auto put_opt = [&](const char* key, const std::optional<std::string>& v) {
        if (v) j[key] = *v;
    };
    put_opt("original_prediction", artifact.original_prediction);
    put_opt("adversarial_prediction", artifact.adversarial_prediction);
    put_opt("defended_prediction", artifact.defended_prediction);
    j["in_d_correct"] = artifact.in_d_correct;
    j["successful_defense"] = artifact.successful_defense;
    if (artifact.defense_outcome) {
        const defense::DefenseOutcome& o = *artifact.defense_outcome;
        j["defense"] = {{"cleaned_text", o.cleaned_text},
                        {"explanation", o.explanation},
                        {"is_adversarial", o.is_adversarial},
                        {"reasoning", o.reasoning},
                        {"source", defense::to_string(o.source)}};
    }
    return j.dump();
}

SampleArtifact artifact_from_json_line(const std::string& line) {
    json j = json::parse(line);
    SampleArtifact a;
    a.id = j.at("id").get<std::string>();
    a.task = data::task_from_string(j.at("task").get<std::string>());
    a.original_a = j.at("original_a").get<std::string>();
    if (j.contains("original_b")) a.original_b = j["original_b"].get<std::string>();
    a.perturb_target = j.value("perturb_target", std::string("a"))[0];
    a.original_target_text = j.at("original_target_text").get<std::string>();
    a.perturbed_text = j.at("perturbed_text").get<std::string>();
    a.unperturbed = j.value("unperturbed", false);
    a.true_label = j.at("true_label").get<std::string>();
    for (const json& t : j.value("trace", json::array())) {
        attack::Edit e;
        e.span.begin = t.at("begin").get<size_t>();
        e.span.end = t.at("end").get<size_t>();
        e.original = t.at("original").get<std::string>();
        e.replacement = t.at("replacement").get<std::string>();
        a.trace.push_back(std::move(e));
    }
    auto get_opt = [&](const char* key) -> std::optional<std::string> {
        if (j.contains(key)) return j[key].get<std::string>();
        return std::nullopt;
    };
    a.original_prediction = get_opt("original_prediction");
    a.adversarial_prediction = get_opt("adversarial_prediction");
    a.defended_prediction = get_opt("defended_prediction");
    a.in_d_correct = j.value("in_d_correct", false);
    a.successful_defense = j.value("successful_defense", false);
    if (j.contains("defense")) {
        defense::DefenseOutcome o;
        const json& d = j["defense"];
        o.cleaned_text = d.at("cleaned_text").get<std::string>();
        o.explanation = d.at("explanation").get<std::string>();
        o.is_adversarial = d.at("is_adversarial").get<bool>();
        o.reasoning = d.value("reasoning", std::string());
        o.source = d.value("source", std::string("llm")) == "rule_fallback"
                       ? defense::OutcomeSource::rule_fallback
                       : defense::OutcomeSource::llm;
        a.defense_outcome = std::move(o);
    }
    return a;
}

}  // namespace guard::eval
