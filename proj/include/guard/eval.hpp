#pragma once

#include <optional>
#include <string>
#include <vector>

#include "guard/attack.hpp"
#include "guard/bleu.hpp"
#include "guard/dataset.hpp"
#include "guard/defense.hpp"
#include "guard/gateway.hpp"

namespace guard::eval {

enum class Channel { llm, mock };
enum class DefenseMode { none, eg_cot, eg_nocot, rule_only };
enum class AsrChannel { adversarial, defended };

std::string to_string(Channel channel);
std::string to_string(DefenseMode mode);
Channel channel_from_string(std::string_view name);
DefenseMode defense_mode_from_string(std::string_view name);

struct PredictionRecord {
    std::string sample_id;
    std::optional<std::string> original_prediction;
    std::optional<std::string> adversarial_prediction;
    std::optional<std::string> defended_prediction;
    std::string true_label;
    bool in_d_correct = false;
};

// Eq-style attack success rate: among records the model got right on the
// clean input, the fraction whose chosen-channel prediction flipped away
// from the true label. Records outside D_correct are ignored; a record
// without a prediction on the chosen channel counts as not flipped.
double compute_asr(const std::vector<PredictionRecord>& records, AsrChannel channel);

struct ClassifierConfig {
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    int max_tokens = 16;
};

// The zero-shot classification request the llm channel sends; exposed so
// transcripts can be reconstructed offline.
llm::CompletionRequest classification_request(const data::LabeledSample& sample,
                                              const ClassifierConfig& config);

// Maps a model reply onto the task's label set; UnmappableReply otherwise.
std::string map_reply_to_label(data::Task task, std::string_view reply);

// Deterministic keyword classifier used for offline runs.
std::string classify_mock(const data::LabeledSample& sample);

std::string classify(const data::LabeledSample& sample, Channel channel,
                     llm::Gateway* gateway, llm::CallMode mode = llm::CallMode::replay,
                     const ClassifierConfig& config = ClassifierConfig{});

struct PipelineConfig {
    attack::AttackSpec attack;
    DefenseMode defense = DefenseMode::none;
    Channel channel = Channel::mock;
    llm::CallMode mode = llm::CallMode::replay;
    ClassifierConfig classifier;
    defense::DefenseConfig defense_config;
    BleuConfig bleu;
};

// Everything the study kit needs about one sample's trip through the
// pipeline.
struct SampleArtifact {
    std::string id;
    data::Task task = data::Task::sst2;
    std::string original_a;
    std::optional<std::string> original_b;
    char perturb_target = 'a';
    std::string original_target_text;
    std::string perturbed_text;
    std::vector<attack::Edit> trace;
    bool unperturbed = false;
    std::string true_label;
    std::optional<std::string> original_prediction;
    std::optional<std::string> adversarial_prediction;
    std::optional<std::string> defended_prediction;
    bool in_d_correct = false;
    std::optional<defense::DefenseOutcome> defense_outcome;
    bool successful_defense = false;
};

struct EvalReport {
    data::Task task = data::Task::sst2;
    attack::AttackSpec attack;
    DefenseMode defense = DefenseMode::none;
    Channel channel = Channel::mock;
    size_t n_samples = 0;
    size_t d_correct = 0;
    size_t adversarial_flips = 0;
    std::optional<double> adversarial_asr;
    std::optional<size_t> defended_flips;
    std::optional<double> defended_asr;
    size_t successful_defenses = 0;
    std::optional<double> bleu;  // over successful defenses
    size_t rule_fallback_count = 0;
};

struct PipelineResult {
    EvalReport report;
    std::vector<SampleArtifact> artifacts;
};

// Classify originals, forge the adversarial corpus, optionally defend,
// classify again, and score. Individual model-defense failures are
// absorbed into the rule fallback and counted.
PipelineResult run_pipeline(const std::vector<data::LabeledSample>& samples,
                            const PipelineConfig& config, llm::Gateway* gateway,
                            const Resources& resources);

std::string report_to_json(const EvalReport& report);
std::string render_report_table(const std::vector<EvalReport>& reports);

std::string artifact_to_json_line(const SampleArtifact& artifact);
SampleArtifact artifact_from_json_line(const std::string& line);

}  // namespace guard::eval
