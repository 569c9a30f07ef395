#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guard/dataset.hpp"
#include "guard/eval.hpp"
#include "guard/stats.hpp"

namespace guard::study {

enum class Condition { eg, eg_nocot };
std::string to_string(Condition condition);
Condition condition_from_string(std::string_view name);

// One study item: the adversarial input plus both conditions' outputs.
struct StudyItem {
    std::string id;
    data::Task dataset = data::Task::sst2;
    std::string adversarial_input;
    std::string eg_cleaned;
    std::string eg_explanation;
    std::string nocot_cleaned;
    std::string nocot_explanation;
};

// Pairs per-condition pipeline artifacts by sample id and keeps the items
// that were successful defenses under BOTH conditions.
std::vector<StudyItem> join_artifacts(const std::vector<eval::SampleArtifact>& eg_run,
                                      const std::vector<eval::SampleArtifact>& nocot_run);

// Seeded stratified sample without replacement: per_dataset items from each
// of the four tasks. InsufficientItems names the short dataset.
std::vector<StudyItem> sample_items(const std::vector<StudyItem>& candidates,
                                    size_t per_dataset, uint64_t seed);

struct Assignment {
    std::string annotator_id;
    std::string item_id;
    Condition first;  // presentation order: first condition shown
};

// Within-subjects schedule: every annotator rates every item under both
// conditions; the presentation order is split 50/50 (+-1) per annotator and
// mirrored between the two annotators.
std::vector<Assignment> counterbalance(const std::vector<StudyItem>& items,
                                       const std::array<std::string, 2>& annotators,
                                       uint64_t seed);

struct Rating {
    std::string annotator_id;
    std::string item_id;
    Condition condition = Condition::eg;
    int clarity = 0;
    int specificity = 0;
    int actionability = 0;
    int conciseness = 0;
    bool trust = false;
};

enum class Metric { clarity, specificity, actionability, conciseness };
std::string to_string(Metric metric);
constexpr std::array<Metric, 4> kMetrics = {Metric::clarity, Metric::specificity,
                                            Metric::actionability, Metric::conciseness};
int metric_value(const Rating& rating, Metric metric);

// CSV schema (exact header):
// annotator_id,item_id,condition,clarity,specificity,actionability,conciseness,trust
std::vector<Rating> ingest_ratings(const std::string& path);

// Fraction of items with at least one "yes" between the two annotators.
double aggregate_trust(const std::vector<Rating>& ratings, Condition condition);

struct MetricSummary {
    double eg_mean = 0.0, eg_sd = 0.0;
    double nocot_mean = 0.0, nocot_sd = 0.0;
    std::optional<stats::WilcoxonResult> test;  // absent when all differences are zero
};

struct TrustSummary {
    double eg_fraction = 0.0;
    double nocot_fraction = 0.0;
    long eg_only = 0;     // trusted under eg, not under eg_nocot
    long nocot_only = 0;  // the reverse
    std::optional<stats::McNemarResult> test;  // absent without discordant pairs
};

struct StudyResult {
    size_t n_items = 0;
    std::map<Metric, MetricSummary> metrics;
    TrustSummary trust;
};

// Item-level Likert values are averaged over the two annotators, condition
// means and sample SDs are computed over items, Wilcoxon runs per metric on
// the paired differences, and trust uses the OR rule before McNemar.
// IncompleteMatrix lists any missing (annotator, item, condition) cells.
StudyResult summarize(const std::vector<Rating>& ratings);

std::string render_table(const StudyResult& result);

// File round-trips used by the CLI.
std::string items_to_json(const std::vector<StudyItem>& items);
std::vector<StudyItem> items_from_json(const std::string& content);
std::string assignments_to_csv(const std::vector<Assignment>& assignments);

// Writes one blinded text file per item (conditions labeled A/B with a
// seeded coin flip) plus key.csv mapping labels back to conditions.
void write_study_bundle(const std::vector<StudyItem>& items, const std::string& dir,
                        uint64_t seed);

}  // namespace guard::study
