#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "guard/analysis.hpp"
#include "guard/resources.hpp"
#include "guard/rng.hpp"

namespace guard::attack {

enum class AttackLevel { character, word, sentence };
enum class Technique {
    typo,
    homoglyph,
    leetspeak,
    invisible_insert,
    synonym_swap,
    word_insert,
    word_delete,
    distractor_suffix,
};

std::string to_string(AttackLevel level);
std::string to_string(Technique technique);
AttackLevel level_of(Technique technique);
Technique technique_from_string(std::string_view name);

struct AttackSpec {
    AttackLevel level = AttackLevel::character;
    Technique technique = Technique::typo;
    int intensity = 1;  // number of edit sites
    uint64_t seed = 0;
};

// Throws std::invalid_argument when technique and level disagree or
// intensity < 1.
void validate(const AttackSpec& spec);

// One edit against the ORIGINAL text; spans are disjoint byte ranges and
// the trace is kept sorted ascending. Insertions use empty spans.
struct Edit {
    text::Span span;
    std::string original;
    std::string replacement;

    bool operator==(const Edit&) const = default;
};

struct AdversarialExample {
    std::string id;
    std::string original;
    std::string perturbed;
    std::string label;
    std::vector<Edit> trace;
    AttackSpec spec;
    bool unperturbed = false;  // no eligible edit site existed
};

// Replays a trace; the result must equal the recorded perturbed text.
std::string apply_trace(std::string_view original, const std::vector<Edit>& trace);

AdversarialExample perturb_char(std::string_view text, const AttackSpec& spec,
                                const text::ConfusablesTable& table, Rng& rng);

AdversarialExample perturb_word(std::string_view text, const AttackSpec& spec,
                                const std::map<std::string, std::vector<std::string>>& synonyms,
                                const std::vector<std::string>& hedges, Rng& rng);

// Appends one contradictory modifier before the final period (or at the
// very end when there is none). Draws from the distractor list with a
// generator seeded by spec.seed.
AdversarialExample perturb_sentence(std::string_view text, const AttackSpec& spec,
                                    const std::vector<std::string>& distractors);

// Stopwords shared by the deletion attack and the mock classifiers.
const std::vector<std::string>& stopwords();
bool is_stopword(std::string_view lowercase_word);

struct CorpusSample {
    std::string id;
    std::string text;
    std::string label;
};

// Per-sample seeds derive as spec.seed XOR fnv1a64(sample id), so corpora
// are reproducible and order-independent per sample. Samples with no
// eligible edit site pass through flagged but unperturbed.
std::vector<AdversarialExample> forge_corpus(const std::vector<CorpusSample>& samples,
                                             const AttackSpec& spec,
                                             const Resources& resources);

// Dispatches on spec.technique with an explicit generator.
AdversarialExample perturb(std::string_view text, const AttackSpec& spec,
                           const Resources& resources, Rng& rng);

// JSONL (de)serialization for corpus files.
std::string to_json_line(const AdversarialExample& example);
AdversarialExample from_json_line(const std::string& line);

}  // namespace guard::attack
