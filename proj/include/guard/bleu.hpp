#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace guard::eval {

// How per-order scores combine into the final corpus score. The arithmetic
// mode is the default: score = (1/N) sum_i sum_n w_n * BLEU_i(n), i.e. a
// weighted arithmetic mean of the per-order sentence scores. The geometric
// mode is conventional BLEU (weighted log-precision average per pair, then
// averaged over pairs); it annihilates on any zero precision.
enum class BleuAggregation { arithmetic_mean, geometric_mean };

struct BleuConfig {
    std::vector<int> orders = {1, 2};
    std::vector<double> weights = {0.5, 0.5};
    BleuAggregation aggregation = BleuAggregation::arithmetic_mean;
    bool brevity_penalty = true;
};

void validate(const BleuConfig& config);  // weights positive, sum to 1

// Lowercase, whitespace-split, with trailing punctuation split off into
// single-character tokens.
std::vector<std::string> bleu_tokenize(std::string_view text);

// Modified n-gram precision with reference-count clipping, over token
// vectors. Candidates shorter than n tokens score 0.
double modified_precision(const std::vector<std::string>& candidate,
                          const std::vector<std::string>& reference, int n);

// exp(1 - r/c) when c < r, else 1; c == 0 gives 0.
double brevity_penalty(size_t candidate_len, size_t reference_len);

// Single-order sentence score: clipped precision times the brevity penalty
// (when enabled).
double bleu_sentence(std::string_view candidate, std::string_view reference, int n,
                     bool apply_brevity_penalty = true);

// Corpus score over (cleaned, original) pairs under the configured
// aggregation. Throws EmptyPairs on an empty list.
double compute_bleu(const std::vector<std::pair<std::string, std::string>>& pairs,
                    const BleuConfig& config = BleuConfig{});

}  // namespace guard::eval
