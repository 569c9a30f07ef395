#include "guard/bleu.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "guard/errors.hpp"

namespace guard::eval {

void validate(const BleuConfig& config) {
    if (config.orders.empty() || config.orders.size() != config.weights.size()) {
        throw std::invalid_argument("bleu config needs one weight per n-gram order");
    }
    double sum = 0.0;
    for (size_t i = 0; i < config.orders.size(); ++i) {
        if (config.orders[i] < 1) throw std::invalid_argument("n-gram order must be >= 1");
        if (config.weights[i] <= 0) throw std::invalid_argument("weights must be positive");
        sum += config.weights[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("bleu weights must sum to 1");
    }
}

std::vector<std::string> bleu_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    auto is_ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)); };
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)); };
    while (i < text.size()) {
        if (is_ws(text[i])) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < text.size() && !is_ws(text[j])) ++j;
        std::string token(text.substr(i, j - i));
        for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        // split the trailing punctuation run into single-character tokens
        size_t core = token.size();
        while (core > 0 && is_punct(token[core - 1])) --core;
        if (core == token.size() || core == 0) {
            tokens.push_back(std::move(token));
        } else {
            tokens.push_back(token.substr(0, core));
            for (size_t k = core; k < token.size(); ++k) {
                tokens.push_back(std::string(1, token[k]));
            }
        }
        i = j;
    }
    return tokens;
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
    std::map<std::vector<std::string>, int> counts;
    if (tokens.size() < static_cast<size_t>(n)) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)]++;
    }
    return counts;
}

}  // namespace

double modified_precision(const std::vector<std::string>& candidate,
                          const std::vector<std::string>& reference, int n) {
    if (n < 1) throw std::invalid_argument("n-gram order must be >= 1");
    const auto cand = ngram_counts(candidate, n);
    if (cand.empty()) return 0.0;
    const auto ref = ngram_counts(reference, n);
    long total = 0, clipped = 0;
    for (const auto& [gram, count] : cand) {
        total += count;
        auto it = ref.find(gram);
        if (it != ref.end()) clipped += std::min(count, it->second);
    }
    return static_cast<double>(clipped) / static_cast<double>(total);
}

double brevity_penalty(size_t candidate_len, size_t reference_len) {
    if (candidate_len == 0) return 0.0;
    if (candidate_len >= reference_len) return 1.0;
    return std::exp(1.0 - static_cast<double>(reference_len) /
                              static_cast<double>(candidate_len));
}

double bleu_sentence(std::string_view candidate, std::string_view reference, int n,
                     bool apply_brevity_penalty) {
    const auto cand = bleu_tokenize(candidate);
    const auto ref = bleu_tokenize(reference);
    double score = modified_precision(cand, ref, n);
    if (apply_brevity_penalty && score > 0.0) {
        score *= brevity_penalty(cand.size(), ref.size());
    }
    return score;
}

double compute_bleu(const std::vector<std::pair<std::string, std::string>>& pairs,
                    const BleuConfig& config) {
    validate(config);
    if (pairs.empty()) throw EmptyPairs("bleu needs at least one (candidate, reference) pair");

    double total = 0.0;
    for (const auto& [candidate, reference] : pairs) {
        const auto cand = bleu_tokenize(candidate);
        const auto ref = bleu_tokenize(reference);
        if (config.aggregation == BleuAggregation::arithmetic_mean) {
            double pair_score = 0.0;
            for (size_t k = 0; k < config.orders.size(); ++k) {
                double p = modified_precision(cand, ref, config.orders[k]);
                if (config.brevity_penalty && p > 0.0) {
                    p *= brevity_penalty(cand.size(), ref.size());
                }
                pair_score += config.weights[k] * p;
            }
            total += pair_score;
        } else {
            double log_sum = 0.0;
            bool zero = false;
            for (size_t k = 0; k < config.orders.size(); ++k) {
                const double p = modified_precision(cand, ref, config.orders[k]);
                if (p <= 0.0) {
                    zero = true;
                    break;
                }
                log_sum += config.weights[k] * std::log(p);
            }
            if (!zero) {
                double pair_score = std::exp(log_sum);
                if (config.brevity_penalty) {
                    pair_score *= brevity_penalty(cand.size(), ref.size());
                }
                total += pair_score;
            }
        }
    }
    return total / static_cast<double>(pairs.size());
}

}  // namespace guard::eval
