#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace guard::text {

enum class Level { character, word, structural };
enum class Kind {
    homoglyph,
    invisible_char,
    control_char,
    leetspeak,
    typo,
    suspicious_insertion,
    injection_cue,
    punctuation_anomaly,
};

std::string to_string(Level level);
std::string to_string(Kind kind);

// Half-open byte range into the UTF-8 encoding of the analyzed text.
struct Span {
    size_t begin = 0;
    size_t end = 0;

    size_t size() const { return end - begin; }
    bool overlaps(const Span& other) const {
        return begin < other.end && other.begin < end;
    }
    bool operator==(const Span&) const = default;
};

struct Finding {
    Level level = Level::character;
    Kind kind = Kind::homoglyph;
    Span span;
    std::string original;                  // exact substring at span
    std::optional<std::string> suggested;  // replacement; "" means delete
    double confidence = 1.0;
};

struct AnalysisReport {
    std::vector<Finding> findings;  // sorted by span begin
    double suspicion_score = 0.0;
    std::set<Level> levels_run;
};

// Per-kind weights feeding the suspicion score.
struct ScoreWeights {
    double homoglyph = 1.0;
    double invisible_char = 1.0;
    double control_char = 1.0;
    double leetspeak = 0.8;
    double typo = 0.5;
    double suspicious_insertion = 0.7;
    double injection_cue = 1.5;
    double punctuation_anomaly = 0.3;

    double weight(Kind kind) const;
};

// Maps visually confusable code points to their canonical ASCII form and
// tracks the set of invisible code points that get deleted outright.
//
// File format, one entry per line, UTF-8, LF:
//   SRC_HEX<TAB>DST_HEX[,DST_HEX...]   replacement mapping
//   SRC_HEX                            invisible code point (deleted)
// '#' starts a comment. No replacement may contain a code point that is
// itself a source, so one purification pass reaches a fixpoint.
class ConfusablesTable {
  public:
    static ConfusablesTable load(const std::string& path);
    static ConfusablesTable from_entries(
        const std::vector<std::pair<char32_t, std::u32string>>& mappings,
        const std::vector<char32_t>& invisible);

    const std::string* lookup(char32_t cp) const;
    bool is_invisible(char32_t cp) const;
    size_t size() const { return map_.size() + invisible_.size(); }

    // ASCII char -> confusable sources whose replacement is exactly that
    // char. This is what the attack generators draw from, which keeps
    // forward purification an exact inverse.
    const std::unordered_map<char32_t, std::vector<char32_t>>& reverse_map() const {
        return reverse_;
    }

  private:
    void index_reverse();
    void check_fixpoint() const;

    std::unordered_map<char32_t, std::string> map_;
    std::unordered_set<char32_t> invisible_;
    std::unordered_map<char32_t, std::vector<char32_t>> reverse_;
};

// Lowercase word list with optional frequency ranks (1 = most frequent).
// File format: "word[<TAB>rank]" per line, UTF-8, LF, '#' comments.
class Lexicon {
  public:
    static Lexicon load(const std::string& path);
    static Lexicon from_words(
        const std::vector<std::pair<std::string, int>>& ranked_words);

    bool empty() const { return words_.empty(); }
    size_t size() const { return words_.size(); }
    bool contains(std::string_view word) const;
    std::optional<int> rank(std::string_view word) const;
    const std::vector<std::string>& words() const { return words_; }

    struct Suggestion {
        std::string word;
        int distance = 0;
        std::optional<int> rank;
    };
    // Best lexicon word within max_distance (1 or 2) of token, ranked by
    // (distance, frequency rank, lexicographic). nullopt when nothing is
    // close enough. Token must be lowercase ASCII.
    std::optional<Suggestion> nearest(std::string_view token, int max_distance) const;
    // All lexicon words at OSA distance exactly 1 from token.
    std::vector<Suggestion> neighbors_at_one(std::string_view token) const;

  private:
    void add(std::string word, int rank);
    void build_index();

    std::vector<std::string> words_;
    std::vector<int> ranks_;  // 0 = unranked
    std::unordered_map<std::string, size_t> by_word_;
    // SymSpell-style index: delete-1 variant -> word indices.
    std::unordered_map<std::string, std::vector<uint32_t>> delete1_;
};

// Damerau-Levenshtein distance in the optimal-string-alignment variant
// (adjacent transpositions, no substring edited twice). Returns cutoff + 1
// as soon as the distance is known to exceed cutoff.
size_t osa_distance(std::string_view a, std::string_view b, size_t cutoff);

// Word token with its byte extent after stripping surrounding punctuation.
// Hyphenated compounds are split at the hyphens.
struct Token {
    std::string text;
    Span span;
};
std::vector<Token> tokenize(std::string_view text);

// Character level: homoglyphs, invisible and control characters. One
// finding per maximal run of same-kind code points.
std::vector<Finding> scan_characters(std::string_view text,
                                     const ConfusablesTable& table);

// Word level: digit/symbol substitutions whose expansion is a lexicon word
// (0->o, 1->l/i, 3->e, 4->a, 5->s, 7->t, @->a, $->s). Pure-numeric tokens
// are never flagged.
std::vector<Finding> scan_leetspeak(std::string_view text, const Lexicon& lexicon);

// Word level: unknown all-letter tokens within OSA distance 1 of a lexicon
// word (2 for tokens of length >= 8), and known tokens one edit away from a
// word at least 1000 frequency ranks more frequent (low confidence).
std::vector<Finding> scan_typos(std::string_view text, const Lexicon& lexicon);

// Structural level: injection-cue phrases, runs of >= 4 identical
// punctuation characters, and trailing contradictory-modifier insertions.
std::vector<Finding> scan_structure(std::string_view text);

// The built-in structural cue and trailing-distractor phrase lists.
const std::vector<std::string>& injection_cues();
const std::vector<std::string>& default_distractors();

AnalysisReport analyze(std::string_view text, const ConfusablesTable& table,
                       const Lexicon& lexicon,
                       const ScoreWeights& weights = ScoreWeights{});

// Applies every suggested replacement right to left. Findings without a
// suggestion are left alone; a finding whose recorded original no longer
// matches the text raises SpanMismatch.
std::string purify_rule_based(std::string_view text, const AnalysisReport& report);

}  // namespace guard::text
