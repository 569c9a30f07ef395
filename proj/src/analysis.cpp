#include "guard/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "guard/errors.hpp"
#include "guard/utf8.hpp"

namespace guard::text {

namespace {

bool is_space_cp(char32_t cp) {
    switch (cp) {
        case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
        case 0x0085: case 0x00A0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_ascii_punct(char32_t cp) {
    return cp < 0x80 && std::ispunct(static_cast<unsigned char>(cp));
}

bool is_punct_cp(char32_t cp) {
    if (is_ascii_punct(cp)) return true;
    // general punctuation block minus the invisible/format characters
    if (cp >= 0x2010 && cp <= 0x2027) return true;
    if (cp >= 0x2030 && cp <= 0x205E) return true;
    switch (cp) {
        case 0x00A1: case 0x00BF: case 0x00AB: case 0x00BB:
        case 0x201C: case 0x201D: case 0x2018: case 0x2019:
            return true;
        default:
            return false;
    }
}

bool is_control_cp(char32_t cp) {
    if (cp == U'\t' || cp == U'\n' || cp == U'\r') return false;
    return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F);
}

bool is_hyphen_cp(char32_t cp) {
    return cp == U'-' || cp == 0x2010 || cp == 0x2011;
}

char ascii_lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = ascii_lower(c);
    return out;
}

bool all_ascii_letters(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c));
    });
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
    });
}

Level level_for(Kind kind) {
    switch (kind) {
        case Kind::homoglyph:
        case Kind::invisible_char:
        case Kind::control_char:
            return Level::character;
        case Kind::leetspeak:
        case Kind::typo:
            return Level::word;
        default:
            return Level::structural;
    }
}

// Expansion options for each leet character.
const std::vector<std::pair<char, std::string>>& leet_options() {
    static const std::vector<std::pair<char, std::string>> opts = {
        {'0', "o"}, {'1', "li"}, {'3', "e"}, {'4', "a"},
        {'5', "s"}, {'7', "t"}, {'@', "a"}, {'$', "s"},
    };
    return opts;
}

const std::string* leet_expansions(char c) {
    for (const auto& [key, exp] : leet_options()) {
        if (key == c) return &exp;
    }
    return nullptr;
}

// Restores simple title case: "Gurl" corrected by lowercase "girl" should
// come back as "Girl".
std::string match_case(std::string_view token, std::string suggestion) {
    if (!token.empty() && !suggestion.empty() &&
        std::isupper(static_cast<unsigned char>(token[0]))) {
        bool rest_lower = std::all_of(token.begin() + 1, token.end(), [](char c) {
            return !std::isupper(static_cast<unsigned char>(c));
        });
        if (rest_lower) {
            suggestion[0] =
                static_cast<char>(std::toupper(static_cast<unsigned char>(suggestion[0])));
        }
    }
    return suggestion;
}

uint32_t parse_hex_cp(std::string_view field, const std::string& path, size_t line_no) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value, 16);
    if (ec != std::errc{} || ptr != field.data() + field.size() || value > 0x10FFFF) {
        throw ResourceError(path + ":" + std::to_string(line_no) +
                            ": bad code point '" + std::string(field) + "'");
    }
    return value;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

std::string to_string(Level level) {
    switch (level) {
        case Level::character: return "character";
        case Level::word: return "word";
        case Level::structural: return "structural";
    }
    return "?";
}

std::string to_string(Kind kind) {
    switch (kind) {
        case Kind::homoglyph: return "homoglyph";
        case Kind::invisible_char: return "invisible_char";
        case Kind::control_char: return "control_char";
        case Kind::leetspeak: return "leetspeak";
        case Kind::typo: return "typo";
        case Kind::suspicious_insertion: return "suspicious_insertion";
        case Kind::injection_cue: return "injection_cue";
        case Kind::punctuation_anomaly: return "punctuation_anomaly";
    }
    return "?";
}

double ScoreWeights::weight(Kind kind) const {
    switch (kind) {
        case Kind::homoglyph: return homoglyph;
        case Kind::invisible_char: return invisible_char;
        case Kind::control_char: return control_char;
        case Kind::leetspeak: return leetspeak;
        case Kind::typo: return typo;
        case Kind::suspicious_insertion: return suspicious_insertion;
        case Kind::injection_cue: return injection_cue;
        case Kind::punctuation_anomaly: return punctuation_anomaly;
    }
    return 0.0;
}

// --- ConfusablesTable ------------------------------------------------------

ConfusablesTable ConfusablesTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("cannot open confusables table: " + path);
    ConfusablesTable table;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const size_t tab = line.find('\t');
        const std::string src_field = line.substr(0, tab);
        const char32_t src = parse_hex_cp(src_field, path, line_no);
        std::string dst_field =
            tab == std::string::npos ? std::string() : line.substr(tab + 1);
        if (dst_field.empty()) {
            table.invisible_.insert(src);
            continue;
        }
        std::string replacement;
        std::stringstream fields(dst_field);
        std::string part;
        while (std::getline(fields, part, ',')) {
            replacement += utf8::encode(parse_hex_cp(part, path, line_no));
        }
        table.map_[src] = replacement;
    }
    table.check_fixpoint();
    table.index_reverse();
    return table;
}

ConfusablesTable ConfusablesTable::from_entries(
    const std::vector<std::pair<char32_t, std::u32string>>& mappings,
    const std::vector<char32_t>& invisible) {
    ConfusablesTable table;
    for (const auto& [src, dst] : mappings) table.map_[src] = utf8::encode(dst);
    table.invisible_.insert(invisible.begin(), invisible.end());
    table.check_fixpoint();
    table.index_reverse();
    return table;
}

const std::string* ConfusablesTable::lookup(char32_t cp) const {
    auto it = map_.find(cp);
    return it == map_.end() ? nullptr : &it->second;
}

bool ConfusablesTable::is_invisible(char32_t cp) const {
    return invisible_.count(cp) > 0;
}

void ConfusablesTable::check_fixpoint() const {
    for (const auto& [src, replacement] : map_) {
        for (const auto& cp : utf8::decode(replacement)) {
            if (map_.count(cp.value) || invisible_.count(cp.value)) {
                throw ResourceError(
                    "confusables table is not fixpoint-safe: replacement for U+" +
                    std::to_string(static_cast<uint32_t>(src)) +
                    " contains a mapped code point");
            }
        }
    }
}

void ConfusablesTable::index_reverse() {
    reverse_.clear();
    for (const auto& [src, replacement] : map_) {
        const auto cps = utf8::decode(replacement);
        if (cps.size() == 1) reverse_[cps[0].value].push_back(src);
    }
    for (auto& [canon, sources] : reverse_) std::sort(sources.begin(), sources.end());
}

// --- Lexicon ---------------------------------------------------------------

Lexicon Lexicon::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("cannot open lexicon: " + path);
    Lexicon lexicon;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        const size_t tab = line.find('\t');
        std::string word = line.substr(0, tab);
        int rank = 0;
        if (tab != std::string::npos) {
            const std::string rank_field = line.substr(tab + 1);
            auto [ptr, ec] = std::from_chars(
                rank_field.data(), rank_field.data() + rank_field.size(), rank);
            if (ec != std::errc{} || ptr != rank_field.data() + rank_field.size() ||
                rank < 1) {
                throw ResourceError(path + ":" + std::to_string(line_no) +
                                    ": bad rank '" + rank_field + "'");
            }
        }
        lexicon.add(std::move(word), rank);
    }
    lexicon.build_index();
    return lexicon;
}

Lexicon Lexicon::from_words(const std::vector<std::pair<std::string, int>>& ranked_words) {
    Lexicon lexicon;
    for (const auto& [word, rank] : ranked_words) lexicon.add(word, rank);
    lexicon.build_index();
    return lexicon;
}

void Lexicon::add(std::string word, int rank) {
    if (word.empty()) throw ResourceError("empty lexicon entry");
    for (char c : word) {
        if (std::isspace(static_cast<unsigned char>(c)) ||
            std::isupper(static_cast<unsigned char>(c))) {
            throw ResourceError("lexicon entry must be lowercase without whitespace: '" +
                                word + "'");
        }
    }
    if (by_word_.count(word)) return;
    by_word_[word] = words_.size();
    words_.push_back(std::move(word));
    ranks_.push_back(rank);
}

void Lexicon::build_index() {
    delete1_.clear();
    for (size_t i = 0; i < words_.size(); ++i) {
        const std::string& w = words_[i];
        delete1_[w].push_back(static_cast<uint32_t>(i));
        for (size_t pos = 0; pos < w.size(); ++pos) {
            std::string variant = w;
            variant.erase(pos, 1);
            delete1_[variant].push_back(static_cast<uint32_t>(i));
        }
    }
}

bool Lexicon::contains(std::string_view word) const {
    return by_word_.count(std::string(word)) > 0;
}

std::optional<int> Lexicon::rank(std::string_view word) const {
    auto it = by_word_.find(std::string(word));
    if (it == by_word_.end() || ranks_[it->second] == 0) return std::nullopt;
    return ranks_[it->second];
}

namespace {

// Rank value used for ordering when a word carries no rank.
constexpr int kUnranked = std::numeric_limits<int>::max();

}  // namespace

std::vector<Lexicon::Suggestion> Lexicon::neighbors_at_one(std::string_view token) const {
    std::vector<uint32_t> candidates;
    auto collect = [&](const std::string& variant) {
        auto it = delete1_.find(variant);
        if (it == delete1_.end()) return;
        candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    };
    const std::string t(token);
    collect(t);
    for (size_t pos = 0; pos < t.size(); ++pos) {
        std::string variant = t;
        variant.erase(pos, 1);
        collect(variant);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<Suggestion> out;
    for (uint32_t idx : candidates) {
        const std::string& w = words_[idx];
        if (w == t) continue;
        if (osa_distance(t, w, 1) == 1) {
            out.push_back({w, 1, ranks_[idx] == 0 ? std::nullopt
                                                  : std::optional<int>(ranks_[idx])});
        }
    }
    return out;
}

std::optional<Lexicon::Suggestion> Lexicon::nearest(std::string_view token,
                                                    int max_distance) const {
    std::vector<Suggestion> pool = neighbors_at_one(token);
    if (pool.empty() && max_distance >= 2) {
        for (size_t i = 0; i < words_.size(); ++i) {
            const std::string& w = words_[i];
            const size_t len_diff =
                w.size() > token.size() ? w.size() - token.size() : token.size() - w.size();
            if (len_diff > 2) continue;
            if (osa_distance(token, w, 2) == 2) {
                pool.push_back({w, 2, ranks_[i] == 0 ? std::nullopt
                                                     : std::optional<int>(ranks_[i])});
            }
        }
    }
    if (pool.empty()) return std::nullopt;
    auto key = [](const Suggestion& s) {
        return std::make_tuple(s.distance, s.rank.value_or(kUnranked), s.word);
    };
    return *std::min_element(pool.begin(), pool.end(),
                             [&](const Suggestion& a, const Suggestion& b) {
                                 return key(a) < key(b);
                             });
}

// --- distance --------------------------------------------------------------

size_t osa_distance(std::string_view a, std::string_view b, size_t cutoff) {
    const size_t n = a.size(), m = b.size();
    const size_t over = cutoff + 1;
    if (n > m + cutoff || m > n + cutoff) return over;
    std::vector<size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        size_t row_min = cur[0];
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub_cost = a[i - 1] == b[j - 1] ? 0 : 1;
            size_t best = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + sub_cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
                best = std::min(best, prev2[j - 2] + 1);
            }
            cur[j] = best;
            row_min = std::min(row_min, best);
        }
        if (row_min > cutoff) return over;
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return std::min(prev[m], over);
}

// --- tokenizer ---------------------------------------------------------------

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    const auto cps = utf8::decode(text);
    size_t i = 0;
    while (i < cps.size()) {
        if (is_space_cp(cps[i].value)) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < cps.size() && !is_space_cp(cps[j].value)) ++j;
        // strip surrounding punctuation
        size_t lo = i, hi = j;
        while (lo < hi && is_punct_cp(cps[lo].value) && !is_hyphen_cp(cps[lo].value)) ++lo;
        while (hi > lo && is_punct_cp(cps[hi - 1].value) && !is_hyphen_cp(cps[hi - 1].value))
            --hi;
        // split at hyphens
        size_t seg = lo;
        for (size_t k = lo; k <= hi; ++k) {
            if (k == hi || is_hyphen_cp(cps[k].value)) {
                if (k > seg) {
                    const size_t begin = cps[seg].offset;
                    const size_t end = cps[k - 1].offset + cps[k - 1].size;
                    tokens.push_back(
                        {std::string(text.substr(begin, end - begin)), {begin, end}});
                }
                seg = k + 1;
            }
        }
        i = j;
    }
    return tokens;
}

// --- scanners ----------------------------------------------------------------

std::vector<Finding> scan_characters(std::string_view text, const ConfusablesTable& table) {
    enum class Class { none, homoglyph, invisible, control };
    std::vector<Finding> out;
    const auto cps = utf8::decode(text);

    size_t i = 0;
    while (i < cps.size()) {
        Class cls = Class::none;
        if (table.lookup(cps[i].value)) cls = Class::homoglyph;
        else if (table.is_invisible(cps[i].value)) cls = Class::invisible;
        else if (is_control_cp(cps[i].value)) cls = Class::control;
        if (cls == Class::none) {
            ++i;
            continue;
        }
        size_t j = i;
        std::string replacement;
        auto same_class = [&](char32_t cp) {
            switch (cls) {
                case Class::homoglyph: return table.lookup(cp) != nullptr;
                case Class::invisible: return table.is_invisible(cp);
                case Class::control: return is_control_cp(cp) && !table.is_invisible(cp);
                default: return false;
            }
        };
        while (j < cps.size() && same_class(cps[j].value)) {
            if (cls == Class::homoglyph) replacement += *table.lookup(cps[j].value);
            ++j;
        }
        const size_t begin = cps[i].offset;
        const size_t end = cps[j - 1].offset + cps[j - 1].size;
        Finding f;
        f.kind = cls == Class::homoglyph   ? Kind::homoglyph
                 : cls == Class::invisible ? Kind::invisible_char
                                           : Kind::control_char;
        f.level = Level::character;
        f.span = {begin, end};
        f.original = std::string(text.substr(begin, end - begin));
        f.suggested = cls == Class::homoglyph ? replacement : std::string();
        f.confidence = 1.0;
        out.push_back(std::move(f));
        i = j;
    }
    return out;
}

std::vector<Finding> scan_leetspeak(std::string_view text, const Lexicon& lexicon) {
    std::vector<Finding> out;
    for (const Token& token : tokenize(text)) {
        const std::string& raw = token.text;
        if (all_digits(raw)) continue;  // "911" stays
        bool has_leet = false, has_letter = false, decodable = true;
        for (char c : raw) {
            if (std::isalpha(static_cast<unsigned char>(c))) {
                has_letter = true;
            } else if (leet_expansions(c)) {
                has_leet = true;
            } else {
                decodable = false;  // untranslatable digit or symbol
                break;
            }
        }
        if (!decodable || !has_leet || !has_letter) continue;
        const std::string lowered = lower_ascii(raw);
        if (lexicon.contains(lowered)) continue;

        // enumerate expansion combinations (bounded; '1' is the only
        // multi-option character so the space stays tiny)
        std::vector<std::string> candidates{""};
        for (char c : lowered) {
            const std::string* exps = leet_expansions(c);
            std::vector<std::string> next;
            for (const std::string& prefix : candidates) {
                if (exps) {
                    for (char e : *exps) next.push_back(prefix + e);
                } else {
                    next.push_back(prefix + c);
                }
                if (next.size() > 256) break;
            }
            candidates = std::move(next);
            if (candidates.size() > 256) candidates.resize(256);
        }

        std::optional<std::string> best;
        std::optional<int> best_rank;
        for (const std::string& cand : candidates) {
            if (!lexicon.contains(cand)) continue;
            const auto rank = lexicon.rank(cand);
            auto key = [](const std::optional<int>& r, const std::string& w) {
                return std::make_pair(r.value_or(kUnranked), w);
            };
            if (!best || key(rank, cand) < key(best_rank, *best)) {
                best = cand;
                best_rank = rank;
            }
        }
        if (!best) continue;

        Finding f;
        f.kind = Kind::leetspeak;
        f.level = Level::word;
        f.span = token.span;
        f.original = raw;
        f.suggested = match_case(raw, *best);
        f.confidence = 0.9;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<Finding> scan_typos(std::string_view text, const Lexicon& lexicon) {
    if (lexicon.empty()) throw EmptyLexicon("typo scan requires a non-empty lexicon");
    std::vector<Finding> out;
    for (const Token& token : tokenize(text)) {
        const std::string& raw = token.text;
        if (raw.size() < 3 || !all_ascii_letters(raw)) continue;
        const std::string lowered = lower_ascii(raw);

        if (!lexicon.contains(lowered)) {
            const int max_distance = raw.size() >= 8 ? 2 : 1;
            const auto hit = lexicon.nearest(lowered, max_distance);
            if (!hit) continue;
            Finding f;
            f.kind = Kind::typo;
            f.level = Level::word;
            f.span = token.span;
            f.original = raw;
            f.suggested = match_case(raw, hit->word);
            f.confidence = hit->distance == 1 ? 0.8 : 0.6;
            out.push_back(std::move(f));
            continue;
        }

        // In-lexicon token shadowed by a much more frequent neighbor, e.g.
        // "gaol" one transposition from "goal". Low confidence: the word is
        // valid on its own.
        const auto own_rank = lexicon.rank(lowered);
        if (!own_rank) continue;
        std::optional<Lexicon::Suggestion> dominant;
        for (const auto& neighbor : lexicon.neighbors_at_one(lowered)) {
            if (!neighbor.rank || *neighbor.rank > *own_rank - 1000) continue;
            if (!dominant ||
                std::make_pair(*neighbor.rank, neighbor.word) <
                    std::make_pair(*dominant->rank, dominant->word)) {
                dominant = neighbor;
            }
        }
        if (!dominant) continue;
        Finding f;
        f.kind = Kind::typo;
        f.level = Level::word;
        f.span = token.span;
        f.original = raw;
        f.suggested = match_case(raw, dominant->word);
        f.confidence = 0.4;
        out.push_back(std::move(f));
    }
    return out;
}

const std::vector<std::string>& injection_cues() {
    static const std::vector<std::string> cues = {
        "ignore previous instructions",
        "ignore all previous instructions",
        "disregard the above",
        "disregard previous instructions",
        "disregard all previous instructions",
        "forget your instructions",
        "forget everything above",
        "you are now",
        "system:",
        "new instructions:",
        "override your instructions",
        "pretend to be",
        "act as if you are",
        "do not follow the instructions",
    };
    return cues;
}

const std::vector<std::string>& default_distractors() {
    static const std::vector<std::string> entries = {
        ", unfortunately",
        ", sadly",
        "— terrible overall",
        ", regrettably",
    };
    return entries;
}

namespace {

void merge_same_kind_overlaps(std::vector<Finding>& findings, std::string_view text) {
    std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        return std::make_tuple(a.span.begin, a.span.end, a.kind) <
               std::make_tuple(b.span.begin, b.span.end, b.kind);
    });
    std::vector<Finding> merged;
    for (Finding& f : findings) {
        if (!merged.empty() && merged.back().kind == f.kind &&
            merged.back().span.overlaps(f.span)) {
            Finding& prev = merged.back();
            prev.span.end = std::max(prev.span.end, f.span.end);
            prev.original =
                std::string(text.substr(prev.span.begin, prev.span.size()));
            prev.confidence = std::max(prev.confidence, f.confidence);
        } else {
            merged.push_back(std::move(f));
        }
    }
    findings = std::move(merged);
}

}  // namespace

std::vector<Finding> scan_structure(std::string_view text) {
    std::vector<Finding> out;
    const std::string lowered = lower_ascii(text);

    for (const std::string& cue : injection_cues()) {
        size_t pos = 0;
        while ((pos = lowered.find(cue, pos)) != std::string::npos) {
            Finding f;
            f.kind = Kind::injection_cue;
            f.level = Level::structural;
            f.span = {pos, pos + cue.size()};
            f.original = std::string(text.substr(pos, cue.size()));
            f.confidence = 1.0;
            out.push_back(std::move(f));
            pos += cue.size();
        }
    }

    const auto cps = utf8::decode(text);
    size_t i = 0;
    while (i < cps.size()) {
        if (!is_punct_cp(cps[i].value)) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < cps.size() && cps[j].value == cps[i].value) ++j;
        if (j - i >= 4) {
            const size_t begin = cps[i].offset;
            const size_t end = cps[j - 1].offset + cps[j - 1].size;
            Finding f;
            f.kind = Kind::punctuation_anomaly;
            f.level = Level::structural;
            f.span = {begin, end};
            f.original = std::string(text.substr(begin, end - begin));
            f.confidence = 1.0;
            out.push_back(std::move(f));
        }
        i = j;
    }

    // Trailing contradictory modifier, the signature of suffix-style
    // sentence attacks. The deletion span swallows the joining space so a
    // repair restores the pre-attack bytes.
    size_t end = text.size();
    while (end > 0 && is_space_cp(static_cast<unsigned char>(text[end - 1]))) --end;
    size_t content_end = end;
    if (content_end > 0 &&
        (text[content_end - 1] == '.' || text[content_end - 1] == '!' ||
         text[content_end - 1] == '?')) {
        --content_end;
    }
    for (const std::string& entry : default_distractors()) {
        if (content_end < entry.size()) continue;
        const size_t begin = content_end - entry.size();
        if (lowered.compare(begin, entry.size(), lower_ascii(entry)) != 0) continue;
        size_t span_begin = begin;
        if (entry[0] != ',' && span_begin > 0 && text[span_begin - 1] == ' ') {
            --span_begin;
        }
        Finding f;
        f.kind = Kind::suspicious_insertion;
        f.level = Level::structural;
        f.span = {span_begin, content_end};
        f.original = std::string(text.substr(span_begin, content_end - span_begin));
        f.suggested = std::string();
        f.confidence = 0.6;
        out.push_back(std::move(f));
        break;
    }

    merge_same_kind_overlaps(out, text);
    return out;
}

// --- analyze / purify --------------------------------------------------------

AnalysisReport analyze(std::string_view text, const ConfusablesTable& table,
                       const Lexicon& lexicon, const ScoreWeights& weights) {
    const std::vector<Finding> char_findings = scan_characters(text, table);

    std::vector<Finding> findings = char_findings;
    auto overlaps_char_finding = [&](const Finding& f) {
        return std::any_of(char_findings.begin(), char_findings.end(),
                           [&](const Finding& c) { return c.span.overlaps(f.span); });
    };
    // Word- and structure-level hits inside a character-level span are
    // dropped: the character repair rewrites those bytes first, and a stale
    // second suggestion would fight it.
    for (auto scan_output : {scan_leetspeak(text, lexicon), scan_typos(text, lexicon),
                             scan_structure(text)}) {
        for (Finding& f : scan_output) {
            if (!overlaps_char_finding(f)) findings.push_back(std::move(f));
        }
    }

    merge_same_kind_overlaps(findings, text);

    AnalysisReport report;
    report.findings = std::move(findings);
    report.levels_run = {Level::character, Level::word, Level::structural};
    for (const Finding& f : report.findings) {
        report.suspicion_score += weights.weight(f.kind) * f.confidence;
    }
    return report;
}

std::string purify_rule_based(std::string_view text, const AnalysisReport& report) {
    for (const Finding& f : report.findings) {
        if (f.span.end > text.size() ||
            text.substr(f.span.begin, f.span.size()) != f.original) {
            throw SpanMismatch("finding at [" + std::to_string(f.span.begin) + "," +
                               std::to_string(f.span.end) +
                               ") does not match the text being purified");
        }
    }
    std::vector<const Finding*> ordered;
    for (const Finding& f : report.findings) {
        if (f.suggested) ordered.push_back(&f);
    }
    std::sort(ordered.begin(), ordered.end(), [](const Finding* a, const Finding* b) {
        return a->span.begin > b->span.begin;
    });
    std::string result(text);
    size_t applied_begin = std::string::npos;
    for (const Finding* f : ordered) {
        if (applied_begin != std::string::npos && f->span.end > applied_begin) {
            continue;  // overlap with an already-applied repair; rightmost wins
        }
        result.replace(f->span.begin, f->span.size(), *f->suggested);
        applied_begin = f->span.begin;
    }
    return result;
}

}  // namespace guard::text
