#include "guard/attack.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "guard/errors.hpp"
#include "guard/utf8.hpp"

namespace guard::attack {

using nlohmann::json;

std::string to_string(AttackLevel level) {
    switch (level) {
        case AttackLevel::character: return "character";
        case AttackLevel::word: return "word";
        case AttackLevel::sentence: return "sentence";
    }
    return "?";
}

std::string to_string(Technique technique) {
    switch (technique) {
        case Technique::typo: return "typo";
        case Technique::homoglyph: return "homoglyph";
        case Technique::leetspeak: return "leetspeak";
        case Technique::invisible_insert: return "invisible_insert";
        case Technique::synonym_swap: return "synonym_swap";
        case Technique::word_insert: return "word_insert";
        case Technique::word_delete: return "word_delete";
        case Technique::distractor_suffix: return "distractor_suffix";
    }
    return "?";
}

AttackLevel level_of(Technique technique) {
    switch (technique) {
        case Technique::typo:
        case Technique::homoglyph:
        case Technique::leetspeak:
        case Technique::invisible_insert:
            return AttackLevel::character;
        case Technique::synonym_swap:
        case Technique::word_insert:
        case Technique::word_delete:
            return AttackLevel::word;
        case Technique::distractor_suffix:
            return AttackLevel::sentence;
    }
    return AttackLevel::character;
}

Technique technique_from_string(std::string_view name) {
    for (int t = 0; t <= static_cast<int>(Technique::distractor_suffix); ++t) {
        if (to_string(static_cast<Technique>(t)) == name) {
            return static_cast<Technique>(t);
        }
    }
    throw std::invalid_argument("unknown attack technique: " + std::string(name));
}

void validate(const AttackSpec& spec) {
    if (spec.intensity < 1) {
        throw std::invalid_argument("attack intensity must be >= 1");
    }
    if (level_of(spec.technique) != spec.level) {
        throw std::invalid_argument("technique " + to_string(spec.technique) +
                                    " does not belong to level " + to_string(spec.level));
    }
}

std::string apply_trace(std::string_view original, const std::vector<Edit>& trace) {
    std::string result(original);
    for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
        const Edit& e = *it;
        if (e.span.end > result.size() ||
            result.substr(e.span.begin, e.span.size()) != e.original) {
            throw Error("trace does not match the original text");
        }
        result.replace(e.span.begin, e.span.size(), e.replacement);
    }
    return result;
}

namespace {

bool spans_collide(const text::Span& a, const text::Span& b) {
    if (a.overlaps(b)) return true;
    // zero-width edits at the same offset are the same site
    return a.begin == b.begin && (a.size() == 0 || b.size() == 0);
}

// A candidate edit site: realized lazily so the generator can consult the
// rng for per-site choices (typo action, homoglyph variant, ...).
struct Candidate {
    text::Span span;
    std::string original;
};

AdversarialExample finish(std::string_view text, const AttackSpec& spec,
                          std::vector<Edit> edits) {
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
        return a.span.begin < b.span.begin;
    });
    AdversarialExample example;
    example.original = std::string(text);
    example.trace = std::move(edits);
    example.perturbed = apply_trace(text, example.trace);
    example.spec = spec;
    return example;
}

// Draws up to spec.intensity non-colliding edits from the candidate pool.
// realize(index) turns a pool entry into an edit (may consult rng).
template <typename Realize>
std::vector<Edit> draw_edits(size_t pool_size, int intensity, Rng& rng,
                             Realize realize) {
    if (pool_size == 0) throw NoEditSites("text has no eligible edit site");
    std::vector<size_t> pool(pool_size);
    for (size_t i = 0; i < pool_size; ++i) pool[i] = i;
    std::vector<Edit> edits;
    while (!pool.empty() && edits.size() < static_cast<size_t>(intensity)) {
        const size_t at = static_cast<size_t>(rng.next_below(pool.size()));
        const size_t index = pool[at];
        pool.erase(pool.begin() + at);
        Edit edit = realize(index);
        const bool collides =
            std::any_of(edits.begin(), edits.end(), [&](const Edit& e) {
                return spans_collide(e.span, edit.span);
            });
        if (!collides) edits.push_back(std::move(edit));
    }
    if (edits.empty()) throw NoEditSites("text has no eligible edit site");
    return edits;
}

const std::vector<std::pair<char, std::string>>& inverse_leet() {
    static const std::vector<std::pair<char, std::string>> map = {
        {'o', "0"}, {'l', "1"}, {'i', "1"}, {'e', "3"},
        {'a', "4@"}, {'s', "5$"}, {'t', "7"},
    };
    return map;
}

const std::string* leet_choices(char lower) {
    for (const auto& [key, choices] : inverse_leet()) {
        if (key == lower) return &choices;
    }
    return nullptr;
}

const std::vector<char32_t>& invisible_inserts() {
    static const std::vector<char32_t> cps = {0x200B, 0x200C, 0x200D, 0x2060};
    return cps;
}

std::string match_token_case(std::string_view token, std::string word) {
    if (!token.empty() && !word.empty() &&
        std::isupper(static_cast<unsigned char>(token[0]))) {
        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    }
    return word;
}

}  // namespace

AdversarialExample perturb_char(std::string_view text, const AttackSpec& spec,
                                const text::ConfusablesTable& table, Rng& rng) {
    validate(spec);
    if (spec.level != AttackLevel::character) {
        throw std::invalid_argument("perturb_char requires a character-level spec");
    }
    const auto cps = utf8::decode(text);

    auto is_ascii_alpha = [](char32_t cp) {
        return cp < 0x80 && std::isalpha(static_cast<int>(cp));
    };

    std::vector<size_t> sites;  // indices into cps
    switch (spec.technique) {
        case Technique::typo:
            for (size_t i = 0; i < cps.size(); ++i) {
                if (is_ascii_alpha(cps[i].value)) sites.push_back(i);
            }
            break;
        case Technique::homoglyph:
            for (size_t i = 0; i < cps.size(); ++i) {
                if (table.reverse_map().count(cps[i].value)) sites.push_back(i);
            }
            break;
        case Technique::leetspeak:
            for (size_t i = 0; i < cps.size(); ++i) {
                const char32_t cp = cps[i].value;
                if (cp < 0x80 &&
                    leet_choices(static_cast<char>(
                        std::tolower(static_cast<int>(cp))))) {
                    sites.push_back(i);
                }
            }
            break;
        case Technique::invisible_insert:
            for (size_t i = 1; i < cps.size(); ++i) {
                if (is_ascii_alpha(cps[i - 1].value) && is_ascii_alpha(cps[i].value)) {
                    sites.push_back(i);
                }
            }
            break;
        default:
            throw std::invalid_argument("not a character technique");
    }

    auto realize = [&](size_t index) -> Edit {
        const size_t i = sites[index];
        const size_t off = cps[i].offset;
        const std::string ch(text.substr(off, cps[i].size));
        Edit edit;
        switch (spec.technique) {
            case Technique::typo: {
                const bool can_swap = i + 1 < cps.size() &&
                                      is_ascii_alpha(cps[i + 1].value) &&
                                      cps[i + 1].value != cps[i].value;
                // 0 = swap with next, 1 = delete, 2 = duplicate
                const uint64_t action =
                    can_swap ? rng.next_below(3) : 1 + rng.next_below(2);
                if (action == 0) {
                    const std::string next(
                        text.substr(cps[i + 1].offset, cps[i + 1].size));
                    edit.span = {off, cps[i + 1].offset + cps[i + 1].size};
                    edit.original = ch + next;
                    edit.replacement = next + ch;
                } else if (action == 1) {
                    edit.span = {off, off + cps[i].size};
                    edit.original = ch;
                    edit.replacement = "";
                } else {
                    edit.span = {off, off + cps[i].size};
                    edit.original = ch;
                    edit.replacement = ch + ch;
                }
                break;
            }
            case Technique::homoglyph: {
                const auto& sources = table.reverse_map().at(cps[i].value);
                const char32_t pickd = sources[rng.next_below(sources.size())];
                edit.span = {off, off + cps[i].size};
                edit.original = ch;
                edit.replacement = utf8::encode(pickd);
                break;
            }
            case Technique::leetspeak: {
                const std::string* choices = leet_choices(
                    static_cast<char>(std::tolower(static_cast<int>(cps[i].value))));
                edit.span = {off, off + cps[i].size};
                edit.original = ch;
                edit.replacement =
                    std::string(1, (*choices)[rng.next_below(choices->size())]);
                break;
            }
            case Technique::invisible_insert: {
                const char32_t cp =
                    invisible_inserts()[rng.next_below(invisible_inserts().size())];
                edit.span = {off, off};
                edit.original = "";
                edit.replacement = utf8::encode(cp);
                break;
            }
            default:
                break;
        }
        return edit;
    };

    AdversarialExample example =
        finish(text, spec, draw_edits(sites.size(), spec.intensity, rng, realize));
    return example;
}

AdversarialExample perturb_word(std::string_view text, const AttackSpec& spec,
                                const std::map<std::string, std::vector<std::string>>& synonyms,
                                const std::vector<std::string>& hedges, Rng& rng) {
    validate(spec);
    if (spec.level != AttackLevel::word) {
        throw std::invalid_argument("perturb_word requires a word-level spec");
    }
    if (spec.technique == Technique::synonym_swap && synonyms.empty()) {
        throw std::invalid_argument("synonym_swap requires a non-empty synonym table");
    }
    const std::vector<text::Token> tokens = text::tokenize(text);

    auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };

    std::vector<size_t> sites;
    switch (spec.technique) {
        case Technique::synonym_swap:
            for (size_t i = 0; i < tokens.size(); ++i) {
                const std::string low = lower(tokens[i].text);
                if (!is_stopword(low) && synonyms.count(low)) sites.push_back(i);
            }
            break;
        case Technique::word_insert:
            // gaps between adjacent tokens
            for (size_t i = 1; i < tokens.size(); ++i) sites.push_back(i);
            break;
        case Technique::word_delete:
            for (size_t i = 0; i < tokens.size(); ++i) {
                if (is_stopword(lower(tokens[i].text))) sites.push_back(i);
            }
            break;
        default:
            throw std::invalid_argument("not a word technique");
    }

    auto realize = [&](size_t index) -> Edit {
        const size_t i = sites[index];
        Edit edit;
        switch (spec.technique) {
            case Technique::synonym_swap: {
                const text::Token& token = tokens[i];
                const auto& options = synonyms.at(lower(token.text));
                const std::string& choice = options[rng.next_below(options.size())];
                edit.span = token.span;
                edit.original = token.text;
                edit.replacement = match_token_case(token.text, choice);
                break;
            }
            case Technique::word_insert: {
                const size_t at = tokens[i].span.begin;
                edit.span = {at, at};
                edit.original = "";
                edit.replacement = hedges[rng.next_below(hedges.size())] + " ";
                break;
            }
            case Technique::word_delete: {
                const text::Token& token = tokens[i];
                size_t begin = token.span.begin;
                size_t end = token.span.end;
                if (end < text.size() && text[end] == ' ') ++end;
                else if (begin > 0 && text[begin - 1] == ' ') --begin;
                edit.span = {begin, end};
                edit.original = std::string(text.substr(begin, end - begin));
                edit.replacement = "";
                break;
            }
            default:
                break;
        }
        return edit;
    };

    return finish(text, spec, draw_edits(sites.size(), spec.intensity, rng, realize));
}

AdversarialExample perturb_sentence(std::string_view text, const AttackSpec& spec,
                                    const std::vector<std::string>& distractors) {
    validate(spec);
    if (spec.level != AttackLevel::sentence) {
        throw std::invalid_argument("perturb_sentence requires a sentence-level spec");
    }
    if (text.empty()) throw EmptyInput("cannot perturb empty text");
    if (distractors.empty()) throw NoEditSites("distractor list is empty");

    Rng rng(spec.seed);
    const std::string& entry = distractors[rng.next_below(distractors.size())];
    const std::string insert_text =
        entry.empty() || entry[0] == ',' || entry[0] == ';' ? entry : " " + entry;

    size_t at = text.size();
    const size_t final_period = text.find_last_of('.');
    if (final_period != std::string_view::npos &&
        text.find_first_not_of(" \t\r\n", final_period + 1) == std::string_view::npos) {
        at = final_period;
    }

    Edit edit;
    edit.span = {at, at};
    edit.original = "";
    edit.replacement = insert_text;
    return finish(text, spec, {edit});
}

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words = {
        "the", "a", "an", "of", "to", "in", "on", "at", "for", "with", "and",
        "or", "but", "is", "are", "was", "were", "be", "been", "being", "it",
        "its", "this", "that", "these", "those", "as", "by", "from", "has",
        "have", "had", "do", "does", "did", "not", "no", "so", "too", "very",
        "can", "will", "would", "should", "could", "my", "your", "his", "her",
        "their", "our", "i", "you", "he", "she", "they", "we", "me", "him",
        "them", "us", "what", "which", "who", "whom", "how", "when", "where",
        "why", "there", "here", "than", "then", "if", "because", "while",
        "about", "into", "over", "under", "again", "once", "all", "any",
        "both", "each", "few", "more", "most", "other", "some", "such",
        "only", "own", "same",
    };
    return words;
}

bool is_stopword(std::string_view lowercase_word) {
    static const std::unordered_set<std::string> set(stopwords().begin(),
                                                     stopwords().end());
    return set.count(std::string(lowercase_word)) > 0;
}

AdversarialExample perturb(std::string_view text, const AttackSpec& spec,
                           const Resources& resources, Rng& rng) {
    switch (level_of(spec.technique)) {
        case AttackLevel::character:
            return perturb_char(text, spec, resources.confusables, rng);
        case AttackLevel::word:
            return perturb_word(text, spec, resources.synonyms, resources.hedges, rng);
        case AttackLevel::sentence:
            return perturb_sentence(text, spec, resources.distractors);
    }
    throw std::invalid_argument("unknown attack level");
}

std::vector<AdversarialExample> forge_corpus(const std::vector<CorpusSample>& samples,
                                             const AttackSpec& spec,
                                             const Resources& resources) {
    validate(spec);
    if (samples.empty()) throw std::invalid_argument("forge_corpus needs samples");
    std::vector<AdversarialExample> corpus;
    corpus.reserve(samples.size());
    for (const CorpusSample& sample : samples) {
        AttackSpec derived = spec;
        derived.seed = spec.seed ^ fnv1a64(sample.id);
        Rng rng(derived.seed);
        AdversarialExample example;
        try {
            example = perturb(sample.text, derived, resources, rng);
        } catch (const NoEditSites&) {
            example.original = sample.text;
            example.perturbed = sample.text;
            example.spec = derived;
            example.unperturbed = true;
        }
        example.id = sample.id;
        example.label = sample.label;
        corpus.push_back(std::move(example));
    }
    return corpus;
}

std::string to_json_line(const AdversarialExample& example) {
    json j;
    j["id"] = example.id;
    j["original"] = example.original;
    j["perturbed"] = example.perturbed;
    j["label"] = example.label;
    j["unperturbed"] = example.unperturbed;
    j["spec"] = {{"level", to_string(example.spec.level)},
                 {"technique", to_string(example.spec.technique)},
                 {"intensity", example.spec.intensity},
                 {"seed", example.spec.seed}};
    j["trace"] = json::array();
    for (const Edit& e : example.trace) {
        j["trace"].push_back({{"begin", e.span.begin},
                              {"end", e.span.end},
                              {"original", e.original},
                              {"replacement", e.replacement}});
    }
    return j.dump();
}

AdversarialExample from_json_line(const std::string& line) {
    json j = json::parse(line);
    AdversarialExample example;
    example.id = j.at("id").get<std::string>();
    example.original = j.at("original").get<std::string>();
    example.perturbed = j.at("perturbed").get<std::string>();
    example.label = j.at("label").get<std::string>();
    example.unperturbed = j.value("unperturbed", false);
    const json& spec = j.at("spec");
    example.spec.technique = technique_from_string(spec.at("technique").get<std::string>());
    example.spec.level = level_of(example.spec.technique);
    example.spec.intensity = spec.at("intensity").get<int>();
    example.spec.seed = spec.at("seed").get<uint64_t>();
    for (const json& t : j.at("trace")) {
        Edit e;
        e.span.begin = t.at("begin").get<size_t>();
        e.span.end = t.at("end").get<size_t>();
        e.original = t.at("original").get<std::string>();
        e.replacement = t.at("replacement").get<std::string>();
        example.trace.push_back(std::move(e));
    }
    return example;
}

}  // namespace guard::attack
