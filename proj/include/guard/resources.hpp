#pragma once

#include <map>
#include <string>
#include <vector>

#include "guard/analysis.hpp"

namespace guard {

struct PromptTemplates {
    std::string system;
    std::string user_template;  // {{STAGES}}, {{BEGIN}}, {{END}}, {{INPUT}}
    std::string stages;
    std::string format_reminder;
};

struct ResourcePaths {
    std::string confusables;
    std::string lexicon;
    std::string synonyms;
    std::string distractors;
    std::string hedges;
    std::string prompts_dir;

    // Conventional layout under one data directory.
    static ResourcePaths in_dir(const std::string& data_dir);
};

// Immutable bundle of every data asset the pipeline needs. Load once,
// share freely across threads.
struct Resources {
    text::ConfusablesTable confusables;
    text::Lexicon lexicon;
    std::map<std::string, std::vector<std::string>> synonyms;
    std::vector<std::string> distractors;
    std::vector<std::string> hedges;
    PromptTemplates prompts;

    static Resources load(const ResourcePaths& paths);
};

// One entry per non-comment line; trailing newlines stripped, leading
// characters preserved (suffix entries may begin with punctuation).
std::vector<std::string> load_line_list(const std::string& path);

std::map<std::string, std::vector<std::string>> load_synonym_table(
    const std::string& path);

std::string load_text_file(const std::string& path);

}  // namespace guard
