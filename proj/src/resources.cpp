#include "guard/resources.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "guard/errors.hpp"

namespace guard {

namespace fs = std::filesystem;

ResourcePaths ResourcePaths::in_dir(const std::string& data_dir) {
    ResourcePaths paths;
    paths.confusables = (fs::path(data_dir) / "confusables.tsv").string();
    paths.lexicon = (fs::path(data_dir) / "lexicon.tsv").string();
    paths.synonyms = (fs::path(data_dir) / "synonyms.tsv").string();
    paths.distractors = (fs::path(data_dir) / "distractors.txt").string();
    paths.hedges = (fs::path(data_dir) / "hedges.txt").string();
    paths.prompts_dir = (fs::path(data_dir) / "prompts").string();
    return paths;
}

std::string load_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> load_line_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ResourceError("cannot open file: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(line);
    }
    return out;
}

std::map<std::string, std::vector<std::string>> load_synonym_table(
    const std::string& path) {
    std::map<std::string, std::vector<std::string>> table;
    for (const std::string& line : load_line_list(path)) {
        const size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
            throw ResourceError("bad synonym line in " + path + ": '" + line + "'");
        }
        std::vector<std::string> synonyms;
        std::stringstream rest(line.substr(tab + 1));
        std::string part;
        while (std::getline(rest, part, ',')) {
            if (!part.empty()) synonyms.push_back(part);
        }
        if (synonyms.empty()) {
            throw ResourceError("synonym entry without synonyms in " + path);
        }
        table[line.substr(0, tab)] = std::move(synonyms);
    }
    return table;
}

Resources Resources::load(const ResourcePaths& paths) {
    Resources r;
    r.confusables = text::ConfusablesTable::load(paths.confusables);
    r.lexicon = text::Lexicon::load(paths.lexicon);
    r.synonyms = load_synonym_table(paths.synonyms);
    r.distractors = load_line_list(paths.distractors);
    r.hedges = load_line_list(paths.hedges);
    const fs::path dir(paths.prompts_dir);
    r.prompts.system = load_text_file((dir / "system.txt").string());
    r.prompts.user_template = load_text_file((dir / "user_template.txt").string());
    r.prompts.stages = load_text_file((dir / "stages.txt").string());
    r.prompts.format_reminder = load_text_file((dir / "format_reminder.txt").string());
    return r;
}

}  // namespace guard
