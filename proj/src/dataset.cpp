#include "guard/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "guard/errors.hpp"
#include "guard/rng.hpp"

namespace guard::data {

using nlohmann::json;

std::string to_string(Task task) {
    switch (task) {
        case Task::sst2: return "sst2";
        case Task::rte: return "rte";
        case Task::qqp: return "qqp";
        case Task::imdb: return "imdb";
    }
    return "?";
}

std::string to_string(Format format) {
    switch (format) {
        case Format::tsv: return "tsv";
        case Format::jsonl: return "jsonl";
        case Format::csv: return "csv";
    }
    return "?";
}

Task task_from_string(std::string_view name) {
    if (name == "sst2") return Task::sst2;
    if (name == "rte") return Task::rte;
    if (name == "qqp") return Task::qqp;
    if (name == "imdb") return Task::imdb;
    throw std::invalid_argument("unknown task: " + std::string(name));
}

Format format_from_string(std::string_view name) {
    if (name == "tsv") return Format::tsv;
    if (name == "jsonl") return Format::jsonl;
    if (name == "csv") return Format::csv;
    throw std::invalid_argument("unknown dataset format: " + std::string(name));
}

const std::vector<std::string>& label_set(Task task) {
    static const std::vector<std::string> sentiment = {"negative", "positive"};
    static const std::vector<std::string> rte = {"entailment", "not_entailment"};
    static const std::vector<std::string> qqp = {"duplicate", "not_duplicate"};
    switch (task) {
        case Task::sst2:
        case Task::imdb: return sentiment;
        case Task::rte: return rte;
        case Task::qqp: return qqp;
    }
    return sentiment;
}

const std::string& default_label(Task task) {
    static const std::string negative = "negative";
    static const std::string not_entailment = "not_entailment";
    static const std::string not_duplicate = "not_duplicate";
    switch (task) {
        case Task::sst2:
        case Task::imdb: return negative;
        case Task::rte: return not_entailment;
        case Task::qqp: return not_duplicate;
    }
    return negative;
}

std::string canonical_label(Task task, std::string_view raw) {
    std::string lowered(raw);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    switch (task) {
        case Task::sst2:
        case Task::imdb:
            if (lowered == "0" || lowered == "negative" || lowered == "neg")
                return "negative";
            if (lowered == "1" || lowered == "positive" || lowered == "pos")
                return "positive";
            break;
        case Task::rte:
            // GLUE encodes entailment as 0
            if (lowered == "0" || lowered == "entailment") return "entailment";
            if (lowered == "1" || lowered == "not_entailment" ||
                lowered == "not entailment") {
                return "not_entailment";
            }
            break;
        case Task::qqp:
            if (lowered == "1" || lowered == "duplicate") return "duplicate";
            if (lowered == "0" || lowered == "not_duplicate" ||
                lowered == "not duplicate") {
                return "not_duplicate";
            }
            break;
    }
    throw UnknownLabel("label '" + std::string(raw) + "' is not valid for task " +
                       to_string(task));
}

const std::string& LabeledSample::target_text() const {
    return perturb_target == 'b' && text_b ? *text_b : text_a;
}

void LabeledSample::set_target_text(std::string text) {
    if (perturb_target == 'b' && text_b) *text_b = std::move(text);
    else text_a = std::move(text);
}

namespace {

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

// RFC 4180 CSV records; quoted fields may contain commas, doubled quotes,
// and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& content,
                                                const std::string& path) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t line_no = 1;

    auto end_field = [&]() {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        if (record.size() > 1 || !record[0].empty()) records.push_back(record);
        record.clear();
    };

    for (size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw ParseError(path + ":" + std::to_string(line_no) +
                                     ": stray quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',': end_field(); break;
            case '\r': break;
            case '\n':
                end_record();
                ++line_no;
                break;
            default:
                field += c;
                field_started = true;
        }
    }
    if (in_quotes) throw ParseError(path + ": unterminated quoted field");
    if (field_started || !record.empty()) end_record();
    return records;
}

bool looks_like_header(Task task, Format format, const std::vector<std::string>& fields) {
    if (fields.empty()) return false;
    std::string first = fields[0];
    std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    (void)task;
    (void)format;
    return first == "sentence" || first == "sentence1" || first == "question1" ||
           first == "review" || first == "text" || first == "premise";
}

void apply_subsample(std::vector<LabeledSample>& samples, const LoadOptions& options) {
    if (!options.sample_size || *options.sample_size >= samples.size()) return;
    std::vector<size_t> indices(samples.size());
    for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng rng(options.seed);
    rng.shuffle(indices);
    indices.resize(*options.sample_size);
    std::sort(indices.begin(), indices.end());
    std::vector<LabeledSample> picked;
    picked.reserve(indices.size());
    for (size_t i : indices) picked.push_back(std::move(samples[i]));
    samples = std::move(picked);
}

}  // namespace

std::vector<LabeledSample> load_dataset(const std::string& path, Format format,
                                        Task task, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset: " + path);

    const bool pair_task = task == Task::rte || task == Task::qqp;
    std::vector<LabeledSample> samples;

    auto make_sample = [&](std::string text_a, std::optional<std::string> text_b,
                           const std::string& raw_label, size_t line_no,
                           std::string id) {
        LabeledSample sample;
        sample.task = task;
        sample.text_a = std::move(text_a);
        sample.text_b = std::move(text_b);
        try {
            sample.label = canonical_label(task, raw_label);
        } catch (const UnknownLabel& e) {
            throw UnknownLabel(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        sample.id = id.empty() ? to_string(task) + ":" + std::to_string(samples.size())
                               : std::move(id);
        sample.perturb_target = 'a';
        samples.push_back(std::move(sample));
    };

    if (format == Format::tsv) {
        std::string line;
        size_t line_no = 0;
        bool first_line = true;
        while (std::getline(in, line)) {
            ++line_no;
            line = strip_cr(line);
            if (line.empty()) continue;
            const auto fields = split_tabs(line);
            if (first_line && looks_like_header(task, format, fields)) {
                first_line = false;
                continue;
            }
            first_line = false;
            const size_t expected = pair_task ? 3 : 2;
            if (fields.size() != expected) {
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(expected) + " tab-separated fields, got " +
                                 std::to_string(fields.size()));
            }
            if (pair_task) {
                make_sample(fields[0], fields[1], fields[2], line_no, "");
            } else {
                make_sample(fields[0], std::nullopt, fields[1], line_no, "");
            }
        }
    } else if (format == Format::csv) {
        std::ostringstream buf;
        buf << in.rdbuf();
        const auto records = parse_csv(buf.str(), path);
        for (size_t r = 0; r < records.size(); ++r) {
            const auto& fields = records[r];
            if (r == 0 && looks_like_header(task, format, fields)) continue;
            const size_t expected = pair_task ? 3 : 2;
            if (fields.size() != expected) {
                throw ParseError(path + ": record " + std::to_string(r + 1) +
                                 ": expected " + std::to_string(expected) +
                                 " fields, got " + std::to_string(fields.size()));
            }
            if (pair_task) {
                make_sample(fields[0], fields[1], fields[2], r + 1, "");
            } else {
                make_sample(fields[0], std::nullopt, fields[1], r + 1, "");
            }
        }
    } else {
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = strip_cr(line);
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object()) {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": invalid JSON object");
            }
            if (!j.contains("text_a") || !j.contains("label")) {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": JSONL record needs text_a and label");
            }
            std::optional<std::string> text_b;
            if (j.contains("text_b") && !j["text_b"].is_null()) {
                text_b = j["text_b"].get<std::string>();
            }
            if (pair_task && !text_b) {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": task " + to_string(task) + " needs text_b");
            }
            if (!pair_task) text_b.reset();
            std::string raw_label;
            if (j["label"].is_string()) raw_label = j["label"].get<std::string>();
            else raw_label = j["label"].dump();
            make_sample(j["text_a"].get<std::string>(), std::move(text_b), raw_label,
                        line_no, j.value("id", std::string()));
        }
    }

    apply_subsample(samples, options);
    return samples;
}

}  // namespace guard::data
