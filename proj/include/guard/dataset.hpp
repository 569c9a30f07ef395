#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace guard::data {

enum class Task { sst2, rte, qqp, imdb };
enum class Format { tsv, jsonl, csv };

std::string to_string(Task task);
std::string to_string(Format format);
Task task_from_string(std::string_view name);
Format format_from_string(std::string_view name);

const std::vector<std::string>& label_set(Task task);
// Label the mock classifier reports for degenerate input.
const std::string& default_label(Task task);
// Accepts both label words and the 0/1 encodings the public TSV dumps use.
std::string canonical_label(Task task, std::string_view raw);

struct LabeledSample {
    std::string id;
    Task task = Task::sst2;
    std::string text_a;
    std::optional<std::string> text_b;  // rte/qqp second sentence
    std::string label;
    char perturb_target = 'a';

    const std::string& target_text() const;
    void set_target_text(std::string text);
};

struct LoadOptions {
    std::optional<size_t> sample_size;  // deterministic subsample after load
    uint64_t seed = 0;
};

// Schemas: sst2 "sentence<TAB>label"; rte/qqp "sentence1<TAB>sentence2<TAB>label";
// imdb CSV "review,label" (RFC 4180 quoting); JSONL objects with
// id/text_a/text_b/label. A leading header row is detected and skipped.
// Row ids default to "<task>:<row>".
std::vector<LabeledSample> load_dataset(const std::string& path, Format format,
                                        Task task,
                                        const LoadOptions& options = LoadOptions{});

}  // namespace guard::data
