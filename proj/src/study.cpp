#include "guard/study.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "guard/errors.hpp"
#include "guard/rng.hpp"

namespace guard::study {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Condition condition) {
    return condition == Condition::eg ? "eg" : "eg_nocot";
}

Condition condition_from_string(std::string_view name) {
    if (name == "eg") return Condition::eg;
    if (name == "eg_nocot" || name == "eg-nocot") return Condition::eg_nocot;
    throw std::invalid_argument("unknown condition: " + std::string(name));
}

std::string to_string(Metric metric) {
    switch (metric) {
        case Metric::clarity: return "clarity";
        case Metric::specificity: return "specificity";
        case Metric::actionability: return "actionability";
        case Metric::conciseness: return "conciseness";
    }
    return "?";
}

int metric_value(const Rating& rating, Metric metric) {
    switch (metric) {
        case Metric::clarity: return rating.clarity;
        case Metric::specificity: return rating.specificity;
        case Metric::actionability: return rating.actionability;
        case Metric::conciseness: return rating.conciseness;
    }
    return 0;
}

std::vector<StudyItem> join_artifacts(const std::vector<eval::SampleArtifact>& eg_run,
                                      const std::vector<eval::SampleArtifact>& nocot_run) {
    std::map<std::string, const eval::SampleArtifact*> nocot_by_id;
    for (const auto& artifact : nocot_run) nocot_by_id[artifact.id] = &artifact;

    std::vector<StudyItem> items;
    for (const auto& eg : eg_run) {
        auto it = nocot_by_id.find(eg.id);
        if (it == nocot_by_id.end()) continue;
        const eval::SampleArtifact& nocot = *it->second;
        if (!eg.successful_defense || !nocot.successful_defense) continue;
        if (!eg.defense_outcome || !nocot.defense_outcome) continue;
        StudyItem item;
        item.id = eg.id;
        item.dataset = eg.task;
        item.adversarial_input = eg.perturbed_text;
        item.eg_cleaned = eg.defense_outcome->cleaned_text;
        item.eg_explanation = eg.defense_outcome->explanation;
        item.nocot_cleaned = nocot.defense_outcome->cleaned_text;
        item.nocot_explanation = nocot.defense_outcome->explanation;
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<StudyItem> sample_items(const std::vector<StudyItem>& candidates,
                                    size_t per_dataset, uint64_t seed) {
    if (per_dataset == 0) {
        throw std::invalid_argument("per_dataset must be >= 1");
    }
    std::vector<StudyItem> out;
    for (data::Task task :
         {data::Task::sst2, data::Task::rte, data::Task::qqp, data::Task::imdb}) {
        std::vector<const StudyItem*> group;
        for (const StudyItem& item : candidates) {
            if (item.dataset == task) group.push_back(&item);
        }
        if (group.size() < per_dataset) {
            throw InsufficientItems("dataset " + data::to_string(task) + " has only " +
                                    std::to_string(group.size()) +
                                    " successful items, need " +
                                    std::to_string(per_dataset));
        }
        std::sort(group.begin(), group.end(),
                  [](const StudyItem* a, const StudyItem* b) { return a->id < b->id; });
        Rng rng(seed ^ fnv1a64(data::to_string(task)));
        rng.shuffle(group);
        group.resize(per_dataset);
        std::sort(group.begin(), group.end(),
                  [](const StudyItem* a, const StudyItem* b) { return a->id < b->id; });
        for (const StudyItem* item : group) out.push_back(*item);
    }
    return out;
}

std::vector<Assignment> counterbalance(const std::vector<StudyItem>& items,
                                       const std::array<std::string, 2>& annotators,
                                       uint64_t seed) {
    if (items.empty()) throw NoItems("counterbalance needs at least one item");
    const size_t n = items.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    // first annotator sees eg first on ceil(n/2) items; the second
    // annotator mirrors the order per item
    std::vector<Condition> first_for_a0(n, Condition::eg_nocot);
    const size_t eg_first = (n + 1) / 2;
    for (size_t k = 0; k < eg_first; ++k) first_for_a0[order[k]] = Condition::eg;

    std::vector<Assignment> assignments;
    assignments.reserve(2 * n);
    for (size_t a = 0; a < annotators.size(); ++a) {
        for (size_t i = 0; i < n; ++i) {
            Condition first = first_for_a0[i];
            if (a == 1) {
                first = first == Condition::eg ? Condition::eg_nocot : Condition::eg;
            }
            assignments.push_back({annotators[a], items[i].id, first});
        }
    }
    return assignments;
}

std::vector<Rating> ingest_ratings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open ratings file: " + path);
    static const std::string kHeader =
        "annotator_id,item_id,condition,clarity,specificity,actionability,"
        "conciseness,trust";

    std::string line;
    size_t line_no = 0;
    std::vector<Rating> ratings;
    std::set<std::tuple<std::string, std::string, Condition>> seen;
    bool header_checked = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_checked) {
            if (line != kHeader) {
                throw ParseError(path + ":1: expected header '" + kHeader + "'");
            }
            header_checked = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 8) {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": expected 8 comma-separated fields");
        }
        Rating rating;
        rating.annotator_id = fields[0];
        rating.item_id = fields[1];
        try {
            rating.condition = condition_from_string(fields[2]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        int* slots[4] = {&rating.clarity, &rating.specificity, &rating.actionability,
                         &rating.conciseness};
        for (int k = 0; k < 4; ++k) {
            try {
                *slots[k] = std::stoi(fields[3 + k]);
            } catch (const std::exception&) {
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": non-integer Likert value '" + fields[3 + k] + "'");
            }
            if (*slots[k] < 1 || *slots[k] > 5) {
                throw OutOfRangeLikert(path + ":" + std::to_string(line_no) +
                                       ": Likert value " + fields[3 + k] +
                                       " outside 1..5");
            }
        }
        if (fields[7] == "yes") rating.trust = true;
        else if (fields[7] == "no") rating.trust = false;
        else {
            throw ParseError(path + ":" + std::to_string(line_no) +
                             ": trust must be yes or no, got '" + fields[7] + "'");
        }
        auto key = std::make_tuple(rating.annotator_id, rating.item_id, rating.condition);
        if (!seen.insert(key).second) {
            throw DuplicateRating(path + ":" + std::to_string(line_no) +
                                  ": duplicate rating for (" + rating.annotator_id +
                                  ", " + rating.item_id + ", " +
                                  to_string(rating.condition) + ")");
        }
        ratings.push_back(std::move(rating));
    }
    if (!header_checked && line_no > 0) {
        throw ParseError(path + ": missing header row");
    }
    return ratings;
}

namespace {

struct Matrix {
    std::vector<std::string> annotators;  // exactly 2
    std::vector<std::string> items;       // sorted
    // (annotator index, item index, condition) -> rating
    std::map<std::tuple<size_t, size_t, Condition>, const Rating*> cells;
};

Matrix build_matrix(const std::vector<Rating>& ratings) {
    Matrix m;
    std::set<std::string> annotators, items;
    for (const Rating& r : ratings) {
        annotators.insert(r.annotator_id);
        items.insert(r.item_id);
    }
    if (annotators.size() != 2) {
        throw IncompleteMatrix("expected ratings from exactly 2 annotators, found " +
                               std::to_string(annotators.size()));
    }
    m.annotators.assign(annotators.begin(), annotators.end());
    m.items.assign(items.begin(), items.end());

    std::map<std::string, size_t> a_index, i_index;
    for (size_t i = 0; i < m.annotators.size(); ++i) a_index[m.annotators[i]] = i;
    for (size_t i = 0; i < m.items.size(); ++i) i_index[m.items[i]] = i;

    for (const Rating& r : ratings) {
        auto key = std::make_tuple(a_index[r.annotator_id], i_index[r.item_id],
                                   r.condition);
        if (m.cells.count(key)) {
            throw DuplicateRating("duplicate rating for (" + r.annotator_id + ", " +
                                  r.item_id + ", " + to_string(r.condition) + ")");
        }
        m.cells[key] = &r;
    }

    std::vector<std::string> missing;
    for (size_t a = 0; a < m.annotators.size(); ++a) {
        for (size_t i = 0; i < m.items.size(); ++i) {
            for (Condition c : {Condition::eg, Condition::eg_nocot}) {
                if (!m.cells.count(std::make_tuple(a, i, c))) {
                    missing.push_back(m.annotators[a] + "/" + m.items[i] + "/" +
                                      to_string(c));
                }
            }
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (size_t i = 0; i < missing.size() && i < 8; ++i) {
            if (i) list += ", ";
            list += missing[i];
        }
        if (missing.size() > 8) list += ", ...";
        throw IncompleteMatrix("missing rating cells: " + list);
    }
    return m;
}

double sample_sd(const std::vector<double>& values, double mean) {
    if (values.size() < 2) return 0.0;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace

double aggregate_trust(const std::vector<Rating>& ratings, Condition condition) {
    std::set<std::string> annotators, items;
    for (const Rating& r : ratings) {
        annotators.insert(r.annotator_id);
        items.insert(r.item_id);
    }
    if (annotators.size() != 2) {
        throw MissingAnnotator("trust aggregation expects exactly 2 annotators, found " +
                               std::to_string(annotators.size()));
    }
    size_t trusted = 0;
    for (const std::string& item : items) {
        size_t judgments = 0;
        bool any_yes = false;
        for (const Rating& r : ratings) {
            if (r.item_id != item || r.condition != condition) continue;
            ++judgments;
            any_yes = any_yes || r.trust;
        }
        if (judgments != 2) {
            throw MissingAnnotator("item " + item + " has " +
                                   std::to_string(judgments) + " trust judgments for " +
                                   to_string(condition) + ", need 2");
        }
        if (any_yes) ++trusted;
    }
    return static_cast<double>(trusted) / static_cast<double>(items.size());
}

StudyResult summarize(const std::vector<Rating>& ratings) {
    const Matrix m = build_matrix(ratings);
    const size_t n = m.items.size();

    StudyResult result;
    result.n_items = n;

    for (Metric metric : kMetrics) {
        std::vector<double> eg_values(n), nocot_values(n), differences(n);
        for (size_t i = 0; i < n; ++i) {
            auto value = [&](Condition c) {
                double sum = 0.0;
                for (size_t a = 0; a < 2; ++a) {
                    sum += metric_value(*m.cells.at(std::make_tuple(a, i, c)), metric);
                }
                return sum / 2.0;  // averaged over annotators
            };
            eg_values[i] = value(Condition::eg);
            nocot_values[i] = value(Condition::eg_nocot);
            differences[i] = eg_values[i] - nocot_values[i];
        }
        MetricSummary summary;
        summary.eg_mean = 0.0;
        summary.nocot_mean = 0.0;
        for (size_t i = 0; i < n; ++i) {
            summary.eg_mean += eg_values[i];
            summary.nocot_mean += nocot_values[i];
        }
        summary.eg_mean /= static_cast<double>(n);
        summary.nocot_mean /= static_cast<double>(n);
        summary.eg_sd = sample_sd(eg_values, summary.eg_mean);
        summary.nocot_sd = sample_sd(nocot_values, summary.nocot_mean);
        try {
            summary.test = stats::wilcoxon_signed_rank(differences);
        } catch (const AllZeroDifferences&) {
            summary.test = std::nullopt;
        }
        result.metrics[metric] = summary;
    }

    // item-level OR aggregation, then McNemar on the paired outcomes
    long eg_yes = 0, nocot_yes = 0, eg_only = 0, nocot_only = 0;
    for (size_t i = 0; i < n; ++i) {
        auto or_trust = [&](Condition c) {
            bool any = false;
            for (size_t a = 0; a < 2; ++a) {
                any = any || m.cells.at(std::make_tuple(a, i, c))->trust;
            }
            return any;
        };
        const bool eg_t = or_trust(Condition::eg);
        const bool nc_t = or_trust(Condition::eg_nocot);
        eg_yes += eg_t;
        nocot_yes += nc_t;
        if (eg_t && !nc_t) ++eg_only;
        if (!eg_t && nc_t) ++nocot_only;
    }
    result.trust.eg_fraction = static_cast<double>(eg_yes) / static_cast<double>(n);
    result.trust.nocot_fraction =
        static_cast<double>(nocot_yes) / static_cast<double>(n);
    result.trust.eg_only = eg_only;
    result.trust.nocot_only = nocot_only;
    try {
        result.trust.test = stats::mcnemar(eg_only, nocot_only);
    } catch (const NoDiscordantPairs&) {
        result.trust.test = std::nullopt;
    }
    return result;
}

namespace {

std::string format_p(const std::optional<stats::WilcoxonResult>& test) {
    if (!test) return "n/a";
    std::ostringstream out;
    if (test->p < 0.001) out << "<.001";
    else out << "= " << std::setprecision(4) << test->p;
    return out.str();
}

std::string format_p(const std::optional<stats::McNemarResult>& test) {
    if (!test) return "n/a";
    std::ostringstream out;
    if (test->p < 0.001) out << "<.001";
    else out << "= " << std::setprecision(4) << test->p;
    return out.str();
}

std::string mean_sd(double mean, double sd) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << mean << " ± " << sd;
    return out.str();
}

}  // namespace

std::string render_table(const StudyResult& result) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "Method";
    for (Metric metric : kMetrics) {
        std::string name = to_string(metric);
        name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
        out << std::setw(16) << name;
    }
    out << "Deployability Trust\n";

    auto row = [&](const std::string& label, bool eg) {
        out << std::left << std::setw(10) << label;
        for (Metric metric : kMetrics) {
            const MetricSummary& s = result.metrics.at(metric);
            out << std::setw(16)
                << (eg ? mean_sd(s.eg_mean, s.eg_sd) : mean_sd(s.nocot_mean, s.nocot_sd));
        }
        std::ostringstream trust;
        trust << std::fixed << std::setprecision(1)
              << 100.0 * (eg ? result.trust.eg_fraction : result.trust.nocot_fraction)
              << "%";
        out << trust.str() << "\n";
    };
    row("EG", true);
    row("EG-noCoT", false);

    out << std::left << std::setw(10) << "P-value";
    for (Metric metric : kMetrics) {
        out << std::setw(16) << format_p(result.metrics.at(metric).test);
    }
    out << format_p(result.trust.test) << "\n";
    return out.str();
}

std::string items_to_json(const std::vector<StudyItem>& items) {
    json array = json::array();
    for (const StudyItem& item : items) {
        array.push_back({{"id", item.id},
                         {"dataset", data::to_string(item.dataset)},
                         {"adversarial_input", item.adversarial_input},
                         {"eg",
                          {{"cleaned", item.eg_cleaned},
                           {"explanation", item.eg_explanation}}},
                         {"eg_nocot",
                          {{"cleaned", item.nocot_cleaned},
                           {"explanation", item.nocot_explanation}}}});
    }
    return array.dump(2);
}

std::vector<StudyItem> items_from_json(const std::string& content) {
    json array = json::parse(content);
    std::vector<StudyItem> items;
    for (const json& j : array) {
        StudyItem item;
        item.id = j.at("id").get<std::string>();
        item.dataset = data::task_from_string(j.at("dataset").get<std::string>());
        item.adversarial_input = j.at("adversarial_input").get<std::string>();
        item.eg_cleaned = j.at("eg").at("cleaned").get<std::string>();
        item.eg_explanation = j.at("eg").at("explanation").get<std::string>();
        item.nocot_cleaned = j.at("eg_nocot").at("cleaned").get<std::string>();
        item.nocot_explanation = j.at("eg_nocot").at("explanation").get<std::string>();
        items.push_back(std::move(item));
    }
    return items;
}

std::string assignments_to_csv(const std::vector<Assignment>& assignments) {
    std::ostringstream out;
    out << "annotator_id,item_id,first_condition\n";
    for (const Assignment& a : assignments) {
        out << a.annotator_id << ',' << a.item_id << ',' << to_string(a.first) << '\n';
    }
    return out.str();
}

void write_study_bundle(const std::vector<StudyItem>& items, const std::string& dir,
                        uint64_t seed) {
    fs::create_directories(dir);
    Rng rng(seed);
    std::ostringstream key;
    key << "item_id,label_a_condition\n";
    for (const StudyItem& item : items) {
        const bool a_is_eg = rng.next_below(2) == 0;
        std::string safe_id = item.id;
        for (char& c : safe_id) {
            if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
        }
        std::ofstream out(fs::path(dir) / ("item_" + safe_id + ".txt"),
                          std::ios::binary);
        auto section = [&](const char* label, const std::string& cleaned,
                           const std::string& explanation) {
            out << "--- EXPLANATION " << label << " ---\n";
            out << "CLEANED: " << cleaned << "\n";
            out << "EXPLANATION: " << explanation << "\n\n";
        };
        out << "ITEM: " << item.id << "\n";
        out << "DATASET: " << data::to_string(item.dataset) << "\n";
        out << "ADVERSARIAL INPUT:\n" << item.adversarial_input << "\n\n";
        if (a_is_eg) {
            section("A", item.eg_cleaned, item.eg_explanation);
            section("B", item.nocot_cleaned, item.nocot_explanation);
        } else {
            section("A", item.nocot_cleaned, item.nocot_explanation);
            section("B", item.eg_cleaned, item.eg_explanation);
        }
        key << item.id << ',' << (a_is_eg ? "eg" : "eg_nocot") << '\n';
    }
    std::ofstream key_out(fs::path(dir) / "key.csv", std::ios::binary);
    key_out << key.str();
}

}  // namespace guard::study
