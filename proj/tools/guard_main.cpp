#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "guard/analysis.hpp"
#include "guard/attack.hpp"
#include "guard/config.hpp"
#include "guard/dataset.hpp"
#include "guard/defense.hpp"
#include "guard/errors.hpp"
#include "guard/eval.hpp"
#include "guard/gateway.hpp"
#include "guard/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

struct GlobalArgs {
    std::string config_path;
    std::string output_dir = ".";
    std::optional<uint64_t> seed;
};

guard::Config load_config(const GlobalArgs& args) {
    guard::Config config;
    if (!args.config_path.empty()) config = guard::Config::load(args.config_path);
    if (args.seed) config.seed = *args.seed;
    return config;
}

std::string read_input(const std::string& text, const std::string& file) {
    if (!file.empty()) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw guard::Error("cannot open input file: " + file);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        // one trailing newline from shell-made files is noise, not input
        if (!content.empty() && content.back() == '\n') content.pop_back();
        return content;
    }
    return text;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw guard::Error("cannot write " + path.string());
    out << content;
}

guard::llm::CallMode mode_from_string(const std::string& name) {
    if (name == "live") return guard::llm::CallMode::live;
    if (name == "record") return guard::llm::CallMode::record;
    if (name == "replay") return guard::llm::CallMode::replay;
    throw guard::ConfigError("unknown mode: " + name);
}

std::vector<guard::eval::SampleArtifact> read_artifacts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw guard::Error("cannot open artifacts file: " + path);
    std::vector<guard::eval::SampleArtifact> artifacts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        artifacts.push_back(guard::eval::artifact_from_json_line(line));
    }
    return artifacts;
}

// --- analyze -----------------------------------------------------------------

int cmd_analyze(const GlobalArgs& globals, const std::string& text,
                const std::string& file) {
    const guard::Config config = load_config(globals);
    const std::string input = read_input(text, file);
    const auto table = guard::text::ConfusablesTable::load(config.resource_paths().confusables);
    const auto lexicon = guard::text::Lexicon::load(config.resource_paths().lexicon);

    const guard::text::AnalysisReport report =
        guard::text::analyze(input, table, lexicon);

    if (report.findings.empty()) {
        std::cout << "no findings\n";
    } else {
        std::cout << "level       kind                  span         original -> suggested (confidence)\n";
        for (const auto& f : report.findings) {
            std::ostringstream span;
            span << "[" << f.span.begin << "," << f.span.end << ")";
            std::cout << std::left << std::setw(12) << guard::text::to_string(f.level)
                      << std::setw(22) << guard::text::to_string(f.kind)
                      << std::setw(13) << span.str() << "'" << f.original << "'";
            if (f.suggested) std::cout << " -> '" << *f.suggested << "'";
            std::cout << " (" << f.confidence << ")\n";
        }
    }
    std::cout << "suspicion score: " << report.suspicion_score << "\n";

    json j;
    j["suspicion_score"] = report.suspicion_score;
    j["findings"] = json::array();
    for (const auto& f : report.findings) {
        json jf;
        jf["level"] = guard::text::to_string(f.level);
        jf["kind"] = guard::text::to_string(f.kind);
        jf["begin"] = f.span.begin;
        jf["end"] = f.span.end;
        jf["original"] = f.original;
        if (f.suggested) jf["suggested"] = *f.suggested;
        jf["confidence"] = f.confidence;
        j["findings"].push_back(jf);
    }
    write_file(fs::path(globals.output_dir) / "analyze.json", j.dump(2) + "\n");

    return report.findings.empty() ? kExitClean : kExitFindings;
}

// --- defend ------------------------------------------------------------------

int cmd_defend(const GlobalArgs& globals, const std::string& text,
               const std::string& file, const std::string& variant_name,
               const std::string& mode_name) {
    const guard::Config config = load_config(globals);
    const std::string input = read_input(text, file);
    const guard::Resources resources = guard::Resources::load(config.resource_paths());

    guard::llm::Gateway gateway(config.gateway_config());
    const guard::llm::CallMode mode = mode_from_string(mode_name);
    if (mode == guard::llm::CallMode::replay) gateway.load_cassette();

    guard::defense::DefenseConfig defense_config;
    defense_config.model = config.model;
    defense_config.temperature = config.temperature;
    defense_config.max_tokens = config.max_tokens;
    defense_config.fallback_threshold = config.fallback_threshold;

    const auto variant = variant_name == "nocot"
                             ? guard::defense::PromptVariant::no_cot
                             : guard::defense::PromptVariant::cot;
    const guard::defense::DefenseOutcome outcome = guard::defense::defend(
        input, variant, gateway, resources, defense_config, mode);
    std::cout << guard::defense::render_outcome(outcome);
    std::cout << "SOURCE: " << guard::defense::to_string(outcome.source) << "\n";
    return kExitClean;
}

// --- attack ------------------------------------------------------------------

guard::attack::AttackSpec make_spec(const std::string& technique, int intensity,
                                    uint64_t seed) {
    guard::attack::AttackSpec spec;
    spec.technique = guard::attack::technique_from_string(technique);
    spec.level = guard::attack::level_of(spec.technique);
    spec.intensity = intensity;
    spec.seed = seed;
    guard::attack::validate(spec);
    return spec;
}

int cmd_attack(const GlobalArgs& globals, const std::string& dataset_path,
               const std::string& format_name, const std::string& task_name,
               const std::string& technique, int intensity,
               std::optional<size_t> sample_size) {
    const guard::Config config = load_config(globals);
    const guard::Resources resources = guard::Resources::load(config.resource_paths());

    guard::data::LoadOptions options;
    options.sample_size = sample_size;
    options.seed = config.seed;
    const auto samples = guard::data::load_dataset(
        dataset_path, guard::data::format_from_string(format_name),
        guard::data::task_from_string(task_name), options);

    const guard::attack::AttackSpec spec = make_spec(technique, intensity, config.seed);
    std::vector<guard::attack::CorpusSample> inputs;
    for (const auto& sample : samples) {
        inputs.push_back({sample.id, sample.target_text(), sample.label});
    }
    const auto corpus = guard::attack::forge_corpus(inputs, spec, resources);

    std::ostringstream out;
    size_t unperturbed = 0;
    for (const auto& example : corpus) {
        out << guard::attack::to_json_line(example) << "\n";
        if (example.unperturbed) ++unperturbed;
    }
    const fs::path path = fs::path(globals.output_dir) / "corpus.jsonl";
    write_file(path, out.str());
    std::cout << "wrote " << corpus.size() << " adversarial examples to "
              << path.string() << " (" << unperturbed << " unperturbed)\n";
    return kExitClean;
}

// --- eval --------------------------------------------------------------------

int cmd_eval(const GlobalArgs& globals, const std::string& dataset_path,
             const std::string& format_name, const std::string& task_name,
             const std::string& technique, int intensity,
             const std::string& defense_name, const std::string& channel_name,
             const std::string& mode_name, std::optional<size_t> sample_size) {
    const guard::Config config = load_config(globals);
    const guard::Resources resources = guard::Resources::load(config.resource_paths());

    guard::data::LoadOptions options;
    options.sample_size = sample_size;
    options.seed = config.seed;
    const auto samples = guard::data::load_dataset(
        dataset_path, guard::data::format_from_string(format_name),
        guard::data::task_from_string(task_name), options);

    guard::eval::PipelineConfig pipeline;
    pipeline.attack = make_spec(technique, intensity, config.seed);
    pipeline.defense = guard::eval::defense_mode_from_string(defense_name);
    pipeline.channel = guard::eval::channel_from_string(channel_name);
    pipeline.mode = mode_from_string(mode_name);
    pipeline.classifier.model = config.classifier_model;
    pipeline.defense_config.model = config.model;
    pipeline.defense_config.temperature = config.temperature;
    pipeline.defense_config.max_tokens = config.max_tokens;
    pipeline.defense_config.fallback_threshold = config.fallback_threshold;
    pipeline.bleu = config.bleu_config();

    guard::llm::Gateway gateway(config.gateway_config());
    const bool needs_gateway =
        pipeline.channel == guard::eval::Channel::llm ||
        pipeline.defense == guard::eval::DefenseMode::eg_cot ||
        pipeline.defense == guard::eval::DefenseMode::eg_nocot;
    if (needs_gateway && pipeline.mode == guard::llm::CallMode::replay) {
        gateway.load_cassette();
    }

    const guard::eval::PipelineResult result = guard::eval::run_pipeline(
        samples, pipeline, needs_gateway ? &gateway : nullptr, resources);

    const std::string table = guard::eval::render_report_table({result.report});
    std::cout << table;

    std::ostringstream artifacts;
    for (const auto& artifact : result.artifacts) {
        artifacts << guard::eval::artifact_to_json_line(artifact) << "\n";
    }
    const fs::path dir(globals.output_dir);
    write_file(dir / "report.json", guard::eval::report_to_json(result.report) + "\n");
    write_file(dir / "report.txt", table);
    write_file(dir / "artifacts.jsonl", artifacts.str());
    return kExitClean;
}

// --- study -------------------------------------------------------------------

int cmd_study_sample(const GlobalArgs& globals, const std::string& eg_path,
                     const std::string& nocot_path, size_t per_dataset) {
    const guard::Config config = load_config(globals);
    const auto eg_artifacts = read_artifacts(eg_path);
    const auto nocot_artifacts = read_artifacts(nocot_path);
    const auto candidates = guard::study::join_artifacts(eg_artifacts, nocot_artifacts);
    const auto items = guard::study::sample_items(candidates, per_dataset, config.seed);

    const fs::path dir(globals.output_dir);
    write_file(dir / "items.json", guard::study::items_to_json(items) + "\n");
    guard::study::write_study_bundle(items, (dir / "bundle").string(), config.seed);
    std::cout << "sampled " << items.size() << " study items into "
              << (dir / "items.json").string() << " and " << (dir / "bundle").string()
              << "/\n";
    return kExitClean;
}

int cmd_study_assign(const GlobalArgs& globals, const std::string& items_path,
                     const std::string& annotators_csv) {
    const guard::Config config = load_config(globals);
    std::ifstream in(items_path, std::ios::binary);
    if (!in) throw guard::Error("cannot open items file: " + items_path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    const auto items = guard::study::items_from_json(content);

    const size_t comma = annotators_csv.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= annotators_csv.size()) {
        throw guard::ConfigError("--annotators needs exactly two ids: a,b");
    }
    const std::array<std::string, 2> annotators = {annotators_csv.substr(0, comma),
                                                   annotators_csv.substr(comma + 1)};

    const auto assignments = guard::study::counterbalance(items, annotators, config.seed);
    const fs::path path = fs::path(globals.output_dir) / "assignments.csv";
    write_file(path, guard::study::assignments_to_csv(assignments));
    std::cout << "wrote " << assignments.size() << " assignments to " << path.string()
              << "\n";
    return kExitClean;
}

int cmd_study_analyze(const GlobalArgs& globals, const std::string& ratings_path) {
    const auto ratings = guard::study::ingest_ratings(ratings_path);
    const guard::study::StudyResult result = guard::study::summarize(ratings);
    const std::string table = guard::study::render_table(result);
    std::cout << table;

    json j;
    j["n_items"] = result.n_items;
    for (const auto metric : guard::study::kMetrics) {
        const auto& s = result.metrics.at(metric);
        json jm;
        jm["eg_mean"] = s.eg_mean;
        jm["eg_sd"] = s.eg_sd;
        jm["nocot_mean"] = s.nocot_mean;
        jm["nocot_sd"] = s.nocot_sd;
        if (s.test) {
            jm["wilcoxon_w"] = s.test->w;
            jm["p"] = s.test->p;
        }
        j["metrics"][guard::study::to_string(metric)] = jm;
    }
    j["trust"]["eg_fraction"] = result.trust.eg_fraction;
    j["trust"]["nocot_fraction"] = result.trust.nocot_fraction;
    j["trust"]["eg_only"] = result.trust.eg_only;
    j["trust"]["nocot_only"] = result.trust.nocot_only;
    if (result.trust.test) {
        j["trust"]["statistic"] = result.trust.test->statistic;
        j["trust"]["p"] = result.trust.test->p;
    }
    const fs::path dir(globals.output_dir);
    write_file(dir / "study_result.json", j.dump(2) + "\n");
    write_file(dir / "study_result.txt", table);
    return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explainable adversarial-text defense toolkit"};
    app.require_subcommand(1);

    GlobalArgs globals;
    app.add_option("--config", globals.config_path, "key=value config file");
    app.add_option("--output", globals.output_dir, "output directory");
    uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "seed override");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "rule-based input analysis");
    std::string an_text, an_file;
    analyze->add_option("text", an_text, "text to analyze");
    analyze->add_option("--file", an_file, "read input from file");

    // defend
    auto* defend = app.add_subcommand("defend", "run the defense on one input");
    std::string df_text, df_file, df_variant = "cot", df_mode = "replay";
    defend->add_option("text", df_text, "text to defend");
    defend->add_option("--file", df_file, "read input from file");
    defend->add_option("--variant", df_variant, "cot|nocot")
        ->check(CLI::IsMember({"cot", "nocot"}));
    defend->add_option("--mode", df_mode, "live|record|replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "forge an adversarial corpus");
    std::string at_dataset, at_format = "tsv", at_task, at_technique;
    int at_intensity = 1;
    std::optional<size_t> at_sample;
    attack_cmd->add_option("--dataset", at_dataset, "dataset file")->required();
    attack_cmd->add_option("--format", at_format, "tsv|jsonl|csv");
    attack_cmd->add_option("--task", at_task, "sst2|rte|qqp|imdb")->required();
    attack_cmd->add_option("--technique", at_technique, "perturbation technique")
        ->required();
    attack_cmd->add_option("--intensity", at_intensity, "edit sites per sample");
    attack_cmd->add_option("--sample", at_sample, "subsample size");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "attack -> defend -> score pipeline");
    std::string ev_dataset, ev_format = "tsv", ev_task, ev_technique;
    std::string ev_defense = "none", ev_channel = "mock", ev_mode = "replay";
    int ev_intensity = 1;
    std::optional<size_t> ev_sample;
    eval_cmd->add_option("--dataset", ev_dataset, "dataset file")->required();
    eval_cmd->add_option("--format", ev_format, "tsv|jsonl|csv");
    eval_cmd->add_option("--task", ev_task, "sst2|rte|qqp|imdb")->required();
    eval_cmd->add_option("--technique", ev_technique, "perturbation technique")
        ->required();
    eval_cmd->add_option("--intensity", ev_intensity, "edit sites per sample");
    eval_cmd->add_option("--defense", ev_defense, "none|eg|eg-nocot|rule");
    eval_cmd->add_option("--channel", ev_channel, "mock|llm");
    eval_cmd->add_option("--mode", ev_mode, "live|record|replay");
    eval_cmd->add_option("--sample", ev_sample, "subsample size");

    // study
    auto* study_cmd = app.add_subcommand("study", "human-study protocol tools");
    study_cmd->require_subcommand(1);
    auto* st_sample = study_cmd->add_subcommand("sample", "sample study items");
    std::string st_eg, st_nocot;
    size_t st_per_dataset = 10;
    st_sample->add_option("--eg", st_eg, "artifacts.jsonl from the eg run")->required();
    st_sample->add_option("--nocot", st_nocot, "artifacts.jsonl from the eg-nocot run")
        ->required();
    st_sample->add_option("--per-dataset", st_per_dataset, "items per dataset");

    auto* st_assign = study_cmd->add_subcommand("assign", "counterbalanced schedule");
    std::string st_items, st_annotators;
    st_assign->add_option("--items", st_items, "items.json")->required();
    st_assign->add_option("--annotators", st_annotators, "two ids: a,b")->required();

    auto* st_analyze = study_cmd->add_subcommand("analyze", "summarize ratings");
    std::string st_ratings;
    st_analyze->add_option("--ratings", st_ratings, "ratings.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitError;
    }
    if (seed_opt->count() > 0) globals.seed = seed_value;

    try {
        if (*analyze) return cmd_analyze(globals, an_text, an_file);
        if (*defend) return cmd_defend(globals, df_text, df_file, df_variant, df_mode);
        if (*attack_cmd) {
            return cmd_attack(globals, at_dataset, at_format, at_task, at_technique,
                              at_intensity, at_sample);
        }
        if (*eval_cmd) {
            return cmd_eval(globals, ev_dataset, ev_format, ev_task, ev_technique,
                            ev_intensity, ev_defense, ev_channel, ev_mode, ev_sample);
        }
        if (*study_cmd) {
            if (*st_sample) return cmd_study_sample(globals, st_eg, st_nocot, st_per_dataset);
            if (*st_assign) return cmd_study_assign(globals, st_items, st_annotators);
            if (*st_analyze) return cmd_study_analyze(globals, st_ratings);
        }
    } catch (const guard::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
