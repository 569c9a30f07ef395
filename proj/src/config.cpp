#include "guard/config.hpp"

#include <charconv>
#include <fstream>

#include "guard/errors.hpp"

namespace guard {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "' has a bad numeric value: '" +
                          value + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' has a bad numeric value: '" +
                          value + "'");
    }
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
    if (key == "api_base") api_base = value;
    else if (key == "model") model = value;
    else if (key == "classifier_model") classifier_model = value;
    else if (key == "temperature") temperature = parse_real(key, value);
    else if (key == "max_tokens") max_tokens = parse_number<int>(key, value);
    else if (key == "concurrency") concurrency = parse_number<int>(key, value);
    else if (key == "retries") retries = parse_number<int>(key, value);
    else if (key == "timeout_ms") timeout_ms = parse_number<int>(key, value);
    else if (key == "fallback_threshold") fallback_threshold = parse_real(key, value);
    else if (key == "seed") seed = parse_number<uint64_t>(key, value);
    else if (key == "data_dir") data_dir = value;
    else if (key == "confusables") confusables = value;
    else if (key == "lexicon") lexicon = value;
    else if (key == "synonyms") synonyms = value;
    else if (key == "distractors") distractors = value;
    else if (key == "hedges") hedges = value;
    else if (key == "prompts_dir") prompts_dir = value;
    else if (key == "cassette") cassette = value;
    else if (key == "bleu_aggregation") {
        if (value != "arithmetic" && value != "geometric") {
            throw ConfigError("bleu_aggregation must be arithmetic or geometric");
        }
        bleu_aggregation = value;
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Config config;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value");
        }
        config.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
    }
    return config;
}

ResourcePaths Config::resource_paths() const {
    ResourcePaths paths = ResourcePaths::in_dir(data_dir);
    if (!confusables.empty()) paths.confusables = confusables;
    if (!lexicon.empty()) paths.lexicon = lexicon;
    if (!synonyms.empty()) paths.synonyms = synonyms;
    if (!distractors.empty()) paths.distractors = distractors;
    if (!hedges.empty()) paths.hedges = hedges;
    if (!prompts_dir.empty()) paths.prompts_dir = prompts_dir;
    return paths;
}

llm::GatewayConfig Config::gateway_config() const {
    llm::GatewayConfig gw;
    gw.api_base = api_base;
    gw.timeout_ms = timeout_ms;
    gw.retries = retries;
    gw.concurrency = concurrency;
    gw.cassette_path = cassette;
    return gw;
}

eval::BleuConfig Config::bleu_config() const {
    eval::BleuConfig bleu;
    bleu.aggregation = bleu_aggregation == "geometric"
                           ? eval::BleuAggregation::geometric_mean
                           : eval::BleuAggregation::arithmetic_mean;
    return bleu;
}

}  // namespace guard
