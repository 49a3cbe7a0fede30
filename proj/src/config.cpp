#include "rbff/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rbff/error.hpp"

namespace rbff {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
    T out{};
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ArgumentError("invalid integer for '" + key + "': '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("invalid number for '" + key + "': '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ArgumentError("invalid boolean for '" + key + "': '" + value + "'");
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<int> parse_block_list(const std::string& text) {
    std::vector<int> blocks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) blocks.push_back(parse_integer<int>("blocks", trim(item)));
    std::sort(blocks.begin(), blocks.end());
    check_block_set(blocks);
    return blocks;
}

std::string format_block_list(std::span<const int> blocks) {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) out += (i ? "," : "") + std::to_string(blocks[i]);
    return out;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    if (key == "weights") weights = value;
    else if (key == "dataset") dataset = value;
    else if (key == "out") out = value;
    else if (key == "cache") cache = value;
    else if (key == "blocks") blocks = parse_block_list(value);
    else if (key == "pca") pca = value == "none" ? std::nullopt : std::optional<int>(parse_integer<int>(key, value));
    else if (key == "lda") lda = parse_bool(key, value);
    else if (key == "train_frac") train_frac = parse_double(key, value);
    else if (key == "repeats") repeats = parse_integer<int>(key, value);
    else if (key == "kfold") kfold = value == "none" ? std::nullopt : std::optional<int>(parse_integer<int>(key, value));
    else if (key == "svm_c") svm_c = parse_double(key, value);
    else if (key == "svm_tolerance") svm_tolerance = parse_double(key, value);
    else if (key == "svm_max_epochs") svm_max_epochs = parse_integer<int>(key, value);
    else if (key == "seed_pca") seed_pca = parse_integer<std::uint64_t>(key, value);
    else if (key == "seed_split") seed_split = parse_integer<std::uint64_t>(key, value);
    else if (key == "seed_svm") seed_svm = parse_integer<std::uint64_t>(key, value);
    else if (key == "per_class") per_class = parse_integer<int>(key, value);
    else if (key == "seed_sample") seed_sample = parse_integer<std::uint64_t>(key, value);
    else throw ArgumentError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
    return {
        {"weights", weights},
        {"dataset", dataset},
        {"out", out},
        {"cache", cache},
        {"blocks", format_block_list(blocks)},
        {"pca", pca ? std::to_string(*pca) : "none"},
        {"lda", lda ? "true" : "false"},
        {"train_frac", format_double(train_frac)},
        {"repeats", std::to_string(repeats)},
        {"kfold", kfold ? std::to_string(*kfold) : "none"},
        {"svm_c", format_double(svm_c)},
        {"svm_tolerance", format_double(svm_tolerance)},
        {"svm_max_epochs", std::to_string(svm_max_epochs)},
        {"seed_pca", std::to_string(seed_pca)},
        {"seed_split", std::to_string(seed_split)},
        {"seed_svm", std::to_string(seed_svm)},
        {"per_class", std::to_string(per_class)},
        {"seed_sample", std::to_string(seed_sample)},
    };
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || trim(line.substr(0, eq)).empty())
            throw ArgumentError(path.string() + ":" + std::to_string(number) + ": expected 'key = value'");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

ExperimentConfig experiment_config(const RunConfig& c) {
    ExperimentConfig e;
    e.n_pca = c.pca;
    e.use_lda = c.lda;
    e.svm = {c.svm_c, c.svm_tolerance, c.svm_max_epochs, c.seed_svm};
    e.split = {c.train_frac, c.repeats, c.seed_split, c.kfold};
    e.pca_seed = c.seed_pca;
    return e;
}

void write_config_header(const RunConfig& config, const std::string& verb, std::ostream& out) {
    out << "# tool=rbff " << kToolVersion << "\n# verb=" << verb << '\n';
    for (const auto& [k, v] : config.entries()) out << "# " << k << '=' << v << '\n';
}

}  // namespace rbff
