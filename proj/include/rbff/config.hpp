#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rbff/pipeline.hpp"

namespace rbff {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Every knob of a CLI run. Keys in config files use the names returned by
/// RunConfig::entries() (e.g. `train_frac = 0.8`).
struct RunConfig {
    std::string weights;
    std::string dataset;
    std::string out = "run";
    std::vector<int> blocks{3, 6, 13, 16};
    std::optional<int> pca = kDefaultPcaComponents;
    bool lda = true;
    double train_frac = 0.5;
    int repeats = 10;
    std::optional<int> kfold;
    double svm_c = 1.0;
    double svm_tolerance = 1e-4;
    int svm_max_epochs = 10000;
    std::uint64_t seed_pca = kDefaultPcaSeed;
    std::uint64_t seed_split = kDefaultSplitSeed;
    std::uint64_t seed_svm = kDefaultSvmSeed;
    int per_class = 5;
    std::uint64_t seed_sample = kDefaultSplitSeed;
    std::string cache;

    /// Sets one field from its textual form. Throws ArgumentError for
    /// unknown keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    std::vector<std::pair<std::string, std::string>> entries() const;
};

std::vector<int> parse_block_list(const std::string& text);
std::string format_block_list(std::span<const int> blocks);

/// Flat `key = value` lines; `#` starts a comment, blank lines are skipped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

ExperimentConfig experiment_config(const RunConfig& config);

/// "# tool=rbff 0.1.0", "# verb=...", then one "# key=value" line per entry.
void write_config_header(const RunConfig& config, const std::string& verb, std::ostream& out);

}  // namespace rbff
