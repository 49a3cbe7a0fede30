#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rbff/container.hpp"
#include "rbff/fusion.hpp"
#include "rbff/mobilenet.hpp"
#include "rbff/reduce.hpp"
#include "rbff/svm.hpp"

namespace rbff {

inline constexpr std::uint64_t kDefaultSplitSeed = 33;
inline constexpr std::string_view kBundleKind = "bundle";

struct SplitSpec {
    double train_fraction = 0.5;
    int repeats = 10;
    std::uint64_t seed = kDefaultSplitSeed;
    /// When set, repeated stratified K-fold with this many folds replaces the
    /// shuffle split; train_fraction is then ignored.
    std::optional<int> kfold;
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// `repeats` independent stratified shuffle splits. Each class contributes
/// round(train_fraction * n_c) rows to train, clamped to [1, n_c - 1].
std::vector<Split> make_splits(std::span<const int> labels, const SplitSpec& spec);

/// Repeated stratified K-fold: per repeat every row is tested exactly once.
std::vector<Split> make_kfold_splits(std::span<const int> labels, int folds, int repeats,
                                     std::uint64_t seed);

using TestFeatureHook = std::function<void(Matrix& test_x, std::span<const std::size_t> test_rows)>;

struct ExperimentConfig {
    std::optional<int> n_pca = kDefaultPcaComponents;
    bool use_lda = true;
    SvmParams svm;
    SplitSpec split;
    std::uint64_t pca_seed = kDefaultPcaSeed;
    /// Applied to the raw test-row matrix before it is transformed and
    /// scored. Used by the leakage canary; empty in normal runs.
    TestFeatureHook test_feature_hook;
};

struct EvalReport {
    double accuracy_mean = 0.0;  // percent
    double accuracy_std = 0.0;   // percent, population std over splits
    std::vector<double> split_accuracies;
    /// confusion[true][predicted], summed over splits.
    std::vector<std::vector<long>> confusion;
    std::vector<int> block_set;
    std::vector<std::string> class_names;
    std::size_t feature_dim = 0;
    ExperimentConfig config;
};

struct FittedPipeline {
    std::optional<PcaModel> pca;
    std::optional<LdaModel> lda;
    SvmModel svm;
};

FittedPipeline fit_pipeline(const Matrix& x, std::span<const int> labels, int num_classes,
                            const ExperimentConfig& config);
Matrix transform_pipeline(const FittedPipeline& p, const Matrix& x);
std::vector<int> predict_pipeline(const FittedPipeline& p, const Matrix& x);

Matrix to_matrix(const FeatureMatrix& m);
Matrix gather_rows(const FeatureMatrix& m, std::span<const std::size_t> rows);

/// Fits reducers and classifier on the train rows of each split and scores
/// the test rows. Throws LeakageError if a split's train and test overlap.
EvalReport run_experiment(const FeatureMatrix& features, const ExperimentConfig& config);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};
/// Population mean and standard deviation.
MeanStd mean_std(std::span<const double> values);

/// "93.64 ± 0.42"
std::string format_accuracy(double mean, double std);

struct SizeBreakdown {
    std::size_t base = 0;
    std::size_t pca = 0;
    std::size_t lda = 0;
    std::size_t svm = 0;
    std::size_t total = 0;
};

struct PipelineBundle {
    FittedPipeline models;
    std::vector<int> block_set;
    std::vector<std::string> class_names;
    std::string weights_ref;
    std::string weights_hash;
    nlohmann::json run_config = nlohmann::json::object();
};

/// One container section per component ("pca/...", "lda/...", "svm/...").
Container bundle_to_container(const PipelineBundle& bundle);
PipelineBundle bundle_from_container(const Container& c);

/// Serialized size of each component stored on its own; base is the
/// extractor truncated after the deepest block of the bundle's block set.
SizeBreakdown size_report(const PipelineBundle& bundle, const WeightContainer& weights);

struct AblationRow {
    std::vector<int> blocks;
    EvalReport report;
};

/// One experiment per prefix of `order` (each prefix fused in ascending
/// block order), reusing the columns of `features`.
std::vector<AblationRow> ablation_sweep(const FeatureMatrix& features, std::span<const int> order,
                                        const ExperimentConfig& config);

void write_eval_report_csv(const EvalReport& r, std::ostream& out);
void write_eval_report_text(const EvalReport& r, std::ostream& out);
void write_ablation_csv(const std::vector<AblationRow>& rows, std::span<const int> all_blocks,
                        const std::string& dataset_name, std::ostream& out);
void write_size_csv(const SizeBreakdown& s, std::ostream& out);

}  // namespace rbff
