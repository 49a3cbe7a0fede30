#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rbff/container.hpp"
#include "rbff/dataset.hpp"
#include "rbff/mobilenet.hpp"

namespace rbff {

inline constexpr std::string_view kFeaturesKind = "features";

struct FeatureVector {
    std::vector<float> values;
    std::vector<int> block_set;

    std::size_t dim() const { return values.size(); }
};

/// n_samples x n_features fused features, row-major, with labels.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> values;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::vector<int> block_set;

    std::span<const float> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    std::size_t num_classes() const { return class_names.size(); }
    /// Throws FormatError if any matrix invariant is violated.
    void validate() const;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Checks the block set is non-empty, strictly ascending and within 1..16.
void check_block_set(std::span<const int> block_set);

/// Sum of expanded channel counts over the block set.
std::size_t feature_dim(std::span<const int> block_set);

/// GAP of the depthwise-BN tap of each block, concatenated in ascending block order.
FeatureVector extract(const WeightContainer& weights, const Tensor& image,
                      std::span<const int> block_set);

using ProgressSink = std::function<void(std::size_t done, std::size_t total)>;

/// Features for every image of the dataset in DatasetManifest::flatten order.
FeatureMatrix extract_batch(const WeightContainer& weights, const DatasetManifest& dataset,
                            std::span<const int> block_set, const ProgressSink& progress = {});

/// Keeps the columns of `subset` (must be a subset of m.block_set), ascending.
FeatureMatrix select_blocks(const FeatureMatrix& m, std::span<const int> subset);

Container to_container(const FeatureMatrix& m);
FeatureMatrix feature_matrix_from_container(const Container& c);

/// Cache key derived from the weights hash, block set and dataset hash.
std::string feature_cache_key(const std::string& weights_hash, std::span<const int> block_set,
                              const std::string& dataset_hash);

/// extract_batch, reusing `<cache_dir>/features-<key>.rbff` when present.
FeatureMatrix extract_batch_cached(const WeightContainer& weights, const DatasetManifest& dataset,
                                   std::span<const int> block_set,
                                   const std::filesystem::path& cache_dir,
                                   const ProgressSink& progress = {});

/// label,class_name,f0,f1,...
void write_features_csv(const FeatureMatrix& m, std::ostream& out);

}  // namespace rbff
