#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rbff/dataset.hpp"
#include "rbff/mobilenet.hpp"
#include "rbff/tensor.hpp"

namespace rbff {

/// Zero-volume statistics of the two ReLU6 layers around a block's
/// depthwise BN. z_prev is measured after the expand BN, z_next after the
/// depthwise BN; alpha = z_prev / z_next.
struct BlockSignificance {
    int block_index = 0;
    double z_prev = 0.0;
    double z_next = 0.0;
    double alpha = 0.0;
    /// Set when z_next == 0; alpha then holds +infinity and the block ranks first.
    bool alpha_infinite = false;
};

struct SampleSpec {
    int images_per_class = 5;
    std::uint64_t seed = 33;
};

struct SignificanceReport {
    std::vector<BlockSignificance> per_block;
    /// Block indices by descending alpha, ties by ascending index.
    std::vector<int> ranking;
    SampleSpec sample_spec;
    std::size_t num_images = 0;

    /// First k entries of the ranking, sorted ascending (fusion order).
    std::vector<int> top_blocks(std::size_t k) const;
};

/// Fraction of strictly positive elements.
double positive_volume(const Tensor& t);

/// Mean of (1 - positive_volume) over the taps; accumulated in double.
double zero_volume_average(std::span<const Tensor> taps);

BlockSignificance make_block_significance(int block_index, double z_prev, double z_next);

BlockSignificance block_alpha(const WeightContainer& weights, std::span<const Tensor> images,
                              int block_index);

/// Picks exactly `images_per_class` images from every class, deterministic
/// under `seed`. Output is in class order, ascending file order within a class.
std::vector<ImageEntry> sample_images(const DatasetManifest& dataset, int images_per_class,
                                      std::uint64_t seed);

std::vector<int> rank_blocks(std::span<const BlockSignificance> blocks);

/// One forward pass per image covering both ReLU taps of all 16 blocks.
SignificanceReport analyze_significance(const WeightContainer& weights,
                                        std::span<const Tensor> images, SampleSpec spec = {});

/// Columns: block_index,z_prev,z_next,alpha,rank (one row per block, block order).
void write_significance_csv(const SignificanceReport& report, std::ostream& out);

}  // namespace rbff
