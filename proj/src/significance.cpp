#include "rbff/significance.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "rbff/error.hpp"
#include "rbff/log.hpp"
#include "rbff/parallel.hpp"

namespace rbff {

double positive_volume(const Tensor& t) {
    if (t.empty()) throw ArgumentError("positive_volume: empty tensor");
    std::size_t positive = 0;
    for (float v : t.data()) positive += v > 0.0f;
    return static_cast<double>(positive) / static_cast<double>(t.size());
}

double zero_volume_average(std::span<const Tensor> taps) {
    if (taps.empty()) throw ArgumentError("zero_volume_average: no taps");
    double sum = 0.0;
    for (const auto& t : taps) sum += 1.0 - positive_volume(t);
    return sum / static_cast<double>(taps.size());
}

BlockSignificance make_block_significance(int block_index, double z_prev, double z_next) {
    BlockSignificance s{block_index, z_prev, z_next, 0.0, false};
    if (z_next > 0.0) {
        s.alpha = z_prev / z_next;
    } else {
        s.alpha = std::numeric_limits<double>::infinity();
        s.alpha_infinite = true;
        warn("block " + std::to_string(block_index) +
             ": following ReLU has zero zero-volume; alpha is degenerate (+inf)");
    }
    return s;
}

BlockSignificance block_alpha(const WeightContainer& weights, std::span<const Tensor> images,
                              int block_index) {
    if (images.empty()) throw ArgumentError("block_alpha: empty image sample");
    const std::set<TapKey> taps = {{block_index, TapSite::pre_relu}, {block_index, TapSite::post_relu}};
    std::vector<double> prev(images.size()), next(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        forward_visit(weights, images[i], taps, [&](const TapKey& k, const Tensor& t) {
            (k.site == TapSite::pre_relu ? prev : next)[i] = 1.0 - positive_volume(t);
        });
    });
    const double n = static_cast<double>(images.size());
    return make_block_significance(block_index, std::accumulate(prev.begin(), prev.end(), 0.0) / n,
                                   std::accumulate(next.begin(), next.end(), 0.0) / n);
}

std::vector<ImageEntry> sample_images(const DatasetManifest& dataset, int images_per_class,
                                      std::uint64_t seed) {
    if (images_per_class < 1) throw ArgumentError("images_per_class must be positive");
    std::mt19937_64 rng(seed);
    std::vector<ImageEntry> out;
    for (std::size_t c = 0; c < dataset.num_classes(); ++c) {
        const auto& files = dataset.images[c];
        const auto want = static_cast<std::size_t>(images_per_class);
        if (files.size() < want)
            throw ArgumentError("class '" + dataset.class_names[c] + "' has " +
                                std::to_string(files.size()) + " images, need " +
                                std::to_string(images_per_class));
        // Partial Fisher-Yates: the first `want` slots end up a uniform sample.
        std::vector<std::size_t> idx(files.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < want; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want));
        for (std::size_t i = 0; i < want; ++i) out.push_back({files[idx[i]], static_cast<int>(c)});
    }
    return out;
}

std::vector<int> rank_blocks(std::span<const BlockSignificance> blocks) {
    std::vector<BlockSignificance> sorted(blocks.begin(), blocks.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.alpha != b.alpha) return a.alpha > b.alpha;
        return a.block_index < b.block_index;
    });
    std::vector<int> out;
    for (const auto& s : sorted) out.push_back(s.block_index);
    return out;
}

std::vector<int> SignificanceReport::top_blocks(std::size_t k) const {
    if (k == 0 || k > ranking.size())
        throw ArgumentError("top_blocks: k must be in 1.." + std::to_string(ranking.size()));
    std::vector<int> out(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.begin(), out.end());
    return out;
}

SignificanceReport analyze_significance(const WeightContainer& weights,
                                        std::span<const Tensor> images, SampleSpec spec) {
    if (images.empty()) throw ArgumentError("analyze_significance: empty image sample");
    if (weights.last_block() < kNumBlocks)
        throw ArgumentError("analyze_significance needs all 16 blocks; container ends at block " +
                            std::to_string(weights.last_block()));
    std::set<TapKey> taps;
    for (int b = 1; b <= kNumBlocks; ++b) {
        taps.insert({b, TapSite::pre_relu});
        taps.insert({b, TapSite::post_relu});
    }

    // zero volume per image, [block-1][0 = prev, 1 = next]
    using PerImage = std::array<std::array<double, 2>, kNumBlocks>;
    std::vector<PerImage> zeros(images.size());
    parallel_for(images.size(), [&](std::size_t i) {
        forward_visit(weights, images[i], taps, [&](const TapKey& k, const Tensor& t) {
            zeros[i][k.block - 1][k.site == TapSite::pre_relu ? 0 : 1] = 1.0 - positive_volume(t);
        });
    });

    SignificanceReport report;
    report.sample_spec = spec;
    report.num_images = images.size();
    const double n = static_cast<double>(images.size());
    for (int b = 0; b < kNumBlocks; ++b) {
        double prev = 0.0, next = 0.0;
        for (const auto& z : zeros) {
            prev += z[b][0];
            next += z[b][1];
        }
        report.per_block.push_back(make_block_significance(b + 1, prev / n, next / n));
    }
    report.ranking = rank_blocks(report.per_block);
    return report;
}

void write_significance_csv(const SignificanceReport& report, std::ostream& out) {
    std::map<int, int> rank_of;
    for (std::size_t r = 0; r < report.ranking.size(); ++r)
        rank_of[report.ranking[r]] = static_cast<int>(r) + 1;
    out << "block_index,z_prev,z_next,alpha,rank\n";
    char buf[160];
    for (const auto& s : report.per_block) {
        if (s.alpha_infinite)
            std::snprintf(buf, sizeof buf, "%d,%.12f,%.12f,inf,%d\n", s.block_index, s.z_prev,
                          s.z_next, rank_of[s.block_index]);
        else
            std::snprintf(buf, sizeof buf, "%d,%.12f,%.12f,%.12f,%d\n", s.block_index, s.z_prev,
                          s.z_next, s.alpha, rank_of[s.block_index]);
        out << buf;
    }
}

}  // namespace rbff
