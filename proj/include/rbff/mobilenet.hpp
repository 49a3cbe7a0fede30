#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rbff/container.hpp"
#include "rbff/tensor.hpp"

namespace rbff {

inline constexpr int kNumBlocks = 16;
inline constexpr std::string_view kWeightsKind = "weights";

/// Input mapping the engine expects: bilinear (half-pixel centres, no
/// antialiasing) resize to 224x224 followed by v / 127.5 - 1.
inline constexpr std::string_view kPreprocessingId = "mobilenet_v2:bilinear_half_pixel_224:scale_m1_p1";

/// One expansion-6 inverted-residual block. Index 1..16 in network order;
/// the expansion-1 block after the stem is not indexed.
struct BlockSpec {
    int index = 0;
    int in_channels = 0;
    int expansion_factor = 6;
    int out_channels = 0;
    int stride = 1;
    bool has_residual = false;

    int expanded_channels() const { return in_channels * expansion_factor; }
};

const std::array<BlockSpec, kNumBlocks>& block_specs();
const BlockSpec& block_spec(int index);

enum class TapSite { pre_relu, bn, post_relu };

std::string_view to_string(TapSite site);
TapSite parse_tap_site(std::string_view name);

struct TapKey {
    int block = 0;
    TapSite site = TapSite::bn;
    auto operator<=>(const TapKey&) const = default;
};

struct ParamSpec {
    std::string name;
    std::vector<std::int64_t> shape;
};

/// Every parameter tensor in network order. With `truncated_after` set the
/// list stops after the depthwise BN of that block (its projection and all
/// later layers are dropped); otherwise it covers the full extractor up to
/// and including the 1x1 head convolution.
std::vector<ParamSpec> topology_params(std::optional<int> truncated_after = std::nullopt);

/// Validated weight container: holds exactly the parameters named by the
/// topology at its recorded depth, with shapes checked.
class WeightContainer {
public:
    static WeightContainer from_container(Container c);

    const Container& raw() const { return container_; }
    std::optional<int> truncated_after() const { return truncated_after_; }
    int last_block() const { return truncated_after_.value_or(kNumBlocks); }
    std::string_view preprocessing_id() const { return preprocessing_; }
    /// SHA-256 of the serialized container.
    const std::string& hash() const { return hash_; }

    ConvKernel conv(const std::string& layer) const;
    DepthwiseKernel depthwise(const std::string& layer) const;
    BnParams bn(const std::string& layer) const;

private:
    Container container_;
    std::optional<int> truncated_after_;
    std::string preprocessing_;
    std::string hash_;
};

WeightContainer load_weights(const std::filesystem::path& path);
WeightContainer truncate(const WeightContainer& weights, int last_block);

std::int64_t count_params(const Container& container);
inline std::int64_t count_params(const WeightContainer& w) { return count_params(w.raw()); }
std::size_t serialized_size_bytes(const Container& container);
inline std::size_t serialized_size_bytes(const WeightContainer& w) {
    return serialized_size_bytes(w.raw());
}

/// Layers of one inverted-residual block, as views into weight storage.
struct BlockWeights {
    ConvKernel expand;
    BnParams expand_bn;
    DepthwiseKernel depthwise;
    int stride = 1;
    BnParams depthwise_bn;
    std::optional<ConvKernel> project;
    BnParams project_bn;
    bool residual = false;
};

struct BlockActivations {
    Tensor pre_relu;   // ReLU6 after the expand BN
    Tensor bn;         // depthwise BN output
    Tensor post_relu;  // ReLU6 after the depthwise BN
    Tensor output;     // projection (+ skip); empty when the block has no projection
};

BlockActivations run_block(const BlockWeights& block, const Tensor& input);

using TapMap = std::map<TapKey, Tensor>;
using TapVisitor = std::function<void(const TapKey&, const Tensor&)>;

/// Runs the network on one preprocessed H x W x 3 image, calling `visit` for
/// each requested tap as soon as it is produced. Execution stops after the
/// deepest requested block; with no taps the whole container is executed.
void forward_visit(const WeightContainer& weights, const Tensor& image,
                   const std::set<TapKey>& taps, const TapVisitor& visit);

TapMap forward(const WeightContainer& weights, const Tensor& image, std::span<const TapKey> taps);

}  // namespace rbff
