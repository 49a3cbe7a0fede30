#include "rbff/mobilenet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "rbff/error.hpp"

namespace rbff {

namespace {

constexpr int kStemChannels = 32;
constexpr int kFirstBlockOut = 16;
constexpr int kHeadChannels = 1280;
constexpr double kDefaultBnEpsilon = 1e-3;

const char* const kBnArrays[] = {"gamma", "beta", "moving_mean", "moving_variance"};

std::array<BlockSpec, kNumBlocks> build_specs() {
    // (out channels, repeats, first stride) for the expansion-6 stages.
    struct Stage {
        int out, repeats, stride;
    };
    constexpr Stage stages[] = {{24, 2, 2}, {32, 3, 2}, {64, 4, 2}, {96, 3, 1}, {160, 3, 2}, {320, 1, 1}};
    std::array<BlockSpec, kNumBlocks> specs{};
    int in = kFirstBlockOut;
    int idx = 0;
    for (const auto& s : stages) {
        for (int r = 0; r < s.repeats; ++r) {
            BlockSpec b;
            b.index = idx + 1;
            b.in_channels = in;
            b.expansion_factor = 6;
            b.out_channels = s.out;
            b.stride = r == 0 ? s.stride : 1;
            b.has_residual = b.stride == 1 && in == s.out;
            specs[idx++] = b;
            in = s.out;
        }
    }
    return specs;
}

std::string block_prefix(int b) { return "block_" + std::to_string(b); }

void add_conv(std::vector<ParamSpec>& out, const std::string& layer, int k, int cin, int cout) {
    out.push_back({layer + "/kernel", {k, k, cin, cout}});
}

void add_depthwise(std::vector<ParamSpec>& out, const std::string& layer, int ch) {
    out.push_back({layer + "/depthwise_kernel", {3, 3, ch}});
}

void add_bn(std::vector<ParamSpec>& out, const std::string& layer, int ch) {
    for (const char* a : kBnArrays) out.push_back({layer + "/" + a, {ch}});
}

void check_block_index(int b) {
    if (b < 1 || b > kNumBlocks)
        throw ArgumentError("unknown block index " + std::to_string(b) + " (expected 1.." +
                            std::to_string(kNumBlocks) + ")");
}

Tensor conv1x1_bn(const Tensor& in, const ConvKernel& k, const BnParams& bn) {
    Tensor t = conv2d(in, k, 1, Padding::same);
    batch_norm_inplace(t, bn);
    return t;
}

}  // namespace

const std::array<BlockSpec, kNumBlocks>& block_specs() {
    static const auto specs = build_specs();
    return specs;
}

const BlockSpec& block_spec(int index) {
    check_block_index(index);
    return block_specs()[index - 1];
}

std::string_view to_string(TapSite site) {
    switch (site) {
        case TapSite::pre_relu: return "pre_relu";
        case TapSite::bn: return "bn";
        case TapSite::post_relu: return "post_relu";
    }
    return "?";
}

TapSite parse_tap_site(std::string_view name) {
    if (name == "pre_relu") return TapSite::pre_relu;
    if (name == "bn") return TapSite::bn;
    if (name == "post_relu") return TapSite::post_relu;
    throw ArgumentError("unknown tap site '" + std::string(name) + "'");
}

std::vector<ParamSpec> topology_params(std::optional<int> truncated_after) {
    if (truncated_after) check_block_index(*truncated_after);
    std::vector<ParamSpec> p;
    add_conv(p, "Conv1", 3, 3, kStemChannels);
    add_bn(p, "bn_Conv1", kStemChannels);
    add_depthwise(p, "expanded_conv_depthwise", kStemChannels);
    add_bn(p, "expanded_conv_depthwise_BN", kStemChannels);
    add_conv(p, "expanded_conv_project", 1, kStemChannels, kFirstBlockOut);
    add_bn(p, "expanded_conv_project_BN", kFirstBlockOut);

    const int last = truncated_after.value_or(kNumBlocks);
    for (int b = 1; b <= last; ++b) {
        const auto& s = block_spec(b);
        const std::string pre = block_prefix(b);
        const int e = s.expanded_channels();
        add_conv(p, pre + "_expand", 1, s.in_channels, e);
        add_bn(p, pre + "_expand_BN", e);
        add_depthwise(p, pre + "_depthwise", e);
        add_bn(p, pre + "_depthwise_BN", e);
        if (truncated_after && b == last) break;
        add_conv(p, pre + "_project", 1, e, s.out_channels);
        add_bn(p, pre + "_project_BN", s.out_channels);
    }
    if (!truncated_after) {
        add_conv(p, "Conv_1", 1, block_specs().back().out_channels, kHeadChannels);
        add_bn(p, "Conv_1_bn", kHeadChannels);
    }
    return p;
}

WeightContainer WeightContainer::from_container(Container c) {
    if (c.kind() != kWeightsKind)
        throw FormatError("container kind is '" + c.kind() + "', expected 'weights'");
    const auto& meta = c.metadata();
    if (!meta.contains("preprocessing") || !meta["preprocessing"].is_string())
        throw FormatError("weights metadata lacks a preprocessing id");
    if (!meta.contains("source_model") || !meta["source_model"].is_string())
        throw FormatError("weights metadata lacks a source model id");

    WeightContainer w;
    w.preprocessing_ = meta["preprocessing"].get<std::string>();
    if (meta.contains("truncated_after_block")) {
        const auto& t = meta["truncated_after_block"];
        if (!t.is_number_integer() || t.get<int>() < 1 || t.get<int>() > kNumBlocks)
            throw FormatError("truncated_after_block must be an integer in 1..16");
        w.truncated_after_ = t.get<int>();
    }
    if (meta.contains("bn_epsilon")) {
        if (!meta["bn_epsilon"].is_object()) throw FormatError("bn_epsilon must be an object");
        for (const auto& [layer, eps] : meta["bn_epsilon"].items())
            if (!eps.is_number() || !(eps.get<double>() > 0.0))
                throw FormatError("bn_epsilon for '" + layer + "' must be a positive number");
    }

    const auto expected = topology_params(w.truncated_after_);
    std::unordered_map<std::string, const ParamSpec*> by_name;
    for (const auto& p : expected) by_name.emplace(p.name, &p);

    std::vector<std::string> extra;
    for (const auto& e : c.entries()) {
        auto it = by_name.find(e.name);
        if (it == by_name.end()) {
            extra.push_back(e.name);
            continue;
        }
        if (e.shape != it->second->shape) {
            std::string got, want;
            for (auto d : e.shape) got += std::to_string(d) + ",";
            for (auto d : it->second->shape) want += std::to_string(d) + ",";
            throw FormatError("tensor '" + e.name + "' has shape [" + got + "], topology expects [" +
                              want + "]");
        }
    }
    for (const auto& p : expected)
        if (!c.contains(p.name)) throw FormatError("missing tensor '" + p.name + "'");
    if (!extra.empty()) {
        std::string names;
        for (const auto& n : extra) names += (names.empty() ? "" : ", ") + n;
        throw FormatError("unexpected tensors not in topology: " + names);
    }
    for (const auto& p : expected) {
        if (!p.name.ends_with("/moving_variance")) continue;
        const auto v = c.get(p.name).values;
        if (std::any_of(v.begin(), v.end(), [](float x) { return !(x >= 0.0f); }))
            throw FormatError("tensor '" + p.name + "' has negative or NaN variance entries");
    }

    w.hash_ = sha256_hex(c.serialize());
    w.container_ = std::move(c);
    return w;
}

ConvKernel WeightContainer::conv(const std::string& layer) const {
    const auto v = container_.get(layer + "/kernel");
    return {static_cast<int>(v.shape[0]), static_cast<int>(v.shape[1]), static_cast<int>(v.shape[2]),
            static_cast<int>(v.shape[3]), v.values};
}

DepthwiseKernel WeightContainer::depthwise(const std::string& layer) const {
    const auto v = container_.get(layer + "/depthwise_kernel");
    return {static_cast<int>(v.shape[0]), static_cast<int>(v.shape[1]), static_cast<int>(v.shape[2]),
            v.values};
}

BnParams WeightContainer::bn(const std::string& layer) const {
    BnParams p;
    p.gamma = container_.get(layer + "/gamma").values;
    p.beta = container_.get(layer + "/beta").values;
    p.mean = container_.get(layer + "/moving_mean").values;
    p.variance = container_.get(layer + "/moving_variance").values;
    p.epsilon = kDefaultBnEpsilon;
    const auto& meta = container_.metadata();
    if (meta.contains("bn_epsilon") && meta["bn_epsilon"].contains(layer))
        p.epsilon = meta["bn_epsilon"][layer].get<double>();
    return p;
}

WeightContainer load_weights(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw Error("weights file '" + path.string() + "' does not exist");
    try {
        return WeightContainer::from_container(Container::read(path));
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        if (msg.starts_with(path.string())) throw;
        throw FormatError(path.string() + ": " + msg);
    }
}

WeightContainer truncate(const WeightContainer& weights, int last_block) {
    check_block_index(last_block);
    if (last_block > weights.last_block())
        throw ArgumentError("cannot truncate a container ending at block " +
                            std::to_string(weights.last_block()) + " to block " +
                            std::to_string(last_block));
    Container out{std::string(kWeightsKind)};
    out.metadata() = weights.raw().metadata();
    out.metadata()["truncated_after_block"] = last_block;
    if (out.metadata().contains("bn_epsilon")) {
        // Keep only overrides for layers that survive.
        nlohmann::json kept = nlohmann::json::object();
        const auto params = topology_params(last_block);
        for (const auto& [layer, eps] : out.metadata()["bn_epsilon"].items())
            for (const auto& p : params)
                if (p.name == layer + "/gamma") kept[layer] = eps;
        out.metadata()["bn_epsilon"] = kept;
    }
    for (const auto& p : topology_params(last_block))
        out.add(p.name, p.shape, weights.raw().get(p.name).values);
    return WeightContainer::from_container(std::move(out));
}

std::int64_t count_params(const Container& container) { return container.total_elements(); }

std::size_t serialized_size_bytes(const Container& container) {
    return container.serialized_size();
}

BlockActivations run_block(const BlockWeights& block, const Tensor& input) {
    BlockActivations a;
    a.pre_relu = conv1x1_bn(input, block.expand, block.expand_bn);
    relu6_inplace(a.pre_relu);
    a.bn = depthwise_conv2d(a.pre_relu, block.depthwise, block.stride, Padding::same);
    batch_norm_inplace(a.bn, block.depthwise_bn);
    a.post_relu = relu6(a.bn);
    if (block.project) {
        a.output = conv1x1_bn(a.post_relu, *block.project, block.project_bn);
        if (block.residual) a.output = add_residual(a.output, input);
    }
    return a;
}

void forward_visit(const WeightContainer& weights, const Tensor& image,
                   const std::set<TapKey>& taps, const TapVisitor& visit) {
    if (image.channels() != 3)
        throw ShapeError("forward: image must have 3 channels, got " +
                         std::to_string(image.channels()));
    int deepest = weights.last_block();
    if (!taps.empty()) {
        deepest = 0;
        for (const auto& t : taps) {
            check_block_index(t.block);
            if (t.block > weights.last_block())
                throw ArgumentError("tap on block " + std::to_string(t.block) +
                                    " but the container ends at block " +
                                    std::to_string(weights.last_block()));
            deepest = std::max(deepest, t.block);
        }
    }

    Tensor x = conv2d(image, weights.conv("Conv1"), 2, Padding::same);
    batch_norm_inplace(x, weights.bn("bn_Conv1"));
    relu6_inplace(x);
    x = depthwise_conv2d(x, weights.depthwise("expanded_conv_depthwise"), 1, Padding::same);
    batch_norm_inplace(x, weights.bn("expanded_conv_depthwise_BN"));
    relu6_inplace(x);
    x = conv1x1_bn(x, weights.conv("expanded_conv_project"), weights.bn("expanded_conv_project_BN"));

    for (int b = 1; b <= deepest; ++b) {
        const auto& spec = block_spec(b);
        const std::string pre = block_prefix(b);
        BlockWeights bw;
        bw.expand = weights.conv(pre + "_expand");
        bw.expand_bn = weights.bn(pre + "_expand_BN");
        bw.depthwise = weights.depthwise(pre + "_depthwise");
        bw.stride = spec.stride;
        bw.depthwise_bn = weights.bn(pre + "_depthwise_BN");
        // The projection is skipped for the final block of a truncated
        // container and for the deepest block a tap request needs.
        const bool needs_output = b < deepest || (taps.empty() && !weights.truncated_after());
        if (needs_output) {
            bw.project = weights.conv(pre + "_project");
            bw.project_bn = weights.bn(pre + "_project_BN");
            bw.residual = spec.has_residual;
        }
        BlockActivations act = run_block(bw, x);
        for (TapSite site : {TapSite::pre_relu, TapSite::bn, TapSite::post_relu}) {
            const TapKey key{b, site};
            if (!taps.contains(key)) continue;
            const Tensor& t = site == TapSite::pre_relu ? act.pre_relu
                              : site == TapSite::bn     ? act.bn
                                                        : act.post_relu;
            if (!t.all_finite())
                throw Error("non-finite activation at block " + std::to_string(b) + " " +
                            std::string(to_string(site)));
            visit(key, t);
        }
        if (needs_output) x = std::move(act.output);
    }

    if (taps.empty() && !weights.truncated_after()) {
        x = conv1x1_bn(x, weights.conv("Conv_1"), weights.bn("Conv_1_bn"));
        relu6_inplace(x);
        if (x.channels() != 1280 || !x.all_finite())
            throw Error("forward: head output failed validation");
    }
}

TapMap forward(const WeightContainer& weights, const Tensor& image, std::span<const TapKey> taps) {
    TapMap out;
    const std::set<TapKey> wanted(taps.begin(), taps.end());
    forward_visit(weights, image, wanted, [&](const TapKey& key, const Tensor& t) { out[key] = t; });
    return out;
}

}  // namespace rbff
