#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rbff/container.hpp"
#include "rbff/mobilenet.hpp"

namespace rbff {

/// Reference activations recorded by the exporter. Tensor names:
///
///   input/<id>                       preprocessed H x W x 3 image
///   expected/<id>/block_<b>/<site>   tap output, site in {pre_relu, bn, post_relu}
///
/// Metadata: "preprocessing" (id string), "tolerance" (max abs diff, optional).
inline constexpr std::string_view kFixturesKind = "fixtures";
inline constexpr double kDefaultFixtureTolerance = 1e-4;

struct FixtureCheck {
    std::string image_id;
    TapKey tap;
    double max_abs_diff = 0.0;
    bool passed = false;
};

struct FixtureReport {
    std::vector<FixtureCheck> checks;
    double tolerance = kDefaultFixtureTolerance;
    bool passed() const;
    double worst() const;
};

std::string fixture_tap_name(const std::string& image_id, const TapKey& tap);

/// Builds a fixture container from our own forward pass.
Container make_fixtures(const WeightContainer& weights, const std::map<std::string, Tensor>& inputs,
                        const std::vector<TapKey>& taps);

FixtureReport verify_fixtures(const WeightContainer& weights, const Container& fixtures,
                              std::optional<double> tolerance = std::nullopt);

}  // namespace rbff
