#pragma once

#include <cstdint>

#include "rbff/mobilenet.hpp"

namespace rbff {

/// Full-topology container filled with seeded pseudo-random parameters
/// (He-uniform kernels, mild BN statistics). Used by tests, the acceptance
/// suite and demos where no exported ImageNet weights are available.
WeightContainer make_toy_weights(std::uint64_t seed);

}  // namespace rbff
