#include "rbff/toy_weights.hpp"

#include <cmath>
#include <random>
#include <string>

namespace rbff {

WeightContainer make_toy_weights(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uniform = [&](double lo, double hi) {
        return static_cast<float>(std::uniform_real_distribution<double>(lo, hi)(rng));
    };

    Container c{std::string(kWeightsKind)};
    c.metadata()["source_model"] = "toy-random-seed-" + std::to_string(seed);
    c.metadata()["preprocessing"] = std::string(kPreprocessingId);

    for (const auto& p : topology_params()) {
        std::int64_t n = 1;
        for (auto d : p.shape) n *= d;
        std::vector<float> v(static_cast<std::size_t>(n));
        const std::string& name = p.name;
        if (name.ends_with("/kernel") || name.ends_with("/depthwise_kernel")) {
            // fan-in: kh * kw * c_in for regular kernels, kh * kw for depthwise
            const double fan_in = name.ends_with("/kernel")
                                      ? static_cast<double>(p.shape[0] * p.shape[1] * p.shape[2])
                                      : static_cast<double>(p.shape[0] * p.shape[1]);
            const double bound = std::sqrt(6.0 / fan_in);
            for (auto& x : v) x = uniform(-bound, bound);
        } else if (name.ends_with("/gamma")) {
            for (auto& x : v) x = uniform(0.8, 1.2);
        } else if (name.ends_with("/beta")) {
            for (auto& x : v) x = uniform(-0.3, 0.3);
        } else if (name.ends_with("/moving_mean")) {
            for (auto& x : v) x = uniform(-0.2, 0.2);
        } else {
            for (auto& x : v) x = uniform(0.5, 1.5);
        }
        c.add(p.name, p.shape, v);
    }
    return WeightContainer::from_container(std::move(c));
}

}  // namespace rbff
