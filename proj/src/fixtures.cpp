#include "rbff/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rbff/error.hpp"

namespace rbff {

namespace {

constexpr std::string_view kInputPrefix = "input/";
constexpr std::string_view kExpectedPrefix = "expected/";

Tensor tensor_from_view(const TensorView& v, const std::string& name) {
    if (v.shape.size() != 3) throw FormatError("fixture tensor '" + name + "' must be 3-D");
    return Tensor(static_cast<int>(v.shape[0]), static_cast<int>(v.shape[1]), static_cast<int>(v.shape[2]),
                  std::vector<float>(v.values.begin(), v.values.end()));
}

TapKey parse_tap_suffix(const std::string& name, const std::string& suffix) {
    // block_<b>/<site>
    const auto slash = suffix.find('/');
    if (suffix.rfind("block_", 0) != 0 || slash == std::string::npos)
        throw FormatError("malformed fixture tensor name '" + name + "'");
    int block = 0;
    try {
        block = std::stoi(suffix.substr(6, slash - 6));
    } catch (const std::exception&) {
        throw FormatError("malformed block index in '" + name + "'");
    }
    return {block, parse_tap_site(suffix.substr(slash + 1))};
}

}  // namespace

bool FixtureReport::passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

double FixtureReport::worst() const {
    double w = 0.0;
    for (const auto& c : checks) w = std::max(w, c.max_abs_diff);
    return w;
}

std::string fixture_tap_name(const std::string& image_id, const TapKey& tap) {
    return std::string(kExpectedPrefix) + image_id + "/block_" + std::to_string(tap.block) + "/" +
           std::string(to_string(tap.site));
}

Container make_fixtures(const WeightContainer& weights, const std::map<std::string, Tensor>& inputs,
                        const std::vector<TapKey>& taps) {
    Container c{std::string(kFixturesKind)};
    c.metadata()["preprocessing"] = std::string(weights.preprocessing_id());
    c.metadata()["tolerance"] = kDefaultFixtureTolerance;
    for (const auto& [id, image] : inputs) {
        c.add(std::string(kInputPrefix) + id, {image.height(), image.width(), image.channels()}, image.data());
        for (const auto& [key, t] : forward(weights, image, taps))
            c.add(fixture_tap_name(id, key), {t.height(), t.width(), t.channels()}, t.data());
    }
    return c;
}

FixtureReport verify_fixtures(const WeightContainer& weights, const Container& fixtures,
                              std::optional<double> tolerance) {
    if (fixtures.kind() != kFixturesKind)
        throw FormatError("container kind is '" + fixtures.kind() + "', expected 'fixtures'");
    const auto& meta = fixtures.metadata();
    if (meta.contains("preprocessing") && meta["preprocessing"] != std::string(weights.preprocessing_id()))
        throw ArgumentError("fixture preprocessing '" + meta["preprocessing"].get<std::string>() +
                            "' differs from the weights' '" + std::string(weights.preprocessing_id()) + "'");
    FixtureReport report;
    report.tolerance = tolerance.value_or(meta.value("tolerance", kDefaultFixtureTolerance));

    std::map<std::string, std::vector<std::pair<TapKey, std::string>>> expected;
    std::set<std::string> inputs;
    for (const auto& e : fixtures.entries()) {
        if (e.name.rfind(kInputPrefix, 0) == 0) {
            inputs.insert(e.name.substr(kInputPrefix.size()));
        } else if (e.name.rfind(kExpectedPrefix, 0) == 0) {
            const std::string rest = e.name.substr(kExpectedPrefix.size());
            const auto slash = rest.find("/block_");
            if (slash == std::string::npos) throw FormatError("malformed fixture tensor name '" + e.name + "'");
            expected[rest.substr(0, slash)].emplace_back(parse_tap_suffix(e.name, rest.substr(slash + 1)), e.name);
        } else {
            throw FormatError("unexpected fixture tensor '" + e.name + "'");
        }
    }
    for (const auto& [id, taps] : expected) {
        if (!inputs.contains(id)) throw FormatError("fixture '" + id + "' has no input tensor");
        const std::string input_name = std::string(kInputPrefix) + id;
        const Tensor image = tensor_from_view(fixtures.get(input_name), input_name);
        std::vector<TapKey> keys;
        for (const auto& [key, name] : taps) keys.push_back(key);
        const TapMap got = forward(weights, image, keys);
        for (const auto& [key, name] : taps) {
            const Tensor want = tensor_from_view(fixtures.get(name), name);
            const Tensor& have = got.at(key);
            FixtureCheck check{id, key, 0.0, false};
            if (have.same_shape(want)) {
                for (std::size_t i = 0; i < want.data().size(); ++i)
                    check.max_abs_diff = std::max(
                        check.max_abs_diff, std::abs(static_cast<double>(have.data()[i]) - want.data()[i]));
                check.passed = check.max_abs_diff <= report.tolerance;
            } else {
                check.max_abs_diff = INFINITY;
            }
            report.checks.push_back(check);
        }
    }
    return report;
}

}  // namespace rbff
