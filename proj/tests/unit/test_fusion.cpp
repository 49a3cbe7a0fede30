#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rbff/error.hpp"
#include "rbff/fusion.hpp"
#include "rbff/toy_weights.hpp"
#include "synthetic.hpp"

using namespace rbff;
namespace fs = std::filesystem;

namespace {

const WeightContainer& toy() {
    static const WeightContainer w = make_toy_weights(5);
    return w;
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("feature dimensions") {
    CHECK(feature_dim(std::vector<int>{3, 6, 13}) == 912);
    CHECK(feature_dim(std::vector<int>{3, 6, 13, 16}) == 1872);
    CHECK(feature_dim(std::vector<int>{16}) == 960);
    CHECK_THROWS_AS(check_block_set(std::vector<int>{}), ArgumentError);
    CHECK_THROWS_AS(check_block_set(std::vector<int>{6, 3}), ArgumentError);
    CHECK_THROWS_AS(check_block_set(std::vector<int>{3, 3}), ArgumentError);
    CHECK_THROWS_AS(check_block_set(std::vector<int>{0, 3}), ArgumentError);
    CHECK_THROWS_AS(check_block_set(std::vector<int>{3, 17}), ArgumentError);
}

TEST_CASE("extract is GAP of the bn taps in block order") {
    const Tensor img = synth::random_tensor(32, 32, 3, 77);
    const std::vector<int> blocks{3, 6, 13};
    const FeatureVector f = extract(toy(), img, blocks);
    CHECK(f.dim() == 912);
    CHECK(f.block_set == blocks);

    const auto taps = forward(toy(), img, std::vector<TapKey>{{3, TapSite::bn}, {6, TapSite::bn}, {13, TapSite::bn}});
    std::vector<float> want;
    for (int b : blocks) {
        const auto g = global_average_pool(taps.at({b, TapSite::bn}));
        want.insert(want.end(), g.begin(), g.end());
    }
    CHECK(f.values == want);
    CHECK(std::any_of(f.values.begin(), f.values.end(), [](float v) { return v < 0.0f; }));

    const FeatureVector longer = extract(toy(), img, std::vector<int>{3, 6, 13, 16});
    CHECK(longer.dim() == 1872);
    CHECK(std::equal(f.values.begin(), f.values.end(), longer.values.begin()));
    CHECK(extract(toy(), img, blocks).values == f.values);
    CHECK_THROWS_AS(extract(toy(), img, std::vector<int>{13, 3}), ArgumentError);
}

TEST_CASE("batch extraction, persistence and cache") {
    synth::TempDir tmp("rbff_fusion_batch");
    synth::write_texture_dataset(tmp.path / "data", 2, 3, 3, 24);
    const DatasetManifest ds = ingest(tmp.path / "data");
    const std::vector<int> blocks{3, 6};

    std::size_t calls = 0;
    const FeatureMatrix m = extract_batch(toy(), ds, blocks, [&](std::size_t, std::size_t total) {
        ++calls;
        CHECK(total == 6);
    });
    CHECK(calls == 6);
    CHECK(m.rows == 6);
    CHECK(m.cols == 336);
    CHECK(m.labels == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(m.class_names == ds.class_names);
    const auto flat = ds.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const auto row = m.row(i);
        CHECK(std::vector<float>(row.begin(), row.end()) == extract(toy(), preprocess_file(flat[i].path), blocks).values);
    }
    CHECK(extract_batch(toy(), ds, blocks) == m);

    SUBCASE("select blocks") {
        const FeatureMatrix only6 = select_blocks(m, std::vector<int>{6});
        CHECK(only6.cols == 192);
        CHECK(only6.row(2)[0] == m.row(2)[144]);
        CHECK_THROWS_AS(select_blocks(m, std::vector<int>{13}), ArgumentError);
    }
    SUBCASE("container round trip") {
        const Container c = to_container(m);
        CHECK(c.get("features").shape[0] == 336);
        CHECK(feature_matrix_from_container(Container::deserialize(c.serialize())) == m);
    }
    SUBCASE("cache") {
        const fs::path cache = tmp.path / "cache";
        const FeatureMatrix first = extract_batch_cached(toy(), ds, blocks, cache);
        CHECK(first == m);
        const auto key = feature_cache_key(toy().hash(), blocks, ds.content_hash);
        const fs::path file = cache / ("features-" + key + ".rbff");
        REQUIRE(fs::exists(file));
        // A cached file is served without recomputation.
        FeatureMatrix doctored = m;
        doctored.values[0] = 1234.5f;
        to_container(doctored).write(file);
        CHECK(extract_batch_cached(toy(), ds, blocks, cache).values[0] == 1234.5f);
        CHECK(feature_cache_key(toy().hash(), std::vector<int>{3}, ds.content_hash) != key);
        CHECK(feature_cache_key(toy().hash(), blocks, "other") != key);
    }
    SUBCASE("csv") {
        std::ostringstream out;
        write_features_csv(m, out);
        const std::string s = out.str();
        CHECK(std::count(s.begin(), s.end(), '\n') == 7);
    }
    SUBCASE("undecodable image names the file") {
        std::ofstream(tmp.path / "data" / "class_1" / "zz_bad.png") << "garbage";
        CHECK_THROWS_WITH_AS(extract_batch(toy(), ingest(tmp.path / "data"), blocks), doctest::Contains("zz_bad.png"),
                             Error);
    }
}

TEST_CASE("matrix validation") {
    FeatureMatrix m;
    m.rows = 2;
    m.cols = 144;
    m.block_set = {3};
    m.class_names = {"a"};
    m.values.assign(288, 0.0f);
    m.labels = {0, 1};
    CHECK_THROWS_AS(m.validate(), FormatError);
    m.labels = {0, 0};
    CHECK_NOTHROW(m.validate());
    m.cols = 100;
    m.values.resize(200);
    CHECK_THROWS_AS(m.validate(), FormatError);
}

}
