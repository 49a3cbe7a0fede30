#include <doctest.h>

#include <fstream>
#include <sstream>

#include "rbff/config.hpp"
#include "rbff/error.hpp"
#include "synthetic.hpp"

using namespace rbff;

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const RunConfig c;
    CHECK(c.blocks == std::vector<int>{3, 6, 13, 16});
    CHECK(c.pca == 600);
    CHECK(c.seed_pca == 3);
    CHECK(c.seed_split == 33);
    CHECK(c.seed_svm == 333);
    CHECK(c.per_class == 5);
    const ExperimentConfig e = experiment_config(c);
    CHECK(e.n_pca == 600);
    CHECK(e.use_lda);
    CHECK(e.split.repeats == 10);
    CHECK(e.svm.seed == 333);
    CHECK(e.pca_seed == 3);
}

TEST_CASE("set and entries round trip") {
    RunConfig c;
    c.set("blocks", "13, 3,6");
    c.set("pca", "none");
    c.set("train_frac", "0.8");
    c.set("seed_svm", "7");
    c.set("kfold", "5");
    CHECK(c.blocks == std::vector<int>{3, 6, 13});
    CHECK_FALSE(c.pca);
    CHECK(c.train_frac == 0.8);

    RunConfig d;
    for (const auto& [k, v] : c.entries()) d.set(k, v);
    CHECK(d.entries() == c.entries());

    CHECK_THROWS_AS(c.set("colour", "red"), ArgumentError);
    CHECK_THROWS_AS(c.set("repeats", "ten"), ArgumentError);
    CHECK_THROWS_AS(c.set("train_frac", "0.5x"), ArgumentError);
    CHECK_THROWS_AS(c.set("blocks", "3,99"), ArgumentError);
    CHECK_THROWS_AS(c.set("lda", "maybe"), ArgumentError);
}

TEST_CASE("config file") {
    synth::TempDir tmp("rbff_config");
    const auto path = tmp.path / "run.cfg";
    std::ofstream(path) << "# comment\nblocks = 3,6,13\n\npca=none  # trailing\n";
    const auto entries = read_config_file(path);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0] == std::pair<std::string, std::string>{"blocks", "3,6,13"});
    CHECK(entries[1].second == "none");

    std::ofstream(tmp.path / "bad.cfg") << "blocks 3,6\n";
    CHECK_THROWS_WITH_AS(read_config_file(tmp.path / "bad.cfg"), doctest::Contains(":1:"), ArgumentError);
    CHECK_THROWS_AS(read_config_file(tmp.path / "missing.cfg"), ArgumentError);
}

TEST_CASE("header lists every key") {
    std::ostringstream out;
    write_config_header(RunConfig{}, "evaluate", out);
    const std::string s = out.str();
    CHECK(s.rfind("# tool=rbff ", 0) == 0);
    CHECK(s.find("# verb=evaluate\n") != std::string::npos);
    for (const auto& [k, v] : RunConfig{}.entries()) CHECK(s.find("# " + k + "=" + v + "\n") != std::string::npos);
}

}
