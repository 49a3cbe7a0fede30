#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>

#include <opencv2/imgproc.hpp>

#include "rbff/dataset.hpp"
#include "rbff/error.hpp"
#include "rbff/toy_weights.hpp"
#include "synthetic.hpp"

using namespace rbff;
namespace fs = std::filesystem;

using synth::TempDir;

TEST_SUITE("dataset") {

TEST_CASE("ingest orders classes and files") {
    TempDir tmp("rbff_ds_ingest");
    synth::write_texture_dataset(tmp.path, 2, 3, 1, 16);
    std::ofstream(tmp.path / "class_0" / "notes.txt") << "ignored";
    fs::create_directories(tmp.path / ".hidden");

    const DatasetManifest m = ingest(tmp.path);
    CHECK(m.num_classes() == 2);
    CHECK(m.class_names == std::vector<std::string>{"class_0", "class_1"});
    CHECK(m.counts() == std::vector<std::size_t>{3, 3});
    CHECK(m.size() == 6);
    const auto flat = m.flatten();
    CHECK(flat.front().label == 0);
    CHECK(flat.back().label == 1);
    CHECK(flat[0].path.filename() == "img_0.png");

    CHECK(ingest(tmp.path).content_hash == m.content_hash);
    fs::remove(tmp.path / "class_1" / "img_2.png");
    CHECK(ingest(tmp.path).content_hash != m.content_hash);
}

TEST_CASE("ingest errors") {
    TempDir tmp("rbff_ds_errors");
    synth::write_texture_dataset(tmp.path, 1, 2, 1, 16);
    CHECK_THROWS_AS(ingest(tmp.path), Error);
    fs::create_directories(tmp.path / "empty_class");
    CHECK_THROWS_WITH_AS(ingest(tmp.path), doctest::Contains("empty_class"), Error);
    CHECK_THROWS_AS(ingest(tmp.path / "missing"), Error);
}

TEST_CASE("decode and preprocess") {
    TempDir tmp("rbff_ds_pre");
    synth::write_solid_png(tmp.path / "black.png", 30, 50, 0, 0, 0);
    synth::write_solid_png(tmp.path / "white.png", 300, 200, 255, 255, 255);
    synth::write_solid_png(tmp.path / "red.png", 4, 4, 255, 0, 0);

    const Tensor black = preprocess_file(tmp.path / "black.png");
    CHECK(black.height() == 224);
    CHECK(black.width() == 224);
    CHECK(black.channels() == 3);
    for (float v : black.data()) REQUIRE(v == -1.0f);
    const Tensor white = preprocess_file(tmp.path / "white.png");
    for (float v : white.data()) REQUIRE(v == 1.0f);

    const RgbImage red = decode_image(tmp.path / "red.png");
    CHECK(red.data[0] == 255);
    CHECK(red.data[1] == 0);
    CHECK(red.data[2] == 0);

    std::ofstream(tmp.path / "broken.png") << "not a png";
    CHECK_THROWS_WITH_AS(decode_image(tmp.path / "broken.png"), doctest::Contains("broken.png"), Error);
}

TEST_CASE("bilinear resize matches OpenCV half-pixel bilinear") {
    for (auto [h, w, oh, ow] : {std::array{7, 9, 224, 224}, std::array{300, 250, 224, 224}, std::array{5, 5, 3, 8}}) {
        const Tensor src = synth::random_tensor(h, w, 3, 40 + h, 0.0f, 255.0f);
        cv::Mat m(h, w, CV_32FC3, const_cast<float*>(src.data().data()));
        cv::Mat r;
        cv::resize(m, r, cv::Size(ow, oh), 0, 0, cv::INTER_LINEAR);
        const Tensor got = resize_bilinear(src, oh, ow);
        double worst = 0.0;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                for (int c = 0; c < 3; ++c)
                    worst = std::max(worst, std::abs(double(got.at(y, x, c)) - r.at<cv::Vec3f>(y, x)[c]));
        // OpenCV computes sample positions in single precision.
        CHECK(worst < 1e-2);
    }
    // Exact half-pixel arithmetic on one output pixel.
    const Tensor src = synth::random_tensor(5, 7, 1, 3, 0.0f, 255.0f);
    const Tensor out = resize_bilinear(src, 3, 4);
    const double sy = (1 + 0.5) * 5.0 / 3.0 - 0.5, sx = (2 + 0.5) * 7.0 / 4.0 - 0.5;
    const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
    const double fy = sy - y0, fx = sx - x0;
    const double want = (1 - fy) * ((1 - fx) * src.at(y0, x0, 0) + fx * src.at(y0, x0 + 1, 0)) +
                        fy * ((1 - fx) * src.at(y0 + 1, x0, 0) + fx * src.at(y0 + 1, x0 + 1, 0));
    CHECK(std::abs(out.at(1, 2, 0) - want) < 1e-4);
    CHECK_THROWS_AS(resize_bilinear(Tensor(2, 2, 1), 0, 2), ArgumentError);
}

TEST_CASE("preprocessing id is checked") {
    const WeightContainer toy = make_toy_weights(1);
    CHECK_NOTHROW(check_preprocessing(toy));
    Container c = toy.raw();
    c.metadata()["preprocessing"] = "caffe:bgr_mean_subtract";
    CHECK_THROWS_WITH_AS(check_preprocessing(WeightContainer::from_container(c)), doctest::Contains("caffe"), Error);
}

}
