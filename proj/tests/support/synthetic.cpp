#include "synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace synth {

TempDir::TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

void write_texture_dataset(const std::filesystem::path& root, int num_classes, int per_class,
                           std::uint64_t seed, int size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 6.0);
    for (int c = 0; c < num_classes; ++c) {
        const auto dir = root / ("class_" + std::to_string(c));
        std::filesystem::create_directories(dir);
        const double theta = std::numbers::pi * c / num_classes;
        const double period = 6.0 + 5.0 * (c % 3);
        for (int i = 0; i < per_class; ++i) {
            const double phase = 2.0 * std::numbers::pi * unit(rng);
            const double base[3] = {60 + 60 * unit(rng), 60 + 60 * unit(rng), 60 + 60 * unit(rng)};
            const double amp = 50.0 + 30.0 * unit(rng);
            cv::Mat img(size, size, CV_8UC3);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double t = (x * std::cos(theta) + y * std::sin(theta)) * 2.0 * std::numbers::pi / period;
                    const double s = std::sin(t + phase);
                    auto& px = img.at<cv::Vec3b>(y, x);
                    for (int ch = 0; ch < 3; ++ch)
                        px[ch] = cv::saturate_cast<std::uint8_t>(base[ch] + amp * s + noise(rng));
                }
            cv::imwrite((dir / ("img_" + std::to_string(i) + ".png")).string(), img);
        }
    }
}

void write_solid_png(const std::filesystem::path& path, int height, int width, std::uint8_t r, std::uint8_t g,
                     std::uint8_t b) {
    cv::Mat img(height, width, CV_8UC3, cv::Scalar(b, g, r));
    cv::imwrite(path.string(), img);
}

std::vector<float> random_values(std::size_t n, std::uint64_t seed, float lo, float hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

rbff::Tensor random_tensor(int h, int w, int c, std::uint64_t seed, float lo, float hi) {
    return rbff::Tensor(h, w, c, random_values(static_cast<std::size_t>(h) * w * c, seed, lo, hi));
}

rbff::FeatureMatrix gaussian_features(const std::vector<int>& block_set, const std::vector<double>& amplitude,
                                      int num_classes, int per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> col_amp;
    for (std::size_t i = 0; i < block_set.size(); ++i)
        col_amp.insert(col_amp.end(), rbff::block_spec(block_set[i]).expanded_channels(), amplitude[i]);
    const std::size_t d = col_amp.size();

    std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes), std::vector<double>(d));
    for (auto& m : means)
        for (std::size_t j = 0; j < d; ++j) m[j] = col_amp[j] * normal(rng);

    rbff::FeatureMatrix f;
    f.cols = d;
    f.block_set = block_set;
    for (int c = 0; c < num_classes; ++c) f.class_names.push_back("class_" + std::to_string(c));
    for (int c = 0; c < num_classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            for (std::size_t j = 0; j < d; ++j) f.values.push_back(static_cast<float>(means[c][j] + normal(rng)));
            f.labels.push_back(c);
            ++f.rows;
        }
    return f;
}

}  // namespace synth
