#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rbff/tensor.hpp"

namespace rbff {

class WeightContainer;

inline constexpr int kInputSize = 224;

struct ImageEntry {
    std::filesystem::path path;
    int label = 0;
    friend bool operator==(const ImageEntry&, const ImageEntry&) = default;
};

/// Directory-per-class image collection. Class ids follow lexicographic
/// class-name order; images within a class are sorted by file name.
struct DatasetManifest {
    std::filesystem::path root;
    std::vector<std::string> class_names;
    std::vector<std::vector<std::filesystem::path>> images;
    /// SHA-256 over class names, relative paths and file bytes.
    std::string content_hash;

    std::size_t num_classes() const { return class_names.size(); }
    std::vector<std::size_t> counts() const;
    std::size_t size() const;
    /// All images in deterministic class-then-file order.
    std::vector<ImageEntry> flatten() const;
};

/// Scans `root` for one subdirectory per class. Files with a recognised
/// image extension are taken; everything else is ignored.
DatasetManifest ingest(const std::filesystem::path& root);

/// 8-bit RGB image, interleaved.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;
};

RgbImage decode_image(const std::filesystem::path& path);

/// Bilinear resampling with half-pixel centres (src = (dst + 0.5) * scale - 0.5,
/// clamped to the border) and no antialiasing filter.
Tensor resize_bilinear(const Tensor& src, int out_height, int out_width);

/// Resize to 224x224 and map each value v to v / 127.5 - 1.
Tensor preprocess(const RgbImage& image);
Tensor preprocess_file(const std::filesystem::path& path);

/// Throws unless the container was exported for this preprocessing.
void check_preprocessing(const WeightContainer& weights);

}  // namespace rbff
