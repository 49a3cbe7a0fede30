#include "rbff/fusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "rbff/error.hpp"
#include "rbff/parallel.hpp"
#include "rbff/tensor.hpp"

namespace rbff {

namespace fs = std::filesystem;

void check_block_set(std::span<const int> block_set) {
    if (block_set.empty()) throw ArgumentError("block set is empty");
    for (std::size_t i = 0; i < block_set.size(); ++i) {
        if (block_set[i] < 1 || block_set[i] > kNumBlocks)
            throw ArgumentError("block " + std::to_string(block_set[i]) + " outside 1..16");
        if (i > 0 && block_set[i] <= block_set[i - 1])
            throw ArgumentError("block set must be strictly ascending");
    }
}

std::size_t feature_dim(std::span<const int> block_set) {
    check_block_set(block_set);
    std::size_t d = 0;
    for (int b : block_set) d += static_cast<std::size_t>(block_spec(b).expanded_channels());
    return d;
}

void FeatureMatrix::validate() const {
    if (values.size() != rows * cols) throw FormatError("feature matrix: values size != rows*cols");
    if (labels.size() != rows) throw FormatError("feature matrix: one label per row required");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= class_names.size())
            throw FormatError("feature matrix: label " + std::to_string(l) + " has no class name");
    if (!block_set.empty() && feature_dim(block_set) != cols)
        throw FormatError("feature matrix: column count does not match block set");
}

FeatureVector extract(const WeightContainer& weights, const Tensor& image,
                      std::span<const int> block_set) {
    check_block_set(block_set);
    std::set<TapKey> taps;
    for (int b : block_set) taps.insert({b, TapSite::bn});
    FeatureVector fv;
    fv.block_set.assign(block_set.begin(), block_set.end());
    fv.values.reserve(feature_dim(block_set));
    // forward_visit reports taps in block order, which is the concatenation order.
    forward_visit(weights, image, taps, [&](const TapKey&, const Tensor& t) {
        const auto pooled = global_average_pool(t);
        fv.values.insert(fv.values.end(), pooled.begin(), pooled.end());
    });
    if (fv.values.size() != feature_dim(block_set))
        throw ShapeError("extract: fused dimension does not match block set");
    return fv;
}

FeatureMatrix extract_batch(const WeightContainer& weights, const DatasetManifest& dataset,
                            std::span<const int> block_set, const ProgressSink& progress) {
    check_preprocessing(weights);
    const std::size_t dim = feature_dim(block_set);
    const auto items = dataset.flatten();
    for (std::size_t c = 0; c < dataset.num_classes(); ++c)
        if (dataset.images[c].empty())
            throw ArgumentError("class '" + dataset.class_names[c] + "' has no images");

    FeatureMatrix m;
    m.rows = items.size();
    m.cols = dim;
    m.values.resize(m.rows * m.cols);
    m.class_names = dataset.class_names;
    m.block_set.assign(block_set.begin(), block_set.end());
    for (const auto& it : items) m.labels.push_back(it.label);

    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    parallel_for(items.size(), [&](std::size_t i) {
        Tensor image;
        try {
            image = preprocess_file(items[i].path);
        } catch (const Error& e) {
            throw Error("extract: " + items[i].path.string() + ": " + e.what());
        }
        const FeatureVector fv = extract(weights, image, block_set);
        std::copy(fv.values.begin(), fv.values.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * dim));
        const std::size_t n = ++done;
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(n, items.size());
        }
    });
    return m;
}

FeatureMatrix select_blocks(const FeatureMatrix& m, std::span<const int> subset) {
    check_block_set(subset);
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end) columns
    std::size_t out_cols = 0;
    for (int b : subset) {
        std::size_t offset = 0;
        bool found = false;
        for (int have : m.block_set) {
            const auto width = static_cast<std::size_t>(block_spec(have).expanded_channels());
            if (have == b) {
                ranges.emplace_back(offset, offset + width);
                out_cols += width;
                found = true;
                break;
            }
            offset += width;
        }
        if (!found) throw ArgumentError("block " + std::to_string(b) + " not in feature matrix");
    }
    FeatureMatrix out;
    out.rows = m.rows;
    out.cols = out_cols;
    out.labels = m.labels;
    out.class_names = m.class_names;
    out.block_set.assign(subset.begin(), subset.end());
    out.values.reserve(out.rows * out.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const auto row = m.row(r);
        for (const auto& [b, e] : ranges) out.values.insert(out.values.end(), row.begin() + b, row.begin() + e);
    }
    return out;
}

Container to_container(const FeatureMatrix& m) {
    m.validate();
    Container c{std::string(kFeaturesKind)};
    c.metadata()["class_names"] = m.class_names;
    c.metadata()["block_set"] = m.block_set;
    c.metadata()["layout"] = "column_major";
    std::vector<float> columns(m.values.size());
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t j = 0; j < m.cols; ++j) columns[j * m.rows + r] = m.values[r * m.cols + j];
    c.add("features", {static_cast<std::int64_t>(m.cols), static_cast<std::int64_t>(m.rows)}, columns);
    std::vector<float> labels(m.labels.begin(), m.labels.end());
    c.add("labels", {static_cast<std::int64_t>(m.rows)}, labels);
    return c;
}

FeatureMatrix feature_matrix_from_container(const Container& c) {
    if (c.kind() != kFeaturesKind) throw FormatError("container kind is '" + c.kind() + "', expected 'features'");
    FeatureMatrix m;
    try {
        m.class_names = c.metadata().at("class_names").get<std::vector<std::string>>();
        m.block_set = c.metadata().at("block_set").get<std::vector<int>>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError("features container lacks class_names/block_set metadata");
    }
    const auto f = c.get("features");
    const auto l = c.get("labels");
    if (f.shape.size() != 2 || l.shape.size() != 1 || f.shape[1] != l.shape[0])
        throw FormatError("features container has inconsistent shapes");
    m.cols = static_cast<std::size_t>(f.shape[0]);
    m.rows = static_cast<std::size_t>(f.shape[1]);
    m.values.resize(m.rows * m.cols);
    for (std::size_t j = 0; j < m.cols; ++j)
        for (std::size_t r = 0; r < m.rows; ++r) m.values[r * m.cols + j] = f.values[j * m.rows + r];
    for (float v : l.values) {
        if (v != std::floor(v)) throw FormatError("features container: non-integer label");
        m.labels.push_back(static_cast<int>(v));
    }
    m.validate();
    return m;
}

std::string feature_cache_key(const std::string& weights_hash, std::span<const int> block_set,
                              const std::string& dataset_hash) {
    std::string text = "weights:" + weights_hash + ";blocks:";
    for (int b : block_set) text += std::to_string(b) + ",";
    text += ";dataset:" + dataset_hash;
    return sha256_hex(text).substr(0, 32);
}

FeatureMatrix extract_batch_cached(const WeightContainer& weights, const DatasetManifest& dataset,
                                   std::span<const int> block_set, const fs::path& cache_dir,
                                   const ProgressSink& progress) {
    const fs::path file =
        cache_dir / ("features-" + feature_cache_key(weights.hash(), block_set, dataset.content_hash) + ".rbff");
    if (fs::exists(file)) {
        FeatureMatrix m = feature_matrix_from_container(Container::read(file));
        if (m.class_names == dataset.class_names &&
            m.block_set == std::vector<int>(block_set.begin(), block_set.end()) && m.rows == dataset.size())
            return m;
    }
    FeatureMatrix m = extract_batch(weights, dataset, block_set, progress);
    fs::create_directories(cache_dir);
    const fs::path tmp = file.string() + ".tmp";
    to_container(m).write(tmp);
    fs::rename(tmp, file);
    return m;
}

void write_features_csv(const FeatureMatrix& m, std::ostream& out) {
    out << "label,class_name";
    for (std::size_t j = 0; j < m.cols; ++j) out << ",f" << j;
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < m.rows; ++r) {
        out << m.labels[r] << ',' << m.class_names[m.labels[r]];
        for (float v : m.row(r)) {
            std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(v));
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace rbff
