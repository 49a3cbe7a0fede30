#include "rbff/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "rbff/container.hpp"
#include "rbff/error.hpp"
#include "rbff/mobilenet.hpp"

namespace rbff {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
    static constexpr std::array<std::string_view, 9> kExt = {".jpg", ".jpeg", ".png", ".tif", ".tiff",
                                                             ".bmp", ".ppm",  ".pgm", ".pnm"};
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return std::find(kExt.begin(), kExt.end(), ext) != kExt.end();
}

bool hidden(const fs::path& p) { return p.filename().string().starts_with("."); }

}  // namespace

std::vector<std::size_t> DatasetManifest::counts() const {
    std::vector<std::size_t> c;
    for (const auto& v : images) c.push_back(v.size());
    return c;
}

std::size_t DatasetManifest::size() const {
    std::size_t n = 0;
    for (const auto& v : images) n += v.size();
    return n;
}

std::vector<ImageEntry> DatasetManifest::flatten() const {
    std::vector<ImageEntry> out;
    for (std::size_t c = 0; c < images.size(); ++c)
        for (const auto& p : images[c]) out.push_back({p, static_cast<int>(c)});
    return out;
}

DatasetManifest ingest(const fs::path& root) {
    if (!fs::is_directory(root)) throw Error("dataset root '" + root.string() + "' is not a directory");
    DatasetManifest m;
    m.root = root;

    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory() && !hidden(e.path())) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (class_dirs.size() < 2)
        throw Error("dataset '" + root.string() + "' needs at least 2 class directories, found " +
                    std::to_string(class_dirs.size()));

    Sha256 hash;
    for (const auto& dir : class_dirs) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && !hidden(e.path()) && is_image_file(e.path()))
                files.push_back(e.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
        if (files.empty()) throw Error("class directory '" + dir.string() + "' contains no images");

        const std::string name = dir.filename().string();
        hash.update("class");
        hash.update(std::string_view(name.c_str(), name.size() + 1));
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            if (!in) throw Error("cannot read image file '" + f.string() + "'");
            const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            if (in.bad()) throw Error("cannot read image file '" + f.string() + "'");
            const std::string rel = name + "/" + f.filename().string();
            hash.update(std::string_view(rel.c_str(), rel.size() + 1));
            hash.update(std::to_string(bytes.size()) + ":");
            hash.update(bytes);
        }
        m.class_names.push_back(name);
        m.images.push_back(std::move(files));
    }
    m.content_hash = hash.hex_digest();
    return m;
}

RgbImage decode_image(const fs::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw Error("cannot decode image '" + path.string() + "'");
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    RgbImage img;
    img.height = rgb.rows;
    img.width = rgb.cols;
    img.data.resize(static_cast<std::size_t>(rgb.rows) * rgb.cols * 3);
    for (int y = 0; y < rgb.rows; ++y)
        std::copy_n(rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3,
                    img.data.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
    return img;
}

Tensor resize_bilinear(const Tensor& src, int out_height, int out_width) {
    if (out_height < 1 || out_width < 1) throw ArgumentError("resize target must be positive");
    struct Tap {
        int i0, i1;
        double frac;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(out);
        const double scale = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            double s = (o + 0.5) * scale - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(in - 1));
            const int i0 = static_cast<int>(s);
            t[o] = {i0, std::min(i0 + 1, in - 1), s - i0};
        }
        return t;
    };
    const auto ty = taps(src.height(), out_height);
    const auto tx = taps(src.width(), out_width);
    const int ch = src.channels();
    Tensor out(out_height, out_width, ch);
    for (int y = 0; y < out_height; ++y) {
        for (int x = 0; x < out_width; ++x) {
            for (int c = 0; c < ch; ++c) {
                const double a = src.at(ty[y].i0, tx[x].i0, c);
                const double b = src.at(ty[y].i0, tx[x].i1, c);
                const double d = src.at(ty[y].i1, tx[x].i0, c);
                const double e = src.at(ty[y].i1, tx[x].i1, c);
                const double top = a + (b - a) * tx[x].frac;
                const double bottom = d + (e - d) * tx[x].frac;
                out.at(y, x, c) = static_cast<float>(top + (bottom - top) * ty[y].frac);
            }
        }
    }
    return out;
}

Tensor preprocess(const RgbImage& image) {
    if (image.height < 1 || image.width < 1 ||
        image.data.size() != static_cast<std::size_t>(image.height) * image.width * 3)
        throw ShapeError("preprocess: malformed RGB image");
    std::vector<float> raw(image.data.begin(), image.data.end());
    Tensor t = resize_bilinear(Tensor(image.height, image.width, 3, std::move(raw)), kInputSize, kInputSize);
    for (float& v : t.data()) v = static_cast<float>(v / 127.5 - 1.0);
    return t;
}

Tensor preprocess_file(const fs::path& path) { return preprocess(decode_image(path)); }

void check_preprocessing(const WeightContainer& weights) {
    if (weights.preprocessing_id() != kPreprocessingId)
        throw Error("weights were exported for preprocessing '" +
                    std::string(weights.preprocessing_id()) + "', this engine implements '" +
                    std::string(kPreprocessingId) + "'");
}

}  // namespace rbff
