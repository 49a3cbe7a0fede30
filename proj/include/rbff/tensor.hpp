#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rbff {

/// Dense H x W x C activation array, row-major with channels innermost.
class Tensor {
public:
    Tensor() = default;
    Tensor(int height, int width, int channels, float fill = 0.0f);
    Tensor(int height, int width, int channels, std::vector<float> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    /// Channel vector of one pixel.
    std::span<const float> pixel(int y, int x) const {
        return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
    }

    bool same_shape(const Tensor& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

/// Regular convolution weights laid out [kh][kw][c_in][c_out].
struct ConvKernel {
    int kh = 0;
    int kw = 0;
    int in_channels = 0;
    int out_channels = 0;
    std::span<const float> data;
};

/// Depthwise weights laid out [kh][kw][c].
struct DepthwiseKernel {
    int kh = 0;
    int kw = 0;
    int channels = 0;
    std::span<const float> data;
};

struct BnParams {
    std::span<const float> gamma;
    std::span<const float> beta;
    std::span<const float> mean;
    std::span<const float> variance;
    double epsilon = 1e-3;
};

enum class Padding { same, valid };

/// Output size and leading pad along one axis. "same" follows the
/// TensorFlow rule: total = max((out - 1) * stride + k - in, 0) with the
/// extra pixel on the bottom/right.
struct AxisGeometry {
    int out = 0;
    int pad_before = 0;
};
AxisGeometry axis_geometry(int in, int kernel, int stride, Padding padding);

Tensor conv2d(const Tensor& input, const ConvKernel& kernel, int stride, Padding padding);
Tensor depthwise_conv2d(const Tensor& input, const DepthwiseKernel& kernel, int stride,
                        Padding padding);
Tensor batch_norm(const Tensor& input, const BnParams& params);
void batch_norm_inplace(Tensor& t, const BnParams& params);
Tensor relu6(const Tensor& input);
void relu6_inplace(Tensor& t);
std::vector<float> global_average_pool(const Tensor& input);
Tensor add_residual(const Tensor& a, const Tensor& b);

}  // namespace rbff
