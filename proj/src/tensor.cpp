#include "rbff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rbff/error.hpp"

namespace rbff {

namespace {

std::string shape_str(const Tensor& t) {
    return std::to_string(t.height()) + "x" + std::to_string(t.width()) + "x" +
           std::to_string(t.channels());
}

void check_stride(int stride) {
    if (stride < 1) throw ArgumentError("stride must be positive, got " + std::to_string(stride));
}

}  // namespace

Tensor::Tensor(int height, int width, int channels, float fill) {
    if (height < 1 || width < 1 || channels < 1)
        throw ShapeError("tensor dimensions must be positive");
    height_ = height;
    width_ = width;
    channels_ = channels;
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<float> data) {
    if (height < 1 || width < 1 || channels < 1)
        throw ShapeError("tensor dimensions must be positive");
    if (data.size() != static_cast<std::size_t>(height) * width * channels)
        throw ShapeError("tensor data length does not match height*width*channels");
    height_ = height;
    width_ = width;
    channels_ = channels;
    data_ = std::move(data);
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

AxisGeometry axis_geometry(int in, int kernel, int stride, Padding padding) {
    check_stride(stride);
    if (padding == Padding::valid) {
        if (kernel > in) throw ShapeError("kernel larger than input under valid padding");
        return {(in - kernel) / stride + 1, 0};
    }
    const int out = (in + stride - 1) / stride;
    const int total = std::max((out - 1) * stride + kernel - in, 0);
    return {out, total / 2};
}

Tensor conv2d(const Tensor& input, const ConvKernel& kernel, int stride, Padding padding) {
    check_stride(stride);
    if (kernel.in_channels != input.channels())
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.in_channels) +
                         " input channels, tensor is " + shape_str(input));
    const std::size_t cin = kernel.in_channels;
    const std::size_t cout = kernel.out_channels;
    if (kernel.kh < 1 || kernel.kw < 1 || cout < 1 ||
        kernel.data.size() != kernel.kh * kernel.kw * cin * cout)
        throw ShapeError("conv2d: kernel data does not match its declared shape");

    const auto gy = axis_geometry(input.height(), kernel.kh, stride, padding);
    const auto gx = axis_geometry(input.width(), kernel.kw, stride, padding);
    Tensor out(gy.out, gx.out, static_cast<int>(cout));
    std::vector<double> acc(cout);
    const float* w_base = kernel.data.data();

    for (int oy = 0; oy < gy.out; ++oy) {
        for (int ox = 0; ox < gx.out; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int ky = 0; ky < kernel.kh; ++ky) {
                const int iy = oy * stride - gy.pad_before + ky;
                if (iy < 0 || iy >= input.height()) continue;
                for (int kx = 0; kx < kernel.kw; ++kx) {
                    const int ix = ox * stride - gx.pad_before + kx;
                    if (ix < 0 || ix >= input.width()) continue;
                    const auto px = input.pixel(iy, ix);
                    const float* w = w_base + (static_cast<std::size_t>(ky) * kernel.kw + kx) * cin * cout;
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const double v = px[ci];
                        if (v == 0.0) continue;
                        const float* wrow = w + ci * cout;
                        for (std::size_t co = 0; co < cout; ++co) acc[co] += v * wrow[co];
                    }
                }
            }
            float* dst = &out.at(oy, ox, 0);
            for (std::size_t co = 0; co < cout; ++co) dst[co] = static_cast<float>(acc[co]);
        }
    }
    return out;
}

Tensor depthwise_conv2d(const Tensor& input, const DepthwiseKernel& kernel, int stride,
                        Padding padding) {
    check_stride(stride);
    if (kernel.channels != input.channels())
        throw ShapeError("depthwise_conv2d: kernel has " + std::to_string(kernel.channels) +
                         " channels, tensor is " + shape_str(input));
    const std::size_t ch = kernel.channels;
    if (kernel.kh < 1 || kernel.kw < 1 || kernel.data.size() != kernel.kh * kernel.kw * ch)
        throw ShapeError("depthwise_conv2d: kernel data does not match its declared shape");

    const auto gy = axis_geometry(input.height(), kernel.kh, stride, padding);
    const auto gx = axis_geometry(input.width(), kernel.kw, stride, padding);
    Tensor out(gy.out, gx.out, static_cast<int>(ch));
    std::vector<double> acc(ch);

    for (int oy = 0; oy < gy.out; ++oy) {
        for (int ox = 0; ox < gx.out; ++ox) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int ky = 0; ky < kernel.kh; ++ky) {
                const int iy = oy * stride - gy.pad_before + ky;
                if (iy < 0 || iy >= input.height()) continue;
                for (int kx = 0; kx < kernel.kw; ++kx) {
                    const int ix = ox * stride - gx.pad_before + kx;
                    if (ix < 0 || ix >= input.width()) continue;
                    const auto px = input.pixel(iy, ix);
                    const float* w =
                        kernel.data.data() + (static_cast<std::size_t>(ky) * kernel.kw + kx) * ch;
                    for (std::size_t c = 0; c < ch; ++c) acc[c] += static_cast<double>(px[c]) * w[c];
                }
            }
            float* dst = &out.at(oy, ox, 0);
            for (std::size_t c = 0; c < ch; ++c) dst[c] = static_cast<float>(acc[c]);
        }
    }
    return out;
}

void batch_norm_inplace(Tensor& t, const BnParams& p) {
    const std::size_t ch = t.channels();
    if (p.gamma.size() != ch || p.beta.size() != ch || p.mean.size() != ch ||
        p.variance.size() != ch)
        throw ShapeError("batch_norm: parameter length does not match " + std::to_string(ch) +
                         " channels");
    std::vector<double> scale(ch);
    std::vector<double> shift(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        scale[c] = p.gamma[c] / std::sqrt(static_cast<double>(p.variance[c]) + p.epsilon);
        shift[c] = p.beta[c] - scale[c] * p.mean[c];
    }
    auto data = t.data();
    for (std::size_t i = 0; i < data.size(); i += ch)
        for (std::size_t c = 0; c < ch; ++c)
            data[i + c] = static_cast<float>(scale[c] * data[i + c] + shift[c]);
}

Tensor batch_norm(const Tensor& input, const BnParams& params) {
    Tensor out = input;
    batch_norm_inplace(out, params);
    return out;
}

void relu6_inplace(Tensor& t) {
    for (float& v : t.data()) v = std::min(std::max(v, 0.0f), 6.0f);
}

Tensor relu6(const Tensor& input) {
    Tensor out = input;
    relu6_inplace(out);
    return out;
}

std::vector<float> global_average_pool(const Tensor& input) {
    const std::size_t ch = input.channels();
    if (input.empty()) throw ShapeError("global_average_pool: empty tensor");
    std::vector<double> sum(ch, 0.0);
    const auto data = input.data();
    for (std::size_t i = 0; i < data.size(); i += ch)
        for (std::size_t c = 0; c < ch; ++c) sum[c] += data[i + c];
    const double area = static_cast<double>(input.height()) * input.width();
    std::vector<float> out(ch);
    for (std::size_t c = 0; c < ch; ++c) out[c] = static_cast<float>(sum[c] / area);
    return out;
}

Tensor add_residual(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("add_residual: " + shape_str(a) + " vs " + shape_str(b));
    Tensor out = a;
    auto dst = out.data();
    const auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    return out;
}

}  // namespace rbff
