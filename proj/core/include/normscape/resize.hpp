#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "normscape/tensor.hpp"

namespace normscape {

// Keys cubic convolution kernel, a = -0.5.
inline double cubic_kernel(double x) {
    x = std::abs(x);
    if (x <= 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
    if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
    return 0.0;
}

// Tap positions and normalized weights for one output index along one axis.
// Tap indices may fall outside [0, in_size); they are clamped at apply time
// (border replication).
struct ResizeTaps {
    int64_t first = 0;
    std::vector<double> weights;
};

// Center-aligned sampling grid: output center i maps to source coordinate
// (i + 0.5) * in/out - 0.5. When antialiasing (downscale), the kernel is
// stretched by the scale ratio. Weights are normalized to sum to 1 exactly.
inline std::vector<ResizeTaps> resize_axis_taps(int64_t in_size, int64_t out_size,
                                                bool antialias) {
    if (in_size < 1 || out_size < 1) {
        throw std::invalid_argument("resize: axis sizes must be >= 1, got in=" +
                                    std::to_string(in_size) + " out=" + std::to_string(out_size));
    }
    const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
    const double stretch = (antialias && ratio > 1.0) ? ratio : 1.0;
    const double support = 2.0 * stretch;

    std::vector<ResizeTaps> taps(static_cast<size_t>(out_size));
    for (int64_t i = 0; i < out_size; ++i) {
        const double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        const int64_t first = static_cast<int64_t>(std::ceil(src - support));
        const int64_t last = static_cast<int64_t>(std::floor(src + support));
        ResizeTaps& t = taps[static_cast<size_t>(i)];
        t.first = first;
        t.weights.resize(static_cast<size_t>(last - first + 1));
        double sum = 0.0;
        for (int64_t j = first; j <= last; ++j) {
            const double w = cubic_kernel((static_cast<double>(j) - src) / stretch);
            t.weights[static_cast<size_t>(j - first)] = w;
            sum += w;
        }
        for (double& w : t.weights) w /= sum;
    }
    return taps;
}

namespace detail {

// Resamples the last axis of a [C, H, W] tensor.
template <std::floating_point T>
Tensor<T> resample_width(const Tensor<T>& img, const std::vector<ResizeTaps>& taps) {
    const int64_t c_count = img.dim(0), h = img.dim(1), w_in = img.dim(2);
    const int64_t w_out = static_cast<int64_t>(taps.size());
    Tensor<T> out({c_count, h, w_out});
    for (int64_t c = 0; c < c_count; ++c) {
        for (int64_t y = 0; y < h; ++y) {
            const T* row = img.data() + (c * h + y) * w_in;
            T* orow = out.data() + (c * h + y) * w_out;
            for (int64_t x = 0; x < w_out; ++x) {
                const ResizeTaps& t = taps[static_cast<size_t>(x)];
                double acc = 0.0;
                for (size_t k = 0; k < t.weights.size(); ++k) {
                    const int64_t j = std::clamp<int64_t>(t.first + static_cast<int64_t>(k), 0, w_in - 1);
                    acc += t.weights[k] * static_cast<double>(row[j]);
                }
                orow[x] = static_cast<T>(acc);
            }
        }
    }
    return out;
}

// Resamples the middle axis of a [C, H, W] tensor.
template <std::floating_point T>
Tensor<T> resample_height(const Tensor<T>& img, const std::vector<ResizeTaps>& taps) {
    const int64_t c_count = img.dim(0), h_in = img.dim(1), w = img.dim(2);
    const int64_t h_out = static_cast<int64_t>(taps.size());
    Tensor<T> out({c_count, h_out, w});
    for (int64_t c = 0; c < c_count; ++c) {
        for (int64_t y = 0; y < h_out; ++y) {
            const ResizeTaps& t = taps[static_cast<size_t>(y)];
            T* orow = out.data() + (c * h_out + y) * w;
            for (int64_t x = 0; x < w; ++x) orow[x] = T(0);
            for (size_t k = 0; k < t.weights.size(); ++k) {
                const int64_t j = std::clamp<int64_t>(t.first + static_cast<int64_t>(k), 0, h_in - 1);
                const T* row = img.data() + (c * h_in + j) * w;
                const double wk = t.weights[k];
                for (int64_t x = 0; x < w; ++x) {
                    orow[x] += static_cast<T>(wk * static_cast<double>(row[x]));
                }
            }
        }
    }
    return out;
}

}  // namespace detail

// Separable bicubic resampling of a [C, H, W] image to the given spatial
// size. Antialiasing (kernel stretching) applies per axis on reduction only.
template <std::floating_point T>
Tensor<T> bicubic_resize(const Tensor<T>& img, int64_t out_h, int64_t out_w,
                         bool antialias = true) {
    if (img.rank() != 3) {
        throw std::invalid_argument("bicubic_resize: expected [C,H,W], got " +
                                    shape_str(img.shape()));
    }
    if (out_h < 1 || out_w < 1) {
        throw std::invalid_argument("bicubic_resize: output dimensions must be >= 1");
    }
    const auto w_taps = resize_axis_taps(img.dim(2), out_w, antialias);
    const auto h_taps = resize_axis_taps(img.dim(1), out_h, antialias);
    return detail::resample_height(detail::resample_width(img, w_taps), h_taps);
}

// Downscale by an integer factor; dimensions must be divisible (modcrop
// first).
template <std::floating_point T>
Tensor<T> bicubic_downscale(const Tensor<T>& img, int scale) {
    if (scale < 1) throw std::invalid_argument("bicubic_downscale: scale must be >= 1");
    if (img.rank() != 3) {
        throw std::invalid_argument("bicubic_downscale: expected [C,H,W], got " +
                                    shape_str(img.shape()));
    }
    if (img.dim(1) % scale != 0 || img.dim(2) % scale != 0) {
        throw std::invalid_argument("bicubic_downscale: dimensions " + std::to_string(img.dim(1)) +
                                    "x" + std::to_string(img.dim(2)) + " not divisible by scale " +
                                    std::to_string(scale));
    }
    return bicubic_resize(img, img.dim(1) / scale, img.dim(2) / scale, true);
}

template <std::floating_point T>
Tensor<T> bicubic_upscale(const Tensor<T>& img, int scale) {
    if (scale < 1) throw std::invalid_argument("bicubic_upscale: scale must be >= 1");
    if (img.rank() != 3) {
        throw std::invalid_argument("bicubic_upscale: expected [C,H,W], got " +
                                    shape_str(img.shape()));
    }
    return bicubic_resize(img, img.dim(1) * scale, img.dim(2) * scale, true);
}

}  // namespace normscape
