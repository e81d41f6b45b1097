#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "normscape/model.hpp"
#include "normscape/patches.hpp"
#include "normscape/tensor.hpp"

namespace normscape {

// Zero MSE maps to this capped value so perfect matches stay plottable.
constexpr double kPsnrCap = 100.0;

namespace detail {

inline double quantize_8bit(double v) {
    return std::round(std::clamp(v * 255.0, 0.0, 255.0));
}

}  // namespace detail

// PSNR in dB between two [C,H,W] images with values nominally in [0,1]:
// both are quantized to the 8-bit grid (x255, clamp, round), `shave` border
// pixels are excluded on every side, MSE taken over the rest,
// PSNR = 10*log10(255^2 / MSE). Identical shaved regions return the cap.
// quantize=false skips the clamp+round and compares at float resolution on
// the same 255 scale, so the two variants stay directly comparable.
template <std::floating_point T>
double psnr(const Tensor<T>& reference, const Tensor<T>& candidate, int64_t shave,
            bool quantize = true) {
    check_same_shape(reference, candidate, "psnr");
    if (reference.rank() != 3) {
        throw std::invalid_argument("psnr: expected [C,H,W], got " + shape_str(reference.shape()));
    }
    if (shave < 0) throw std::invalid_argument("psnr: shave must be >= 0");
    const int64_t c_count = reference.dim(0), h = reference.dim(1), w = reference.dim(2);
    if (h - 2 * shave < 1 || w - 2 * shave < 1) {
        throw std::invalid_argument("psnr: shave " + std::to_string(shave) +
                                    " leaves no pixels of a " + std::to_string(h) + "x" +
                                    std::to_string(w) + " image");
    }
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t c = 0; c < c_count; ++c) {
        for (int64_t y = shave; y < h - shave; ++y) {
            const T* rrow = reference.data() + (c * h + y) * w;
            const T* crow = candidate.data() + (c * h + y) * w;
            for (int64_t x = shave; x < w - shave; ++x) {
                const double rv = static_cast<double>(rrow[x]);
                const double cv = static_cast<double>(crow[x]);
                const double d = quantize ? detail::quantize_8bit(rv) - detail::quantize_8bit(cv)
                                          : (rv - cv) * 255.0;
                acc += d * d;
                ++count;
            }
        }
    }
    const double mse = acc / static_cast<double>(count);
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// One evaluation image: ground truth plus its degraded + re-upscaled input.
template <std::floating_point T>
struct EvalPair {
    std::string name;
    Tensor<T> hr;     // [1, H, W] modcropped ground truth
    Tensor<T> input;  // [1, H, W] bicubic-upscaled LR
};

template <std::floating_point T>
EvalPair<T> prepare_eval_pair(std::string name, const Tensor<T>& luminance, int scale) {
    EvalPair<T> pair;
    pair.name = std::move(name);
    pair.hr = modcrop(luminance, scale);
    pair.input = bicubic_upscale(bicubic_downscale(pair.hr, scale), scale);
    return pair;
}

struct EvalRow {
    std::string name;
    double psnr_db = 0.0;
};

struct EvalSummary {
    std::vector<EvalRow> per_image;
    double mean_psnr = 0.0;
};

// PSNR of the bicubic-upscaled inputs themselves: the baseline any trained
// model has to beat.
template <std::floating_point T>
EvalSummary evaluate_baseline(const std::vector<EvalPair<T>>& pairs, int64_t shave,
                              bool quantize = true) {
    if (pairs.empty()) throw DataError("evaluate_baseline: empty evaluation set");
    EvalSummary s;
    double acc = 0.0;
    for (const EvalPair<T>& p : pairs) {
        const double v = psnr(p.hr, p.input, shave, quantize);
        s.per_image.push_back({p.name, v});
        acc += v;
    }
    s.mean_psnr = acc / static_cast<double>(pairs.size());
    return s;
}

// Whole-image forward passes (no patching at eval time), PSNR per image.
template <std::floating_point T>
EvalSummary evaluate_model(const ModelParams<T>& params, const std::vector<EvalPair<T>>& pairs,
                           int64_t shave, bool quantize = true) {
    if (pairs.empty()) throw DataError("evaluate_model: empty evaluation set");
    EvalSummary s;
    double acc = 0.0;
    for (const EvalPair<T>& p : pairs) {
        Tensor<T> batch({1, 1, p.input.dim(1), p.input.dim(2)});
        std::copy(p.input.data(), p.input.data() + p.input.size(), batch.data());
        Tensor<T> out = forward_eval(params, batch);
        Tensor<T> img({1, p.input.dim(1), p.input.dim(2)});
        std::copy(out.data(), out.data() + out.size(), img.data());
        const double v = psnr(p.hr, img, shave, quantize);
        s.per_image.push_back({p.name, v});
        acc += v;
    }
    s.mean_psnr = acc / static_cast<double>(pairs.size());
    return s;
}

}  // namespace normscape
