#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "normscape/resize.hpp"
#include "normscape/rng.hpp"
#include "normscape/tensor.hpp"

namespace normscape {

struct PatchConfig {
    int64_t patch_size = 41;
    int64_t stride = 21;

    void validate() const {
        if (patch_size < 1 || stride < 1) {
            throw ConfigError("patch config: patch_size and stride must be >= 1");
        }
    }
};

// Number of patch positions along one axis: floor((dim - patch)/stride) + 1,
// zero when the axis is shorter than one patch.
inline int64_t patch_positions(int64_t dim, const PatchConfig& cfg) {
    if (dim < cfg.patch_size) return 0;
    return (dim - cfg.patch_size) / cfg.stride + 1;
}

// Crops a [C, H, W] image so both spatial dims are divisible by scale.
template <std::floating_point T>
Tensor<T> modcrop(const Tensor<T>& img, int scale) {
    if (img.rank() != 3) {
        throw std::invalid_argument("modcrop: expected [C,H,W], got " + shape_str(img.shape()));
    }
    if (scale < 1) throw std::invalid_argument("modcrop: scale must be >= 1");
    const int64_t c = img.dim(0);
    const int64_t h = img.dim(1) - img.dim(1) % scale;
    const int64_t w = img.dim(2) - img.dim(2) % scale;
    if (h < 1 || w < 1) {
        throw std::invalid_argument("modcrop: image " + shape_str(img.shape()) +
                                    " vanishes at scale " + std::to_string(scale));
    }
    if (h == img.dim(1) && w == img.dim(2)) return img;
    Tensor<T> out({c, h, w});
    for (int64_t ci = 0; ci < c; ++ci) {
        for (int64_t y = 0; y < h; ++y) {
            std::memcpy(out.data() + (ci * h + y) * w,
                        img.data() + (ci * img.dim(1) + y) * img.dim(2),
                        sizeof(T) * static_cast<size_t>(w));
        }
    }
    return out;
}

template <std::floating_point T>
struct SourceImage {
    std::string name;
    Tensor<T> luminance;  // [1, H, W] in [0,1]
};

// Aligned patch pairs: inputs are bicubic-upscaled low-resolution crops at
// high-resolution size, targets the matching ground-truth crops.
template <std::floating_point T>
struct PatchSet {
    Tensor<T> inputs;   // [P, 1, p, p]
    Tensor<T> targets;  // [P, 1, p, p]
    std::vector<int64_t> source_index;  // per patch: index into source list
    PatchConfig config;

    int64_t count() const { return source_index.empty() ? 0 : inputs.dim(0); }
};

struct PatchReportRow {
    std::string name;
    int64_t height = 0;  // after modcrop
    int64_t width = 0;
    int64_t patches = 0;
    bool skipped = false;
};

template <std::floating_point T>
struct TrainingPairs {
    PatchSet<T> patches;
    std::vector<PatchReportRow> report;
};

namespace detail {

template <std::floating_point T>
void copy_patch(Tensor<T>& dst, int64_t patch_index, const Tensor<T>& img, int64_t y0,
                int64_t x0, int64_t p) {
    const int64_t w = img.dim(2);
    T* out = dst.data() + patch_index * p * p;
    for (int64_t y = 0; y < p; ++y) {
        std::memcpy(out + y * p, img.data() + (y0 + y) * w + x0,
                    sizeof(T) * static_cast<size_t>(p));
    }
}

}  // namespace detail

// Builds the training patch set: per image, modcrop to the scale grid,
// bicubic-downscale to LR, bicubic-upscale back to HR size, then tile both
// versions on the same patch grid. Images smaller than one patch are skipped
// (flagged in the report), never fatal.
template <std::floating_point T>
TrainingPairs<T> make_training_pairs(const std::vector<SourceImage<T>>& images, int scale,
                                     const PatchConfig& cfg = PatchConfig{}) {
    cfg.validate();
    if (scale < 1) throw std::invalid_argument("make_training_pairs: scale must be >= 1");

    TrainingPairs<T> out;
    out.patches.config = cfg;
    const int64_t p = cfg.patch_size;

    struct Prepared {
        Tensor<T> hr, input;
        int64_t rows, cols, image_index;
    };
    std::vector<Prepared> prepared;
    int64_t total = 0;

    for (size_t idx = 0; idx < images.size(); ++idx) {
        const SourceImage<T>& src = images[idx];
        Tensor<T> hr = modcrop(src.luminance, scale);
        PatchReportRow row;
        row.name = src.name;
        row.height = hr.dim(1);
        row.width = hr.dim(2);
        const int64_t rows = patch_positions(hr.dim(1), cfg);
        const int64_t cols = patch_positions(hr.dim(2), cfg);
        row.patches = rows * cols;
        row.skipped = (row.patches == 0);
        out.report.push_back(row);
        if (row.skipped) continue;

        Tensor<T> lr = bicubic_downscale(hr, scale);
        Tensor<T> input = bicubic_upscale(lr, scale);
        total += rows * cols;
        prepared.push_back({std::move(hr), std::move(input), rows, cols,
                            static_cast<int64_t>(idx)});
    }

    if (total == 0) return out;
    out.patches.inputs = Tensor<T>({total, 1, p, p});
    out.patches.targets = Tensor<T>({total, 1, p, p});
    out.patches.source_index.reserve(static_cast<size_t>(total));
    int64_t pi = 0;
    for (const Prepared& pr : prepared) {
        for (int64_t ry = 0; ry < pr.rows; ++ry) {
            for (int64_t rx = 0; rx < pr.cols; ++rx) {
                detail::copy_patch(out.patches.targets, pi, pr.hr, ry * cfg.stride,
                                   rx * cfg.stride, p);
                detail::copy_patch(out.patches.inputs, pi, pr.input, ry * cfg.stride,
                                   rx * cfg.stride, p);
                out.patches.source_index.push_back(pr.image_index);
                ++pi;
            }
        }
    }
    return out;
}

// Mini-batch index plan for one epoch: a seeded permutation of all patches
// chopped into fixed-size batches, trailing partial batch dropped. The
// permutation depends only on (seed, epoch).
inline std::vector<std::vector<int64_t>> make_epoch_batches(int64_t patch_count,
                                                            int64_t batch_size, uint64_t seed,
                                                            int64_t epoch) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (patch_count < 0) throw std::invalid_argument("negative patch count");
    Rng rng(derive_seed(seed, "shuffle", static_cast<uint64_t>(epoch)));
    std::vector<int64_t> perm = rng.permutation(patch_count);
    const int64_t steps = patch_count / batch_size;
    std::vector<std::vector<int64_t>> batches(static_cast<size_t>(steps));
    for (int64_t b = 0; b < steps; ++b) {
        batches[static_cast<size_t>(b)].assign(perm.begin() + b * batch_size,
                                               perm.begin() + (b + 1) * batch_size);
    }
    return batches;
}

// Materializes (inputs, targets) for a batch of patch indices.
template <std::floating_point T>
std::pair<Tensor<T>, Tensor<T>> gather_batch(const PatchSet<T>& set,
                                             const std::vector<int64_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("gather_batch: empty index list");
    const int64_t p = set.config.patch_size;
    const int64_t n = static_cast<int64_t>(indices.size());
    Tensor<T> in({n, 1, p, p});
    Tensor<T> tg({n, 1, p, p});
    const int64_t plane = p * p;
    for (int64_t b = 0; b < n; ++b) {
        const int64_t src = indices[static_cast<size_t>(b)];
        if (src < 0 || src >= set.count()) {
            throw std::invalid_argument("gather_batch: patch index " + std::to_string(src) +
                                        " out of range");
        }
        std::memcpy(in.data() + b * plane, set.inputs.data() + src * plane,
                    sizeof(T) * static_cast<size_t>(plane));
        std::memcpy(tg.data() + b * plane, set.targets.data() + src * plane,
                    sizeof(T) * static_cast<size_t>(plane));
    }
    return {std::move(in), std::move(tg)};
}

}  // namespace normscape
