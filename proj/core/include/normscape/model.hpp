#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "normscape/conv.hpp"
#include "normscape/rng.hpp"
#include "normscape/tensor.hpp"

namespace normscape {

// Parameter census constants for the default configuration: the reference
// design total this network is compared against, and the floor it must
// exceed so that the weight count stays above the training-set size.
constexpr int64_t kReferenceParamTotal = 945318;
constexpr int64_t kOverparamFloor = 936778;

enum class Subnet { embed, infer, recon };

inline const char* subnet_tag(Subnet s) {
    switch (s) {
        case Subnet::embed: return "E";
        case Subnet::infer: return "I";
        case Subnet::recon: return "R";
    }
    return "?";
}

// Widths of the 8-layer network. embed_features is the channel count
// produced by the first conv layer (input of the second); the shrinking 1x1
// layer folds wide_features = 2N down to narrow_features = N, and the
// expanding 1x1 layer inverts that. The default narrow width is 144 rather
// than 96: with 96 the census lands at 537,988 parameters, far below the
// overparametrization floor the experiment requires, so the inner widths are
// the one free knob turned up until the realized total (958,180) clears it.
struct ModelConfig {
    int64_t embed_features = 192;
    int64_t wide_features = 288;
    int64_t narrow_features = 144;
    int64_t recurrences = 4;
    int kernel_size = 3;
    int scale_factor = 2;
    // Optional: add the (bicubic-upscaled) input image to every
    // per-recurrence reconstruction so the subnets learn residual detail
    // only. Off by default; the base architecture reconstructs the full
    // image.
    bool input_skip = false;

    void validate() const {
        if (embed_features <= 0 || wide_features <= 0 || narrow_features <= 0) {
            throw ConfigError("model config: feature widths must be positive");
        }
        if (wide_features != 2 * narrow_features) {
            throw ConfigError("model config: wide_features (" + std::to_string(wide_features) +
                              ") must be exactly twice narrow_features (" +
                              std::to_string(narrow_features) + ")");
        }
        if (recurrences < 1) {
            throw ConfigError("model config: recurrences must be >= 1");
        }
        if (kernel_size != 3) {
            throw ConfigError("model config: kernel_size must be 3");
        }
        if (scale_factor < 1) {
            throw ConfigError("model config: scale_factor must be >= 1");
        }
    }

    ConvSpec conv1_spec() const { return ConvSpec::make(1, embed_features, kernel_size); }
    ConvSpec conv2_spec() const { return ConvSpec::make(embed_features, wide_features, kernel_size); }
    ConvSpec shrink_spec() const { return ConvSpec::make(wide_features, narrow_features, 1); }
    ConvSpec infer_spec() const { return ConvSpec::make(narrow_features, narrow_features, kernel_size); }
    ConvSpec expand_spec() const { return ConvSpec::make(narrow_features, wide_features, 1); }
    ConvSpec recon_spec() const { return ConvSpec::make(wide_features, 1, kernel_size); }
    ConvSpec combine_spec() const { return ConvSpec::make(recurrences, 1, 1); }
};

template <std::floating_point T>
struct LayerView {
    const char* name;
    Subnet subnet;
    Tensor<T>* tensor;
};

template <std::floating_point T>
struct ConstLayerView {
    const char* name;
    Subnet subnet;
    const Tensor<T>* tensor;
};

// The full parameter set, partitioned into the embedding (E), inference (I)
// and reconstruction (R) subnets. There are no bias parameters anywhere.
template <std::floating_point T>
struct ModelParams {
    ModelConfig config;

    Tensor<T> embed_conv1;   // E: [embed, 1, 3, 3]
    Tensor<T> embed_conv2;   // E: [wide, embed, 3, 3]
    Tensor<T> embed_shrink;  // E: [narrow, wide, 1, 1]
    Tensor<T> infer_conv_a;  // I: [narrow, narrow, 3, 3], shared across recurrences
    Tensor<T> infer_conv_b;  // I: [narrow, narrow, 3, 3], shared across recurrences
    Tensor<T> recon_expand;  // R: [wide, narrow, 1, 1]
    Tensor<T> recon_conv;    // R: [1, wide, 3, 3]
    Tensor<T> recon_combine; // R: [1, recurrences, 1, 1]

    static ModelParams zeros(const ModelConfig& cfg) {
        cfg.validate();
        ModelParams p;
        p.config = cfg;
        p.embed_conv1 = Tensor<T>({cfg.embed_features, 1, cfg.kernel_size, cfg.kernel_size});
        p.embed_conv2 = Tensor<T>({cfg.wide_features, cfg.embed_features, cfg.kernel_size, cfg.kernel_size});
        p.embed_shrink = Tensor<T>({cfg.narrow_features, cfg.wide_features, 1, 1});
        p.infer_conv_a = Tensor<T>({cfg.narrow_features, cfg.narrow_features, cfg.kernel_size, cfg.kernel_size});
        p.infer_conv_b = Tensor<T>({cfg.narrow_features, cfg.narrow_features, cfg.kernel_size, cfg.kernel_size});
        p.recon_expand = Tensor<T>({cfg.wide_features, cfg.narrow_features, 1, 1});
        p.recon_conv = Tensor<T>({1, cfg.wide_features, cfg.kernel_size, cfg.kernel_size});
        p.recon_combine = Tensor<T>({1, cfg.recurrences, 1, 1});
        return p;
    }

    std::array<LayerView<T>, 8> layers() {
        return {{{"embed_conv1", Subnet::embed, &embed_conv1},
                 {"embed_conv2", Subnet::embed, &embed_conv2},
                 {"embed_shrink", Subnet::embed, &embed_shrink},
                 {"infer_conv_a", Subnet::infer, &infer_conv_a},
                 {"infer_conv_b", Subnet::infer, &infer_conv_b},
                 {"recon_expand", Subnet::recon, &recon_expand},
                 {"recon_conv", Subnet::recon, &recon_conv},
                 {"recon_combine", Subnet::recon, &recon_combine}}};
    }

    std::array<ConstLayerView<T>, 8> layers() const {
        return {{{"embed_conv1", Subnet::embed, &embed_conv1},
                 {"embed_conv2", Subnet::embed, &embed_conv2},
                 {"embed_shrink", Subnet::embed, &embed_shrink},
                 {"infer_conv_a", Subnet::infer, &infer_conv_a},
                 {"infer_conv_b", Subnet::infer, &infer_conv_b},
                 {"recon_expand", Subnet::recon, &recon_expand},
                 {"recon_conv", Subnet::recon, &recon_conv},
                 {"recon_combine", Subnet::recon, &recon_combine}}};
    }

    template <std::floating_point U>
    ModelParams<U> cast() const {
        ModelParams<U> out = ModelParams<U>::zeros(config);
        auto src = layers();
        auto dst = out.layers();
        for (size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
        return out;
    }
};

namespace detail {

template <std::floating_point T>
void he_normal_fill(Tensor<T>& w, Rng& rng) {
    // fan_in = in_channels * k^2, std = sqrt(2 / fan_in).
    const double fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
    const double stddev = std::sqrt(2.0 / fan_in);
    for (int64_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(stddev * rng.next_normal());
}

// Zero everywhere except a unit self-connection at the kernel center where
// out channel == in channel.
template <std::floating_point T>
void self_connection_fill(Tensor<T>& w) {
    w.fill(T(0));
    const int64_t out_ch = w.dim(0), in_ch = w.dim(1), k = w.dim(2);
    const int64_t center = (k / 2) * k + (k / 2);
    for (int64_t o = 0; o < out_ch && o < in_ch; ++o) {
        w[(o * in_ch + o) * k * k + center] = T(1);
    }
}

}  // namespace detail

// Initialization: He-normal for the non-recursive layers; the recursive
// inference convs start as zero except the unit self-connections of conv A,
// which makes the inference stage an exact identity before training; the
// combining layer starts as the uniform average of the recurrence outputs.
template <std::floating_point T>
ModelParams<T> build_model(const ModelConfig& cfg, uint64_t seed) {
    ModelParams<T> p = ModelParams<T>::zeros(cfg);
    for (auto layer : p.layers()) {
        Rng rng(derive_seed(seed, std::string("init/") + layer.name));
        if (layer.subnet == Subnet::infer) continue;
        if (layer.tensor == &p.recon_combine) continue;
        detail::he_normal_fill(*layer.tensor, rng);
    }
    detail::self_connection_fill(p.infer_conv_a);
    p.infer_conv_b.fill(T(0));
    p.recon_combine.fill(static_cast<T>(1.0 / static_cast<double>(cfg.recurrences)));
    return p;
}

// He-normal everywhere (recursive convs and combiner included). Used by the
// finite-difference checks, where structured zeros would leave dead
// coordinates with no gradient to verify.
template <std::floating_point T>
ModelParams<T> build_model_random(const ModelConfig& cfg, uint64_t seed) {
    ModelParams<T> p = ModelParams<T>::zeros(cfg);
    for (auto layer : p.layers()) {
        Rng rng(derive_seed(seed, std::string("rand-init/") + layer.name));
        detail::he_normal_fill(*layer.tensor, rng);
    }
    return p;
}

// A hand-crafted parameter set under which the whole network maps any
// non-negative input to itself exactly: channel 0 carries the pixel value
// through every stage (ReLU is transparent on non-negative activations).
// Test fixture and evaluation plumbing reference point.
template <std::floating_point T>
ModelParams<T> make_identity_params(const ModelConfig& cfg) {
    ModelParams<T> p = ModelParams<T>::zeros(cfg);
    const int64_t k = cfg.kernel_size;
    const int64_t center = (k / 2) * k + (k / 2);
    p.embed_conv1[0 * k * k + center] = T(1);                       // image -> channel 0
    p.embed_conv2[(0 * cfg.embed_features + 0) * k * k + center] = T(1);
    p.embed_shrink[0 * cfg.wide_features + 0] = T(1);
    detail::self_connection_fill(p.infer_conv_a);
    p.infer_conv_b.fill(T(0));
    p.recon_expand[0 * cfg.narrow_features + 0] = T(1);
    if (!cfg.input_skip) {
        p.recon_conv[0 * k * k + center] = T(1);                    // channel 0 -> image
    }
    p.recon_combine.fill(static_cast<T>(1.0 / static_cast<double>(cfg.recurrences)));
    return p;
}

struct ParamCount {
    int64_t total = 0;
    int64_t embed = 0;
    int64_t infer = 0;
    int64_t recon = 0;
};

template <std::floating_point T>
ParamCount count_params(const ModelParams<T>& params) {
    ParamCount c;
    for (auto layer : params.layers()) {
        const int64_t n = layer.tensor->size();
        c.total += n;
        switch (layer.subnet) {
            case Subnet::embed: c.embed += n; break;
            case Subnet::infer: c.infer += n; break;
            case Subnet::recon: c.recon += n; break;
        }
    }
    return c;
}

struct SparsityReport {
    double embed = 0.0;
    double infer = 0.0;
    double recon = 0.0;
    double overall = 0.0;
    int64_t near_zero = 0;
    int64_t total = 0;
};

// Fraction of weights with |w| < epsilon, per subnet and overall.
template <std::floating_point T>
SparsityReport sparsity_report(const ModelParams<T>& params, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("sparsity_report: epsilon must be positive");
    }
    int64_t counts[3] = {0, 0, 0};
    int64_t totals[3] = {0, 0, 0};
    for (auto layer : params.layers()) {
        const int idx = static_cast<int>(layer.subnet);
        const Tensor<T>& w = *layer.tensor;
        totals[idx] += w.size();
        for (int64_t i = 0; i < w.size(); ++i) {
            if (std::abs(static_cast<double>(w[i])) < epsilon) ++counts[idx];
        }
    }
    SparsityReport r;
    r.embed = totals[0] ? static_cast<double>(counts[0]) / static_cast<double>(totals[0]) : 0.0;
    r.infer = totals[1] ? static_cast<double>(counts[1]) / static_cast<double>(totals[1]) : 0.0;
    r.recon = totals[2] ? static_cast<double>(counts[2]) / static_cast<double>(totals[2]) : 0.0;
    r.near_zero = counts[0] + counts[1] + counts[2];
    r.total = totals[0] + totals[1] + totals[2];
    r.overall = r.total ? static_cast<double>(r.near_zero) / static_cast<double>(r.total) : 0.0;
    return r;
}

template <std::floating_point T>
struct ForwardOutput {
    std::vector<Tensor<T>> per_recurrence;  // R images [N,1,H,W]
    Tensor<T> final_image;                  // [N,1,H,W]
    std::vector<double> combination_weights;
};

// Everything the backward pass needs. Activations are stored post-ReLU; the
// backward masks are recovered from them (post > 0 iff pre > 0).
template <std::floating_point T>
struct ForwardCache {
    Tensor<T> input;
    Tensor<T> act1, act2, f0;
    std::vector<Tensor<T>> act_a;    // ReLU(convA(f_{r-1}))
    std::vector<Tensor<T>> f;        // f_r
    std::vector<Tensor<T>> act_e;    // ReLU(expand(f_r))
    Tensor<T> y_stack;               // [N, R, H, W]
    Tensor<T> y_learned;             // [N, 1, H, W]
};

namespace detail {

template <std::floating_point T>
void check_model_input(const ModelConfig& cfg, const Tensor<T>& x) {
    if (x.rank() != 4) {
        throw std::invalid_argument("model input must be rank-4 [N,1,H,W], got " +
                                    shape_str(x.shape()));
    }
    if (x.dim(1) != 1) {
        throw std::invalid_argument("model input must have exactly 1 channel (luminance), got " +
                                    std::to_string(x.dim(1)));
    }
    if (x.dim(2) < cfg.kernel_size || x.dim(3) < cfg.kernel_size) {
        throw std::invalid_argument("model input spatial size " + std::to_string(x.dim(2)) + "x" +
                                    std::to_string(x.dim(3)) + " is smaller than the kernel");
    }
}

// Copies y_r (an [N,1,H,W] image) into slot r of the [N,R,H,W] stack.
template <std::floating_point T>
void place_recurrence_image(Tensor<T>& stack, const Tensor<T>& img, int64_t r) {
    const int64_t N = stack.dim(0), R = stack.dim(1);
    const int64_t plane = stack.dim(2) * stack.dim(3);
    for (int64_t n = 0; n < N; ++n) {
        std::memcpy(stack.data() + (n * R + r) * plane, img.data() + n * plane,
                    sizeof(T) * static_cast<size_t>(plane));
    }
}

template <std::floating_point T>
Tensor<T> slice_recurrence_image(const Tensor<T>& stack, int64_t r) {
    const int64_t N = stack.dim(0), R = stack.dim(1);
    const int64_t H = stack.dim(2), W = stack.dim(3);
    const int64_t plane = H * W;
    Tensor<T> img({N, 1, H, W});
    for (int64_t n = 0; n < N; ++n) {
        std::memcpy(img.data() + n * plane, stack.data() + (n * R + r) * plane,
                    sizeof(T) * static_cast<size_t>(plane));
    }
    return img;
}

}  // namespace detail

// Full forward pass retaining intermediate activations for the backward
// pass. Input is a bicubic-upscaled luminance image already at HR size.
template <std::floating_point T>
void forward_train(const ModelParams<T>& p, const Tensor<T>& x, ForwardCache<T>& cache) {
    const ModelConfig& cfg = p.config;
    detail::check_model_input(cfg, x);
    const int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t R = cfg.recurrences;

    cache.input = x;
    cache.act1 = relu_forward(conv2d_forward(x, p.embed_conv1, cfg.conv1_spec()));
    cache.act2 = relu_forward(conv2d_forward(cache.act1, p.embed_conv2, cfg.conv2_spec()));
    cache.f0 = relu_forward(conv2d_forward(cache.act2, p.embed_shrink, cfg.shrink_spec()));

    cache.act_a.clear();
    cache.f.clear();
    cache.act_e.clear();
    cache.act_a.reserve(static_cast<size_t>(R));
    cache.f.reserve(static_cast<size_t>(R));
    cache.act_e.reserve(static_cast<size_t>(R));

    cache.y_stack = Tensor<T>({N, R, H, W});
    const Tensor<T>* prev = &cache.f0;
    for (int64_t r = 0; r < R; ++r) {
        cache.act_a.push_back(relu_forward(conv2d_forward(*prev, p.infer_conv_a, cfg.infer_spec())));
        Tensor<T> fr = conv2d_forward(cache.act_a.back(), p.infer_conv_b, cfg.infer_spec());
        add_inplace(fr, *prev);
        cache.f.push_back(std::move(fr));
        prev = &cache.f.back();

        cache.act_e.push_back(relu_forward(conv2d_forward(*prev, p.recon_expand, cfg.expand_spec())));
        Tensor<T> yr = conv2d_forward(cache.act_e.back(), p.recon_conv, cfg.recon_spec());
        if (cfg.input_skip) add_inplace(yr, x);
        detail::place_recurrence_image(cache.y_stack, yr, r);
    }
    cache.y_learned = conv2d_forward(cache.y_stack, p.recon_combine, cfg.combine_spec());
}

template <std::floating_point T>
ForwardOutput<T> forward(const ModelParams<T>& p, const Tensor<T>& x) {
    ForwardCache<T> cache;
    forward_train(p, x, cache);
    ForwardOutput<T> out;
    out.final_image = std::move(cache.y_learned);
    out.per_recurrence.reserve(static_cast<size_t>(p.config.recurrences));
    for (int64_t r = 0; r < p.config.recurrences; ++r) {
        out.per_recurrence.push_back(detail::slice_recurrence_image(cache.y_stack, r));
    }
    for (int64_t r = 0; r < p.config.recurrences; ++r) {
        out.combination_weights.push_back(static_cast<double>(p.recon_combine[r]));
    }
    return out;
}

// Memory-lean forward for whole-image evaluation: keeps only the rolling
// feature map, returns just the final image.
template <std::floating_point T>
Tensor<T> forward_eval(const ModelParams<T>& p, const Tensor<T>& x) {
    const ModelConfig& cfg = p.config;
    detail::check_model_input(cfg, x);
    const int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t R = cfg.recurrences;

    Tensor<T> f;
    {
        Tensor<T> a1 = relu_forward(conv2d_forward(x, p.embed_conv1, cfg.conv1_spec()));
        Tensor<T> a2 = relu_forward(conv2d_forward(a1, p.embed_conv2, cfg.conv2_spec()));
        a1 = Tensor<T>();
        f = relu_forward(conv2d_forward(a2, p.embed_shrink, cfg.shrink_spec()));
    }
    Tensor<T> y_stack({N, R, H, W});
    for (int64_t r = 0; r < R; ++r) {
        Tensor<T> a = relu_forward(conv2d_forward(f, p.infer_conv_a, cfg.infer_spec()));
        Tensor<T> fb = conv2d_forward(a, p.infer_conv_b, cfg.infer_spec());
        a = Tensor<T>();
        add_inplace(f, fb);
        fb = Tensor<T>();
        Tensor<T> e = relu_forward(conv2d_forward(f, p.recon_expand, cfg.expand_spec()));
        Tensor<T> yr = conv2d_forward(e, p.recon_conv, cfg.recon_spec());
        if (cfg.input_skip) add_inplace(yr, x);
        detail::place_recurrence_image(y_stack, yr, r);
    }
    return conv2d_forward(y_stack, p.recon_combine, cfg.combine_spec());
}

// Backward through the whole network. grad_final is dLoss/dy_learned;
// grad_per_recurrence (may be empty) holds the direct dLoss/dy_r terms of the
// intermediate supervision. Shared layers accumulate over recurrences in
// fixed order (r = R..1).
template <std::floating_point T>
ModelParams<T> backward(const ModelParams<T>& p, const ForwardCache<T>& cache,
                        const Tensor<T>& grad_final,
                        const std::vector<Tensor<T>>& grad_per_recurrence) {
    const ModelConfig& cfg = p.config;
    const int64_t R = cfg.recurrences;
    if (!grad_per_recurrence.empty() &&
        grad_per_recurrence.size() != static_cast<size_t>(R)) {
        throw std::invalid_argument("backward: grad_per_recurrence must be empty or have one "
                                    "entry per recurrence");
    }

    ModelParams<T> g = ModelParams<T>::zeros(cfg);

    // Combining layer.
    ConvGrads<T> comb = conv2d_backward(cache.y_stack, p.recon_combine, grad_final,
                                        cfg.combine_spec());
    g.recon_combine = std::move(comb.weights);

    // Per-recurrence image gradients: combiner route plus direct supervision.
    std::vector<Tensor<T>> grad_y(static_cast<size_t>(R));
    for (int64_t r = 0; r < R; ++r) {
        grad_y[static_cast<size_t>(r)] = detail::slice_recurrence_image(comb.input, r);
        if (!grad_per_recurrence.empty()) {
            add_inplace(grad_y[static_cast<size_t>(r)], grad_per_recurrence[static_cast<size_t>(r)]);
        }
    }
    comb.input = Tensor<T>();

    // Reconstruction branch of each recurrence feeds gradient into f_r.
    std::vector<Tensor<T>> grad_f(static_cast<size_t>(R));
    for (int64_t r = R - 1; r >= 0; --r) {
        const Tensor<T>& e_r = cache.act_e[static_cast<size_t>(r)];
        const Tensor<T>& f_r = cache.f[static_cast<size_t>(r)];
        ConvGrads<T> rec = conv2d_backward(e_r, p.recon_conv, grad_y[static_cast<size_t>(r)],
                                           cfg.recon_spec());
        add_inplace(g.recon_conv, rec.weights);
        Tensor<T> grad_e_pre = relu_backward(e_r, rec.input);
        rec = ConvGrads<T>{};
        ConvGrads<T> exp = conv2d_backward(f_r, p.recon_expand, grad_e_pre, cfg.expand_spec());
        add_inplace(g.recon_expand, exp.weights);
        grad_f[static_cast<size_t>(r)] = std::move(exp.input);
    }

    // Backpropagation through the recurrence chain, newest first.
    Tensor<T> carry;  // dLoss/df_r flowing backwards
    for (int64_t r = R - 1; r >= 0; --r) {
        Tensor<T>& total = grad_f[static_cast<size_t>(r)];
        if (carry.size() > 0) add_inplace(total, carry);
        const Tensor<T>& f_prev = (r == 0) ? cache.f0 : cache.f[static_cast<size_t>(r - 1)];
        const Tensor<T>& a_r = cache.act_a[static_cast<size_t>(r)];

        ConvGrads<T> gb = conv2d_backward(a_r, p.infer_conv_b, total, cfg.infer_spec());
        add_inplace(g.infer_conv_b, gb.weights);
        Tensor<T> grad_a_pre = relu_backward(a_r, gb.input);
        gb = ConvGrads<T>{};
        ConvGrads<T> ga = conv2d_backward(f_prev, p.infer_conv_a, grad_a_pre, cfg.infer_spec());
        add_inplace(g.infer_conv_a, ga.weights);

        // f_r = f_{r-1} + convB(...): identity route plus the branch route.
        carry = std::move(total);
        add_inplace(carry, ga.input);
    }

    // Embedding stack.
    Tensor<T> grad_f0_pre = relu_backward(cache.f0, carry);
    carry = Tensor<T>();
    ConvGrads<T> gs = conv2d_backward(cache.act2, p.embed_shrink, grad_f0_pre, cfg.shrink_spec());
    g.embed_shrink = std::move(gs.weights);
    Tensor<T> grad_a2_pre = relu_backward(cache.act2, gs.input);
    gs = ConvGrads<T>{};
    ConvGrads<T> g2 = conv2d_backward(cache.act1, p.embed_conv2, grad_a2_pre, cfg.conv2_spec());
    g.embed_conv2 = std::move(g2.weights);
    Tensor<T> grad_a1_pre = relu_backward(cache.act1, g2.input);
    g2 = ConvGrads<T>{};
    ConvGrads<T> g1 = conv2d_backward(cache.input, p.embed_conv1, grad_a1_pre, cfg.conv1_spec());
    g.embed_conv1 = std::move(g1.weights);

    return g;
}

}  // namespace normscape
