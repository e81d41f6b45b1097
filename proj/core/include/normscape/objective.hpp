#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "normscape/model.hpp"
#include "normscape/tensor.hpp"

namespace normscape {

// Which norm penalty each subnet carries. The three studied settings:
//   all_l2: E:L2  I:L2  R:L2
//   mix:    E:L2  I:L1  R:L2
//   all_l1: E:L1  I:L1  R:L1
enum class NormSetting { all_l2, mix, all_l1 };

enum class PenaltyKind { l1, l2 };

inline PenaltyKind penalty_kind(NormSetting setting, Subnet subnet) {
    switch (setting) {
        case NormSetting::all_l2: return PenaltyKind::l2;
        case NormSetting::all_l1: return PenaltyKind::l1;
        case NormSetting::mix:
            return subnet == Subnet::infer ? PenaltyKind::l1 : PenaltyKind::l2;
    }
    return PenaltyKind::l2;
}

// Machine token, used in CSV rows, file names and CLI flags.
inline const char* setting_token(NormSetting s) {
    switch (s) {
        case NormSetting::all_l2: return "all-l2";
        case NormSetting::mix: return "mix";
        case NormSetting::all_l1: return "all-l1";
    }
    return "?";
}

// Display label, used in plot legends.
inline const char* setting_label(NormSetting s) {
    switch (s) {
        case NormSetting::all_l2: return "All-L2";
        case NormSetting::mix: return "Mix";
        case NormSetting::all_l1: return "All-L1";
    }
    return "?";
}

inline NormSetting parse_setting(const std::string& token) {
    if (token == "all-l2") return NormSetting::all_l2;
    if (token == "mix") return NormSetting::mix;
    if (token == "all-l1") return NormSetting::all_l1;
    throw ConfigError("unknown norm setting '" + token + "' (expected all-l2, mix or all-l1)");
}

inline const std::array<NormSetting, 3>& all_settings() {
    static const std::array<NormSetting, 3> s = {NormSetting::all_l2, NormSetting::mix,
                                                 NormSetting::all_l1};
    return s;
}

struct ObjectiveConfig {
    double lambda = 0.0002;  // penalty coefficient, shared by all subnets
    double alpha = 0.5;      // weight of the intermediate-supervision term
    // Penalize lambda * sum(w^2) per subnet when true (weight decay);
    // lambda * sqrt(sum(w^2)) (the literal vector norm) when false.
    bool squared_l2 = true;

    void validate() const {
        if (!(lambda >= 0.0)) throw ConfigError("objective config: lambda must be >= 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) {
            throw ConfigError("objective config: alpha must be in [0,1]");
        }
    }
};

struct LossBreakdown {
    double l1_term = 0.0;  // empirical error of the final output
    double l2_term = 0.0;  // intermediate-supervision error
    double l3_term = 0.0;  // capacity penalty
    double total = 0.0;
    double alpha = 0.0;
    std::array<double, 3> per_subnet_penalty = {0.0, 0.0, 0.0};  // indexed by Subnet
};

// (1/2N) * sum_i ||y_i - yhat_i||^2 over an [N,...] batch, squared norm
// taken over all non-batch elements.
template <std::floating_point T>
double empirical_error(const Tensor<T>& y_true, const Tensor<T>& y_learned) {
    check_same_shape(y_true, y_learned, "empirical_error");
    if (y_true.rank() < 1 || y_true.dim(0) < 1) {
        throw std::invalid_argument("empirical_error: batch must be nonempty");
    }
    const int64_t n = y_true.dim(0);
    double acc = 0.0;
    for (int64_t i = 0; i < y_true.size(); ++i) {
        const double d = static_cast<double>(y_true[i]) - static_cast<double>(y_learned[i]);
        acc += d * d;
    }
    return acc / (2.0 * static_cast<double>(n));
}

// (1/2RN) * sum_i sum_r ||y_i - y_r,i||^2 over the R per-recurrence outputs.
template <std::floating_point T>
double intermediate_loss(const Tensor<T>& y_true, const std::vector<Tensor<T>>& y_r_list) {
    if (y_r_list.empty()) {
        throw std::invalid_argument("intermediate_loss: recurrence output list is empty");
    }
    if (y_true.rank() < 1 || y_true.dim(0) < 1) {
        throw std::invalid_argument("intermediate_loss: batch must be nonempty");
    }
    const int64_t n = y_true.dim(0);
    const double r = static_cast<double>(y_r_list.size());
    double acc = 0.0;
    for (const Tensor<T>& y_r : y_r_list) {
        check_same_shape(y_true, y_r, "intermediate_loss");
        for (int64_t i = 0; i < y_true.size(); ++i) {
            const double d = static_cast<double>(y_true[i]) - static_cast<double>(y_r[i]);
            acc += d * d;
        }
    }
    return acc / (2.0 * r * static_cast<double>(n));
}

struct CapacityPenalty {
    std::array<double, 3> per_subnet = {0.0, 0.0, 0.0};  // indexed by Subnet
    double total = 0.0;
};

template <std::floating_point T>
CapacityPenalty capacity_penalty(const ModelParams<T>& params, NormSetting setting,
                                 const ObjectiveConfig& cfg) {
    // Per-subnet accumulators; L2 subnets aggregate sum(w^2) across all
    // their layers before the optional sqrt.
    std::array<double, 3> abs_sum = {0.0, 0.0, 0.0};
    std::array<double, 3> sq_sum = {0.0, 0.0, 0.0};
    for (auto layer : params.layers()) {
        const int idx = static_cast<int>(layer.subnet);
        if (penalty_kind(setting, layer.subnet) == PenaltyKind::l1) {
            abs_sum[idx] += sum_abs(*layer.tensor);
        } else {
            sq_sum[idx] += sum_squares(*layer.tensor);
        }
    }
    CapacityPenalty out;
    for (int idx = 0; idx < 3; ++idx) {
        const Subnet subnet = static_cast<Subnet>(idx);
        double p;
        if (penalty_kind(setting, subnet) == PenaltyKind::l1) {
            p = cfg.lambda * abs_sum[idx];
        } else {
            p = cfg.lambda * (cfg.squared_l2 ? sq_sum[idx] : std::sqrt(sq_sum[idx]));
        }
        out.per_subnet[idx] = p;
        out.total += p;
    }
    return out;
}

// Adds the penalty gradient to grads in place. For the unsquared L2 norm the
// gradient couples all layers of a subnet through the shared norm, so the
// subnet norms are computed first.
template <std::floating_point T>
void add_penalty_grads(const ModelParams<T>& params, NormSetting setting,
                       const ObjectiveConfig& cfg, ModelParams<T>& grads) {
    std::array<double, 3> subnet_norm = {0.0, 0.0, 0.0};
    if (!cfg.squared_l2) {
        std::array<double, 3> sq_sum = {0.0, 0.0, 0.0};
        for (auto layer : params.layers()) {
            if (penalty_kind(setting, layer.subnet) == PenaltyKind::l2) {
                sq_sum[static_cast<int>(layer.subnet)] += sum_squares(*layer.tensor);
            }
        }
        for (int idx = 0; idx < 3; ++idx) subnet_norm[idx] = std::sqrt(sq_sum[idx]);
    }

    auto param_layers = params.layers();
    auto grad_layers = grads.layers();
    for (size_t li = 0; li < param_layers.size(); ++li) {
        const Tensor<T>& w = *param_layers[li].tensor;
        Tensor<T>& g = *grad_layers[li].tensor;
        const Subnet subnet = param_layers[li].subnet;
        if (penalty_kind(setting, subnet) == PenaltyKind::l1) {
            // Subgradient sign(w), with sign(0) = 0 so exact zeros sit still.
            const T lam = static_cast<T>(cfg.lambda);
            for (int64_t i = 0; i < w.size(); ++i) {
                if (w[i] > T(0)) g[i] += lam;
                else if (w[i] < T(0)) g[i] -= lam;
            }
        } else if (cfg.squared_l2) {
            const T coef = static_cast<T>(2.0 * cfg.lambda);
            for (int64_t i = 0; i < w.size(); ++i) g[i] += coef * w[i];
        } else {
            const double norm = subnet_norm[static_cast<int>(subnet)];
            if (norm > 0.0) {
                const T coef = static_cast<T>(cfg.lambda / norm);
                for (int64_t i = 0; i < w.size(); ++i) g[i] += coef * w[i];
            }
        }
    }
}

template <std::floating_point T>
struct LossAndGrads {
    LossBreakdown breakdown;
    ModelParams<T> grads;
};

// Full objective on one batch: forward pass, the three loss terms, and
// gradients for every parameter tensor (data terms via backpropagation plus
// the penalty subgradients). alpha overrides cfg.alpha when the caller runs
// a decay schedule; pass cfg.alpha for the constant policy.
template <std::floating_point T>
LossAndGrads<T> total_loss_and_grads(const ModelParams<T>& params, const Tensor<T>& input,
                                     const Tensor<T>& target, NormSetting setting,
                                     const ObjectiveConfig& cfg, double alpha) {
    cfg.validate();
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("total_loss_and_grads: alpha must be in [0,1]");
    }
    check_same_shape(input, target, "total_loss_and_grads");
    if (input.dim(0) < 1) {
        throw std::invalid_argument("total_loss_and_grads: batch must be nonempty");
    }

    ForwardCache<T> cache;
    forward_train(params, input, cache);

    const int64_t n = input.dim(0);
    const int64_t r_count = params.config.recurrences;

    LossAndGrads<T> out;
    out.breakdown.alpha = alpha;
    out.breakdown.l1_term = empirical_error(target, cache.y_learned);

    // Intermediate term and its gradients straight off the recurrence stack.
    std::vector<Tensor<T>> grad_y_r;
    grad_y_r.reserve(static_cast<size_t>(r_count));
    {
        double acc = 0.0;
        const T coef = static_cast<T>(alpha / (static_cast<double>(r_count) * static_cast<double>(n)));
        for (int64_t r = 0; r < r_count; ++r) {
            Tensor<T> y_r = detail::slice_recurrence_image(cache.y_stack, r);
            Tensor<T> g({input.dim(0), 1, input.dim(2), input.dim(3)});
            for (int64_t i = 0; i < y_r.size(); ++i) {
                const double d = static_cast<double>(y_r[i]) - static_cast<double>(target[i]);
                acc += d * d;
                g[i] = coef * static_cast<T>(d);
            }
            grad_y_r.push_back(std::move(g));
        }
        out.breakdown.l2_term =
            acc / (2.0 * static_cast<double>(r_count) * static_cast<double>(n));
    }

    const CapacityPenalty pen = capacity_penalty(params, setting, cfg);
    out.breakdown.l3_term = pen.total;
    out.breakdown.per_subnet_penalty = pen.per_subnet;
    out.breakdown.total = (1.0 - alpha) * out.breakdown.l1_term +
                          alpha * out.breakdown.l2_term + out.breakdown.l3_term;
    if (!std::isfinite(out.breakdown.total)) {
        throw NumericError("non-finite loss: l1=" + std::to_string(out.breakdown.l1_term) +
                           " l2=" + std::to_string(out.breakdown.l2_term) +
                           " l3=" + std::to_string(out.breakdown.l3_term));
    }

    Tensor<T> grad_final({input.dim(0), 1, input.dim(2), input.dim(3)});
    {
        const T coef = static_cast<T>((1.0 - alpha) / static_cast<double>(n));
        for (int64_t i = 0; i < grad_final.size(); ++i) {
            grad_final[i] = coef * (cache.y_learned[i] - target[i]);
        }
    }

    out.grads = backward(params, cache, grad_final, grad_y_r);
    add_penalty_grads(params, setting, cfg, out.grads);
    return out;
}

// Loss terms only (validation / reporting), no gradients, lean forward.
template <std::floating_point T>
LossBreakdown batch_loss(const ModelParams<T>& params, const Tensor<T>& input,
                         const Tensor<T>& target, NormSetting setting,
                         const ObjectiveConfig& cfg, double alpha) {
    ForwardOutput<T> fwd = forward(params, input);
    LossBreakdown b;
    b.alpha = alpha;
    b.l1_term = empirical_error(target, fwd.final_image);
    b.l2_term = intermediate_loss(target, fwd.per_recurrence);
    const CapacityPenalty pen = capacity_penalty(params, setting, cfg);
    b.l3_term = pen.total;
    b.per_subnet_penalty = pen.per_subnet;
    b.total = (1.0 - alpha) * b.l1_term + alpha * b.l2_term + b.l3_term;
    return b;
}

}  // namespace normscape
