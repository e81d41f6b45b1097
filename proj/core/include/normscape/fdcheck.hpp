#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "normscape/gradcheck.hpp"
#include "normscape/objective.hpp"

namespace normscape {

// Finite-difference verification of the full objective gradient, layer by
// layer, at 64-bit. Uses fully random initialization so no coordinate is
// structurally dead.
struct FdCheckConfig {
    ModelConfig model;        // caller picks the size; see tiny_check_config()
    ObjectiveConfig objective;
    double alpha = 0.5;
    uint64_t seed = 1;
    int64_t batch = 1;
    int64_t height = 8;
    int64_t width = 8;
    double tol = 1e-4;
    double step = 1e-5;
    // Coordinates with |w| below this are skipped on L1-penalized layers:
    // the finite difference straddles the |w| kink there.
    double l1_kink_margin = 1e-3;
};

// The small configuration every gradient-correctness gate runs at.
inline FdCheckConfig tiny_check_config() {
    FdCheckConfig cfg;
    cfg.model.embed_features = 8;
    cfg.model.wide_features = 8;
    cfg.model.narrow_features = 4;
    cfg.model.recurrences = 2;
    return cfg;
}

struct LayerCheck {
    std::string layer;
    std::string subnet;
    GradCheckReport report;
};

inline std::vector<LayerCheck> finite_difference_check(const FdCheckConfig& cfg,
                                                       NormSetting setting) {
    cfg.model.validate();
    cfg.objective.validate();

    ModelParams<double> params = build_model_random<double>(cfg.model, cfg.seed);
    Rng data_rng(derive_seed(cfg.seed, "fdcheck/data"));
    Tensor<double> input({cfg.batch, 1, cfg.height, cfg.width});
    Tensor<double> target({cfg.batch, 1, cfg.height, cfg.width});
    for (int64_t i = 0; i < input.size(); ++i) input[i] = data_rng.next_double();
    for (int64_t i = 0; i < target.size(); ++i) target[i] = data_rng.next_double();

    const LossAndGrads<double> lag =
        total_loss_and_grads(params, input, target, setting, cfg.objective, cfg.alpha);

    std::vector<LayerCheck> results;
    auto layers = params.layers();
    auto grad_layers = lag.grads.layers();
    for (size_t li = 0; li < layers.size(); ++li) {
        ModelParams<double> probe = params;
        Tensor<double>* probe_tensor = probe.layers()[li].tensor;
        auto f = [&](const Tensor<double>& w) {
            *probe_tensor = w;
            const LossBreakdown b =
                batch_loss(probe, input, target, setting, cfg.objective, cfg.alpha);
            return b.total;
        };
        const Tensor<double>& x = *layers[li].tensor;
        std::function<bool(int64_t)> skip;
        if (penalty_kind(setting, layers[li].subnet) == PenaltyKind::l1) {
            const double margin = cfg.l1_kink_margin;
            skip = [&x, margin](int64_t i) { return std::abs(x[i]) < margin; };
        }
        LayerCheck check;
        check.layer = layers[li].name;
        check.subnet = subnet_tag(layers[li].subnet);
        check.report = grad_check(f, x, *grad_layers[li].tensor, cfg.tol, cfg.step, skip);
        results.push_back(std::move(check));
    }
    return results;
}

}  // namespace normscape
