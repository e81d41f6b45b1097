#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "normscape/tensor.hpp"

namespace normscape {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int64_t worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int64_t checked = 0;
    int64_t skipped = 0;
    bool pass = false;

    std::string summary() const {
        return "max_rel_err=" + std::to_string(max_rel_err) + " at index " +
               std::to_string(worst_index) + " (analytic=" + std::to_string(worst_analytic) +
               ", numeric=" + std::to_string(worst_numeric) + ", checked=" +
               std::to_string(checked) + ", skipped=" + std::to_string(skipped) + ")";
    }
};

// Central finite differences at 64-bit against a caller-supplied analytic
// gradient. `skip` lets callers mask coordinates sitting on subgradient kinks
// (ReLU at 0, |w| near 0 under an L1 penalty). The relative-error
// denominator is floored at `scale_floor`: below that gradient magnitude the
// comparison is effectively absolute at scale_floor * tol, which is where
// double-precision central differences bottom out (~1e-9 noise for O(10)
// objectives at step 1e-5).
inline GradCheckReport grad_check(const std::function<double(const Tensor<double>&)>& f,
                                  const Tensor<double>& x,
                                  const Tensor<double>& analytic_grad,
                                  double tol,
                                  double step = 1e-5,
                                  const std::function<bool(int64_t)>& skip = nullptr,
                                  double scale_floor = 1e-5) {
    check_same_shape(x, analytic_grad, "grad_check");
    {
        const double f0 = f(x);
        if (!std::isfinite(f0)) {
            throw NumericError("grad_check: f(x) is non-finite at the base point");
        }
    }

    GradCheckReport report;
    Tensor<double> probe = x;
    for (int64_t i = 0; i < x.size(); ++i) {
        if (skip && skip(i)) {
            ++report.skipped;
            continue;
        }
        const double orig = probe[i];
        probe[i] = orig + step;
        const double f_plus = f(probe);
        probe[i] = orig - step;
        const double f_minus = f(probe);
        probe[i] = orig;
        if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
            throw NumericError("grad_check: non-finite f at perturbed index " + std::to_string(i));
        }
        const double numeric = (f_plus - f_minus) / (2.0 * step);
        const double analytic = analytic_grad[i];
        const double denom =
            std::max({std::abs(numeric), std::abs(analytic), scale_floor});
        const double rel = std::abs(numeric - analytic) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
        ++report.checked;
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace normscape
