#ifndef SEPLOSS_GRAD_CHECK_HPP
#define SEPLOSS_GRAD_CHECK_HPP

#include <functional>
#include <string>

#include "seploss/loss_output.hpp"

namespace seploss {

struct FiniteDiffConfig {
    double step = 1e-5;
    double tolerance = 1e-4;   // relative error bound
    double abs_floor = 1e-8;   // absolute fallback near zeros
};

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                   const FiniteDiffConfig& cfg = {}) {
    require(cfg.step > 0.0, "finite_diff_gradient: step must be positive");
    Tensor grad = Tensor::zeros_like(x);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + cfg.step;
        const double hi = f(probe);
        probe[i] = x[i] - cfg.step;
        const double lo = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(hi) || !std::isfinite(lo))
            throw std::domain_error("finite_diff_gradient: f non-finite at probe point");
        grad[i] = (hi - lo) / (2.0 * cfg.step);
    }
    return grad;
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
    bool skipped = false;  // degenerate input, not compared
    std::string note;
};

// Compares a loss's analytic gradient against central differences. Losses
// that flag their input as degenerate (eps-capped) are skipped with a
// warning, not failed. Coordinates where both gradients sit below abs_floor
// pass by the absolute fallback.
inline GradCheckReport check_gradient(const std::function<LossOutput(const Tensor&)>& loss_op,
                                      const Tensor& x, const FiniteDiffConfig& cfg = {}) {
    GradCheckReport report;
    LossOutput out = loss_op(x);
    require(out.gradient.has_value(), "check_gradient: loss provides no analytic gradient");
    if (out.degenerate) {
        report.skipped = true;
        report.pass = true;
        report.note = "skipped degenerate input: " + out.note;
        return report;
    }

    const Tensor fd = finite_diff_gradient([&](const Tensor& p) { return loss_op(p).value; }, x, cfg);
    const Tensor& an = *out.gradient;
    require(an.same_shape(fd), "check_gradient: gradient shape mismatch");
    for (std::size_t i = 0; i < fd.size(); ++i) {
        const double a = an[i], n = fd[i];
        if (std::abs(a) <= cfg.abs_floor && std::abs(n) <= cfg.abs_floor) continue;
        const double rel = std::abs(a - n) / std::max(std::abs(a), std::abs(n));
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.pass = report.max_rel_error <= cfg.tolerance;
    return report;
}

}  // namespace seploss

#endif
