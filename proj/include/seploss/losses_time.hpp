#ifndef SEPLOSS_LOSSES_TIME_HPP
#define SEPLOSS_LOSSES_TIME_HPP

#include <cmath>
#include <string>

#include "seploss/audio.hpp"
#include "seploss/loss_output.hpp"

namespace seploss {

namespace detail {

inline void require_time_loss_inputs(const MultiSourceAudio& estimate,
                                     const MultiSourceAudio& target, const std::string& who) {
    require_aligned(estimate, target, who);
    estimate.validate(who + ": estimate");  // rejects NaN/inf samples
    target.validate(who + ": target");
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

template <typename Fn>
inline void for_each_sample(const AudioBuffer& est, const AudioBuffer& tgt, Fn&& fn) {
    for (std::size_t c = 0; c < est.num_channels(); ++c)
        for (std::size_t l = 0; l < est.length(); ++l)
            fn(c, l, est.channels[c][l], tgt.channels[c][l]);
}

}  // namespace detail

// L1/L2: mean |err|^p over all samples and sources, channels flattened into
// the time axis.
inline LossOutput lp_time(int p, const MultiSourceAudio& estimate, const MultiSourceAudio& target) {
    require(p == 1 || p == 2, "lp_time: p must be 1 or 2");
    detail::require_time_loss_inputs(estimate, target, "lp_time");

    const std::size_t K = estimate.num_sources();
    const double norm = 1.0 / (static_cast<double>(estimate.flat_length()) * static_cast<double>(K));
    Tensor grad({K, estimate.num_channels(), estimate.length()});
    double value = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t c, std::size_t l, double e, double t) {
                                    const double d = e - t;
                                    if (p == 1) {
                                        value += std::abs(d);
                                        grad.at(k, c, l) = detail::sign(d) * norm;
                                    } else {
                                        value += d * d;
                                        grad.at(k, c, l) = 2.0 * d * norm;
                                    }
                                });
    }
    return {value * norm, std::move(grad)};
}

// LOGL1/LOGL2: (10/(tau K)) sum_k log10(sum_t |err|^p + eps). The paper's
// 10/(tau K) prefactor is kept literally even though the inner sum already
// runs over t.
inline LossOutput log_lp_time(int p, const MultiSourceAudio& estimate,
                              const MultiSourceAudio& target) {
    require(p == 1 || p == 2, "log_lp_time: p must be 1 or 2");
    detail::require_time_loss_inputs(estimate, target, "log_lp_time");

    const std::size_t K = estimate.num_sources();
    const double pre = 10.0 / (static_cast<double>(estimate.flat_length()) * static_cast<double>(K));
    Tensor grad({K, estimate.num_channels(), estimate.length()});
    LossOutput out;
    for (std::size_t k = 0; k < K; ++k) {
        double inner = 0.0;
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t, std::size_t, double e, double t) {
                                    const double d = e - t;
                                    inner += p == 1 ? std::abs(d) : d * d;
                                });
        out.value += pre * std::log10(inner + kEpsLog);
        if (inner <= 10.0 * kEpsLog) {
            out.degenerate = true;
            out.note = "log_lp_time: error energy at eps floor (source " + std::to_string(k) + ")";
        }
        const double chain = pre / (kLn10 * (inner + kEpsLog));
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t c, std::size_t l, double e, double t) {
                                    const double d = e - t;
                                    grad.at(k, c, l) =
                                        chain * (p == 1 ? detail::sign(d) : 2.0 * d);
                                });
    }
    out.gradient = std::move(grad);
    return out;
}

// SNR in dB scaled by 10/(tau K); the building block of SDSDR.
inline LossOutput snr(const MultiSourceAudio& estimate, const MultiSourceAudio& target) {
    detail::require_time_loss_inputs(estimate, target, "snr");

    const std::size_t K = estimate.num_sources();
    const double pre = 10.0 / (static_cast<double>(estimate.flat_length()) * static_cast<double>(K));
    Tensor grad({K, estimate.num_channels(), estimate.length()});
    LossOutput out;
    for (std::size_t k = 0; k < K; ++k) {
        double target_energy = 0.0, err_energy = 0.0;
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t, std::size_t, double e, double t) {
                                    target_energy += t * t;
                                    const double d = e - t;
                                    err_energy += d * d;
                                });
        if (target_energy <= 0.0)
            throw std::domain_error("snr: target source " + std::to_string(k) + " has zero energy");
        out.value += pre * std::log10(target_energy / (err_energy + kEpsLog));
        if (err_energy <= 10.0 * kEpsLog) {
            out.degenerate = true;
            out.note = "snr: error energy at eps floor (source " + std::to_string(k) + ")";
        }
        const double chain = -pre / (kLn10 * (err_energy + kEpsLog));
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t c, std::size_t l, double e, double t) {
                                    grad.at(k, c, l) = chain * 2.0 * (e - t);
                                });
    }
    out.gradient = std::move(grad);
    return out;
}

namespace detail {

// Shared scale-invariant SDR core. Works on per-source flattened vectors via
// the cosine form rho^2/(1-rho^2), which is algebraically the paper's
// |alpha y|^2 / |alpha y - y~|^2 and exactly invariant to estimate scaling.
struct SisdrAccum {
    double value = 0.0;
    bool degenerate = false;
    std::string note;
};

template <typename EstAt, typename TgtAt, typename GradAt>
inline void sisdr_source(std::size_t len, double prefactor, EstAt est, TgtAt tgt, GradAt grad,
                         SisdrAccum& acc, const std::string& who, std::size_t k) {
    double dot = 0.0, est_energy = 0.0, tgt_energy = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        dot += est(i) * tgt(i);
        est_energy += est(i) * est(i);
        tgt_energy += tgt(i) * tgt(i);
    }
    if (tgt_energy <= 0.0)
        throw std::domain_error(who + ": target source " + std::to_string(k) + " has zero energy");

    const double denom = est_energy * tgt_energy;
    const double s = denom > 0.0 ? (dot * dot) / denom : 0.0;  // rho^2 in [0,1]
    const double proj = s + kEpsLog;        // |alpha y|^2 share
    const double resid = 1.0 - s + kEpsLog; // residual share
    acc.value += -prefactor * std::log10(proj / resid);
    if (s <= 10.0 * kEpsLog || 1.0 - s <= 10.0 * kEpsLog) {
        acc.degenerate = true;
        acc.note = who + ": projection at eps cap (source " + std::to_string(k) + ")";
    }

    // d value / d s, then d s / d estimate
    const double dv_ds = -(prefactor / kLn10) * (1.0 / proj + 1.0 / resid);
    if (denom > 0.0) {
        const double a = 2.0 * dot / denom;
        const double b = 2.0 * dot * dot / (est_energy * denom);
        for (std::size_t i = 0; i < len; ++i) grad(i) = dv_ds * (a * tgt(i) - b * est(i));
    } else {
        for (std::size_t i = 0; i < len; ++i) grad(i) = 0.0;
    }
}

}  // namespace detail

// Scale-invariant SDR as a loss (lower is better, can go negative).
inline LossOutput sisdr_time(const MultiSourceAudio& estimate, const MultiSourceAudio& target) {
    detail::require_time_loss_inputs(estimate, target, "sisdr_time");

    const std::size_t K = estimate.num_sources();
    const std::size_t len = estimate.flat_length();
    const double pre = 10.0 / (static_cast<double>(len) * static_cast<double>(K));
    Tensor grad({K, estimate.num_channels(), estimate.length()});
    detail::SisdrAccum acc;
    const std::size_t L = estimate.length();
    for (std::size_t k = 0; k < K; ++k) {
        const AudioBuffer& e = estimate.sources[k];
        const AudioBuffer& t = target.sources[k];
        detail::sisdr_source(
            len, pre, [&](std::size_t i) { return e.channels[i / L][i % L]; },
            [&](std::size_t i) { return t.channels[i / L][i % L]; },
            [&](std::size_t i) -> double& { return grad.at(k, i / L, i % L); }, acc, "sisdr_time",
            k);
    }
    LossOutput out;
    out.value = acc.value;
    out.degenerate = acc.degenerate;
    out.note = acc.note;
    out.gradient = std::move(grad);
    return out;
}

// SDSDR = -min(SNR, L_down), L_down = SNR + (10/(tau K)) sum_k log10(alpha_k^2).
inline LossOutput sdsdr_time(const MultiSourceAudio& estimate, const MultiSourceAudio& target) {
    detail::require_time_loss_inputs(estimate, target, "sdsdr_time");

    LossOutput snr_out = snr(estimate, target);

    const std::size_t K = estimate.num_sources();
    const double pre = 10.0 / (static_cast<double>(estimate.flat_length()) * static_cast<double>(K));
    Tensor extra_grad({K, estimate.num_channels(), estimate.length()});
    double extra = 0.0;
    bool extra_degenerate = false;
    for (std::size_t k = 0; k < K; ++k) {
        double dot = 0.0, tgt_energy = 0.0;
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t, std::size_t, double e, double t) {
                                    dot += e * t;
                                    tgt_energy += t * t;
                                });
        const double alpha = dot / tgt_energy;
        extra += pre * std::log10(alpha * alpha + kEpsLog);
        if (alpha * alpha <= 10.0 * kEpsLog) extra_degenerate = true;
        const double chain =
            pre / (kLn10 * (alpha * alpha + kEpsLog)) * 2.0 * alpha / tgt_energy;
        detail::for_each_sample(estimate.sources[k], target.sources[k],
                                [&](std::size_t c, std::size_t l, double, double t) {
                                    extra_grad.at(k, c, l) = chain * t;
                                });
    }

    const double l_down = snr_out.value + extra;
    LossOutput out;
    out.degenerate = snr_out.degenerate;
    out.note = snr_out.note;
    Tensor grad = *snr_out.gradient;
    if (snr_out.value <= l_down) {
        out.value = -snr_out.value;
        for (auto& g : grad.data) g = -g;
    } else {
        out.value = -l_down;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = -(grad[i] + extra_grad[i]);
        if (extra_degenerate) {
            out.degenerate = true;
            out.note = "sdsdr_time: projection scale at eps cap";
        }
    }
    out.gradient = std::move(grad);
    return out;
}

}  // namespace seploss

#endif
