#ifndef SEPLOSS_MASKS_HPP
#define SEPLOSS_MASKS_HPP

#include "seploss/common.hpp"

namespace seploss {

// Ratio masks M[n,w,k] = |Y_k| / sum_k |Y_k|. Bins whose total magnitude is
// at or below eps_mask get the uniform mask 1/K, keeping every bin on the
// K-simplex.
inline Tensor ratio_masks(const Tensor& source_mags) {
    require(source_mags.rank() == 3, "ratio_masks: want {frames, bins, K}");
    const std::size_t cells = source_mags.dim(0) * source_mags.dim(1);
    const std::size_t K = source_mags.dim(2);
    require(K >= 1, "ratio_masks: K must be >= 1");

    Tensor masks({source_mags.dim(0), source_mags.dim(1), K});
    for (std::size_t i = 0; i < cells; ++i) {
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double m = source_mags[i * K + k];
            require(m >= 0.0 && std::isfinite(m), "ratio_masks: magnitudes must be nonnegative");
            total += m;
        }
        if (total > kEpsMask) {
            for (std::size_t k = 0; k < K; ++k)
                masks[i * K + k] = source_mags[i * K + k] / total;
        } else {
            const double u = 1.0 / static_cast<double>(K);
            for (std::size_t k = 0; k < K; ++k) masks[i * K + k] = u;
        }
    }
    return masks;
}

// |Y_k| = M_k * |X| elementwise; mixture_mag has shape {frames, bins}.
inline Tensor apply_mask(const Tensor& masks, const Tensor& mixture_mag) {
    require(masks.rank() == 3, "apply_mask: masks want {frames, bins, K}");
    require(mixture_mag.rank() == 2 && mixture_mag.dim(0) == masks.dim(0) &&
                mixture_mag.dim(1) == masks.dim(1),
            "apply_mask: shape mismatch");
    const std::size_t cells = masks.dim(0) * masks.dim(1);
    const std::size_t K = masks.dim(2);
    Tensor out({masks.dim(0), masks.dim(1), K});
    for (std::size_t i = 0; i < cells; ++i)
        for (std::size_t k = 0; k < K; ++k) out[i * K + k] = masks[i * K + k] * mixture_mag[i];
    return out;
}

}  // namespace seploss

#endif
