#ifndef SEPLOSS_DEEP_FEATURE_HPP
#define SEPLOSS_DEEP_FEATURE_HPP

#include <vector>

#include "seploss/losses_spec.hpp"
#include "seploss/nn.hpp"

namespace seploss {

// Fixed-seed stand-in for a pretrained audio embedding: three stride-2 conv
// layers of widths 8/16/32 with tanh. Layer 0 is the identity (the input
// itself); layers 1..3 are the conv outputs.
struct EmbeddingNet {
    std::vector<Conv2d> convs;

    explicit EmbeddingNet(std::uint64_t seed = 0x5EED) {
        Rng rng(seed);
        convs.emplace_back("embed.conv1", 1, 8, 3, 2, 1, rng);
        convs.emplace_back("embed.conv2", 8, 16, 3, 2, 1, rng);
        convs.emplace_back("embed.conv3", 16, 32, 3, 2, 1, rng);
    }

    std::size_t num_layers() const { return convs.size(); }

    // activations[j]: {C_j, H_j, W_j}; activations[0] is the {1,H,W} input.
    std::vector<Tensor> forward(const Tensor& input_hw) const {
        require(input_hw.rank() == 2, "EmbeddingNet: want a {H,W} input");
        Tensor x({1, input_hw.dim(0), input_hw.dim(1)});
        x.data = input_hw.data;
        std::vector<Tensor> acts;
        acts.push_back(std::move(x));
        for (const Conv2d& conv : convs) acts.push_back(tanh_forward(conv.forward(acts.back())));
        return acts;
    }

    // Propagates a gradient at activation `layer` back to the {H,W} input.
    Tensor backward_to_input(const std::vector<Tensor>& acts, std::size_t layer,
                             Tensor grad) const {
        require(layer < acts.size(), "EmbeddingNet: layer index out of range");
        for (std::size_t j = layer; j > 0; --j) {
            grad = tanh_backward(acts[j], grad);
            grad = convs[j - 1].input_gradient(acts[j - 1], grad);
        }
        Tensor out({acts[0].dim(1), acts[0].dim(2)});
        out.data = grad.data;
        return out;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (Conv2d& c : convs) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        return out;
    }
    std::vector<const Param*> params() const {
        std::vector<const Param*> out;
        for (const Conv2d& c : convs) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        return out;
    }
};

namespace detail {

inline Tensor mag_slice(const Tensor& mag, std::size_t k) {
    Tensor out({mag.dim(0), mag.dim(1)});
    const std::size_t K = mag.dim(2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mag[i * K + k];
    return out;
}

inline void add_slice(Tensor& grad, std::size_t k, const Tensor& slice) {
    const std::size_t K = grad.dim(2);
    for (std::size_t i = 0; i < slice.size(); ++i) grad[i * K + k] += slice[i];
}

}  // namespace detail

// Normalized squared embedding distance at one layer, differentiated back
// through the net to the estimate magnitudes.
inline LossOutput feature_loss(const Tensor& estimate_mag, const Tensor& target_mag,
                               const EmbeddingNet& net, std::size_t layer) {
    detail::require_magnitudes(estimate_mag, target_mag, "feature_loss");
    require(layer <= net.num_layers(), "feature_loss: layer index out of range");

    const std::size_t K = estimate_mag.dim(2);
    Tensor grad = Tensor::zeros_like(estimate_mag);
    double value = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const std::vector<Tensor> est_acts = net.forward(detail::mag_slice(estimate_mag, k));
        const std::vector<Tensor> tgt_acts = net.forward(detail::mag_slice(target_mag, k));
        const Tensor& fe = est_acts[layer];
        const Tensor& ft = tgt_acts[layer];
        const double norm = 1.0 / (static_cast<double>(fe.size()) * static_cast<double>(K));
        Tensor glayer = Tensor::zeros_like(fe);
        for (std::size_t i = 0; i < fe.size(); ++i) {
            const double d = fe[i] - ft[i];
            value += d * d * norm;
            glayer[i] = 2.0 * d * norm;
        }
        detail::add_slice(grad, k, net.backward_to_input(est_acts, layer, std::move(glayer)));
    }
    return {value, std::move(grad)};
}

// G = psi psi^T / (C H W), psi the {C, H*W} reshape of the embedding.
inline Tensor gram(const Tensor& embedding) {
    require(embedding.rank() == 3 && embedding.size() > 0, "gram: want a nonempty {C,H,W} tensor");
    const std::size_t C = embedding.dim(0);
    const std::size_t hw = embedding.dim(1) * embedding.dim(2);
    const double norm = 1.0 / static_cast<double>(C * hw);
    Tensor g({C, C});
    for (std::size_t a = 0; a < C; ++a)
        for (std::size_t b = a; b < C; ++b) {
            double acc = 0.0;
            const double* pa = &embedding.data[a * hw];
            const double* pb = &embedding.data[b * hw];
            for (std::size_t i = 0; i < hw; ++i) acc += pa[i] * pb[i];
            g.at(a, b) = acc * norm;
            g.at(b, a) = acc * norm;
        }
    return g;
}

// Squared Frobenius distance between gram matrices, summed over sources.
inline LossOutput style_loss(const Tensor& estimate_mag, const Tensor& target_mag,
                             const EmbeddingNet& net, std::size_t layer) {
    detail::require_magnitudes(estimate_mag, target_mag, "style_loss");
    require(layer <= net.num_layers(), "style_loss: layer index out of range");

    const std::size_t K = estimate_mag.dim(2);
    Tensor grad = Tensor::zeros_like(estimate_mag);
    double value = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const std::vector<Tensor> est_acts = net.forward(detail::mag_slice(estimate_mag, k));
        const std::vector<Tensor> tgt_acts = net.forward(detail::mag_slice(target_mag, k));
        const Tensor ge = gram(est_acts[layer]);
        const Tensor gt = gram(tgt_acts[layer]);
        const std::size_t C = ge.dim(0);
        const std::size_t hw = est_acts[layer].dim(1) * est_acts[layer].dim(2);
        Tensor delta({C, C});
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] = ge[i] - gt[i];
            value += delta[i] * delta[i];
        }
        // dL/dpsi = 4/(C H W) * delta * psi  (delta symmetric)
        const double norm = 4.0 / static_cast<double>(C * hw);
        Tensor glayer = Tensor::zeros_like(est_acts[layer]);
        for (std::size_t a = 0; a < C; ++a)
            for (std::size_t b = 0; b < C; ++b) {
                const double d = delta.at(a, b) * norm;
                if (d == 0.0) continue;
                const double* psi = &est_acts[layer].data[b * hw];
                double* out = &glayer.data[a * hw];
                for (std::size_t i = 0; i < hw; ++i) out[i] += d * psi[i];
            }
        detail::add_slice(grad, k, net.backward_to_input(est_acts, layer, std::move(glayer)));
    }
    return {value, std::move(grad)};
}

// L2_freq + delta * L_feat + lambda * L_sty.
inline LossOutput deep_feature_loss(const Tensor& estimate_mag, const Tensor& target_mag,
                                    const EmbeddingNet& net, std::size_t layer,
                                    double delta = 0.5, double lambda = 10.0 / 3.0) {
    LossOutput l2 = lp_freq(2, estimate_mag, target_mag);
    LossOutput feat = feature_loss(estimate_mag, target_mag, net, layer);
    LossOutput sty = style_loss(estimate_mag, target_mag, net, layer);

    LossOutput out;
    out.value = l2.value + delta * feat.value + lambda * sty.value;
    Tensor grad = *l2.gradient;
    for (std::size_t i = 0; i < grad.size(); ++i)
        grad[i] += delta * (*feat.gradient)[i] + lambda * (*sty.gradient)[i];
    out.gradient = std::move(grad);
    return out;
}

}  // namespace seploss

#endif
