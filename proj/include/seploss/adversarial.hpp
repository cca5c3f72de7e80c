#ifndef SEPLOSS_ADVERSARIAL_HPP
#define SEPLOSS_ADVERSARIAL_HPP

#include <vector>

#include "seploss/deep_feature.hpp"
#include "seploss/losses_spec.hpp"
#include "seploss/nn.hpp"

namespace seploss {

// Least-squares GAN arithmetic with smoothed labels 0.9/0.1 and the 1/4
// factor on each discriminator term.
struct AdvConfig {
    double gamma = 0.5;
    double real_label = 0.9;
    double fake_label = 0.1;
    double quarter_scale = 0.25;
};

// Paired mixture/targets share frame counts; the unpaired pools do not have
// to line up with them or with each other.
struct AdvBatch {
    Tensor paired_mixture;    // {N, Omega}
    Tensor unpaired_mixture;  // {N', Omega}
    Tensor paired_targets;    // {N, Omega, K}
    Tensor unpaired_targets;  // {N'', Omega, K}

    std::size_t num_sources() const { return paired_targets.dim(2); }

    void validate() const {
        require(paired_mixture.rank() == 2 && unpaired_mixture.rank() == 2,
                "AdvBatch: mixtures want {frames, bins}");
        require(paired_targets.rank() == 3 && unpaired_targets.rank() == 3,
                "AdvBatch: targets want {frames, bins, K}");
        require(paired_targets.dim(0) == paired_mixture.dim(0) &&
                    paired_targets.dim(1) == paired_mixture.dim(1),
                "AdvBatch: paired tensors disagree on shape");
        require(unpaired_mixture.dim(1) == paired_mixture.dim(1) &&
                    unpaired_targets.dim(1) == paired_mixture.dim(1),
                "AdvBatch: bin counts disagree");
        require(unpaired_targets.dim(2) == paired_targets.dim(2),
                "AdvBatch: source counts disagree");
    }
};

// Small convolutional scorer: four stride-2 conv layers (16/32/64/128) with
// tanh, global average pooling, then a two-layer head to a raw scalar score.
struct Discriminator {
    std::vector<Conv2d> convs;
    Dense fc1, fc2;

    explicit Discriminator(std::uint64_t seed)
        : convs(), fc1(make_fc1(seed)), fc2(make_fc2(seed)) {
        Rng rng(seed);
        convs.emplace_back("disc.conv1", 1, 16, 4, 2, 1, rng);
        convs.emplace_back("disc.conv2", 16, 32, 4, 2, 1, rng);
        convs.emplace_back("disc.conv3", 32, 64, 4, 2, 1, rng);
        convs.emplace_back("disc.conv4", 64, 128, 4, 2, 1, rng);
    }

    struct Trace {
        std::vector<Tensor> acts;      // acts[0] input {1,H,W}, then post-tanh conv outputs
        std::vector<double> pooled;    // GAP over the last conv map
        std::vector<double> h1;        // post-tanh fc1
        double score = 0.0;
    };

    Trace forward(const Tensor& mag_hw) const {
        require(mag_hw.rank() == 2, "Discriminator: want a {frames, bins} magnitude");
        Trace tr;
        Tensor x({1, mag_hw.dim(0), mag_hw.dim(1)});
        x.data = mag_hw.data;
        tr.acts.push_back(std::move(x));
        for (const Conv2d& conv : convs)
            tr.acts.push_back(tanh_forward(conv.forward(tr.acts.back())));

        const Tensor& last = tr.acts.back();
        const std::size_t C = last.dim(0), hw = last.dim(1) * last.dim(2);
        tr.pooled.assign(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += last.data[c * hw + i];
            tr.pooled[c] = acc / static_cast<double>(hw);
        }
        std::vector<double> pre = fc1.forward(tr.pooled);
        tr.h1.resize(pre.size());
        for (std::size_t i = 0; i < pre.size(); ++i) tr.h1[i] = std::tanh(pre[i]);
        tr.score = fc2.forward(tr.h1)[0];
        return tr;
    }

    double score(const Tensor& mag_hw) const { return forward(mag_hw).score; }

    // Backward from d(loss)/d(score). Returns the {frames, bins} input
    // gradient when requested, an empty tensor otherwise.
    Tensor backward(const Trace& tr, double gscore, bool accumulate_param_grads,
                    bool want_input_grad) {
        std::vector<double> gh1 = fc2.backward(tr.h1, {gscore}, accumulate_param_grads);
        for (std::size_t i = 0; i < gh1.size(); ++i) gh1[i] *= 1.0 - tr.h1[i] * tr.h1[i];
        std::vector<double> gpooled = fc1.backward(tr.pooled, gh1, accumulate_param_grads);

        const Tensor& last = tr.acts.back();
        const std::size_t C = last.dim(0), hw = last.dim(1) * last.dim(2);
        Tensor g = Tensor::zeros_like(last);
        for (std::size_t c = 0; c < C; ++c) {
            const double spread = gpooled[c] / static_cast<double>(hw);
            for (std::size_t i = 0; i < hw; ++i) g.data[c * hw + i] = spread;
        }
        for (std::size_t j = convs.size(); j > 0; --j) {
            g = tanh_backward(tr.acts[j], g);
            const bool want = want_input_grad || j > 1;
            g = convs[j - 1].backward(tr.acts[j - 1], g, accumulate_param_grads, want);
        }
        if (!want_input_grad) return Tensor();
        Tensor out({tr.acts[0].dim(1), tr.acts[0].dim(2)});
        out.data = g.data;
        return out;
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (Conv2d& c : convs) {
            out.push_back(&c.weight);
            out.push_back(&c.bias);
        }
        out.push_back(&fc1.weight);
        out.push_back(&fc1.bias);
        out.push_back(&fc2.weight);
        out.push_back(&fc2.bias);
        return out;
    }

  private:
    static Dense make_fc1(std::uint64_t seed) {
        Rng rng(seed ^ 0xF1);
        return Dense("disc.fc1", 128, 32, rng);
    }
    static Dense make_fc2(std::uint64_t seed) {
        Rng rng(seed ^ 0xF2);
        return Dense("disc.fc2", 32, 1, rng);
    }
};

// L_k = 1/4 [(d_ru-0.9)^2 + (d_rp-0.9)^2 + (d_fu-0.1)^2 + (d_fp-0.1)^2].
// Gradient is with respect to the four scores, in that order.
inline LossOutput discriminator_loss(double d_real_unpair, double d_real_pair, double d_fake_unpair,
                                     double d_fake_pair, const AdvConfig& cfg = {}) {
    const double scores[4] = {d_real_unpair, d_real_pair, d_fake_unpair, d_fake_pair};
    const double labels[4] = {cfg.real_label, cfg.real_label, cfg.fake_label, cfg.fake_label};
    for (double s : scores)
        require(std::isfinite(s), "discriminator_loss: non-finite score");

    Tensor grad({4});
    double value = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double d = scores[i] - labels[i];
        value += cfg.quarter_scale * d * d;
        grad[i] = 2.0 * cfg.quarter_scale * d;
    }
    return {value, std::move(grad)};
}

// L_sep = (1/K) sum_k (d_pair_k - 0.9)^2 + (d_unpair_k - 0.9)^2 and
// L_adv = L2_freq + gamma * L_sep. The returned gradient is with respect to
// the 2K scores as {2, K} (row 0 paired, row 1 unpaired); the L2 component's
// own gradient passes through the caller unchanged.
inline LossOutput separator_adv_loss(const std::vector<double>& d_on_paired_sep,
                                     const std::vector<double>& d_on_unpaired_sep,
                                     const LossOutput& l2_freq_value, const AdvConfig& cfg = {}) {
    require(!d_on_paired_sep.empty() && d_on_paired_sep.size() == d_on_unpaired_sep.size(),
            "separator_adv_loss: per-source score lists disagree");
    const std::size_t K = d_on_paired_sep.size();
    for (std::size_t k = 0; k < K; ++k)
        require(std::isfinite(d_on_paired_sep[k]) && std::isfinite(d_on_unpaired_sep[k]),
                "separator_adv_loss: non-finite score");

    Tensor grad({2, K});
    double sep = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double dp = d_on_paired_sep[k] - cfg.real_label;
        const double du = d_on_unpaired_sep[k] - cfg.real_label;
        sep += (dp * dp + du * du) / static_cast<double>(K);
        grad.at(0, k) = cfg.gamma * 2.0 * dp / static_cast<double>(K);
        grad.at(1, k) = cfg.gamma * 2.0 * du / static_cast<double>(K);
    }
    LossOutput out;
    out.value = l2_freq_value.value + cfg.gamma * sep;
    out.degenerate = l2_freq_value.degenerate;
    out.note = l2_freq_value.note;
    out.gradient = std::move(grad);
    return out;
}

// One adversarial iteration: each discriminator takes an L_k step with the
// separator frozen, then the separator takes an L_adv step with the
// discriminators frozen. Separator must expose forward_estimates /
// accumulate_estimate_gradient / params / pretrained.
template <typename Separator>
class AdversarialTrainer {
  public:
    AdversarialTrainer(Separator& separator, std::vector<Discriminator>& discriminators,
                       const AdvConfig& config = {}, double separator_lr = 1e-3,
                       double discriminator_lr = 1e-3, bool allow_unpretrained = false)
        : sep_(separator), discs_(discriminators), cfg_(config), disc_opts_(discriminators.size()) {
        if (!separator.pretrained && !allow_unpretrained)
            throw std::invalid_argument(
                "AdversarialTrainer: separator checkpoint is not marked pre-trained "
                "(pre-train with an L2 loss first, or pass allow_unpretrained)");
        sep_opt_.lr = separator_lr;
        for (Adam& opt : disc_opts_) opt.lr = discriminator_lr;
    }

    struct StepResult {
        std::vector<LossOutput> discriminator_losses;  // L_k per source
        LossOutput adv_loss;                           // L_adv = L2 + gamma L_sep
        double l2_freq_value = 0.0;
        double sep_value = 0.0;
    };

    StepResult step(const AdvBatch& batch) {
        batch.validate();
        const std::size_t K = batch.num_sources();
        require(discs_.size() == K, "AdversarialTrainer: need one discriminator per source");

        StepResult result;

        // discriminator updates, separator frozen
        const Tensor est_pair = sep_.forward_estimates(batch.paired_mixture);
        const Tensor est_unpair = sep_.forward_estimates(batch.unpaired_mixture);
        for (std::size_t k = 0; k < K; ++k) {
            auto t_ru = discs_[k].forward(detail::mag_slice(batch.unpaired_targets, k));
            auto t_rp = discs_[k].forward(detail::mag_slice(batch.paired_targets, k));
            auto t_fu = discs_[k].forward(detail::mag_slice(est_unpair, k));
            auto t_fp = discs_[k].forward(detail::mag_slice(est_pair, k));
            LossOutput lk =
                discriminator_loss(t_ru.score, t_rp.score, t_fu.score, t_fp.score, cfg_);
            zero_grads(discs_[k].params());
            discs_[k].backward(t_ru, (*lk.gradient)[0], true, false);
            discs_[k].backward(t_rp, (*lk.gradient)[1], true, false);
            discs_[k].backward(t_fu, (*lk.gradient)[2], true, false);
            discs_[k].backward(t_fp, (*lk.gradient)[3], true, false);
            disc_opts_[k].step(discs_[k].params());
            result.discriminator_losses.push_back(std::move(lk));
        }

        // separator update against the freshly updated discriminators
        LossOutput l2 = lp_freq(2, est_pair, batch.paired_targets);
        std::vector<double> d_pair(K), d_unpair(K);
        Tensor grad_pair = *l2.gradient;
        Tensor grad_unpair({batch.unpaired_mixture.dim(0), batch.unpaired_mixture.dim(1), K});
        for (std::size_t k = 0; k < K; ++k) {
            auto t_fp = discs_[k].forward(detail::mag_slice(est_pair, k));
            auto t_fu = discs_[k].forward(detail::mag_slice(est_unpair, k));
            d_pair[k] = t_fp.score;
            d_unpair[k] = t_fu.score;
            const double gp = cfg_.gamma * 2.0 * (t_fp.score - cfg_.real_label) /
                              static_cast<double>(K);
            const double gu = cfg_.gamma * 2.0 * (t_fu.score - cfg_.real_label) /
                              static_cast<double>(K);
            const Tensor gin_p = discs_[k].backward(t_fp, gp, false, true);
            const Tensor gin_u = discs_[k].backward(t_fu, gu, false, true);
            detail::add_slice(grad_pair, k, gin_p);
            detail::add_slice(grad_unpair, k, gin_u);
        }
        zero_grads(sep_.params());
        sep_.accumulate_estimate_gradient(batch.paired_mixture, grad_pair);
        sep_.accumulate_estimate_gradient(batch.unpaired_mixture, grad_unpair);
        sep_opt_.step(sep_.params());

        result.adv_loss = separator_adv_loss(d_pair, d_unpair, l2, cfg_);
        result.l2_freq_value = l2.value;
        result.sep_value = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double dp = d_pair[k] - cfg_.real_label;
            const double du = d_unpair[k] - cfg_.real_label;
            result.sep_value += (dp * dp + du * du) / static_cast<double>(K);
        }
        return result;
    }

  private:
    Separator& sep_;
    std::vector<Discriminator>& discs_;
    AdvConfig cfg_;
    Adam sep_opt_;
    std::vector<Adam> disc_opts_;
};

}  // namespace seploss

#endif
