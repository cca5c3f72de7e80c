#ifndef SEPLOSS_HARNESS_HPP
#define SEPLOSS_HARNESS_HPP

#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "seploss/adversarial.hpp"
#include "seploss/registry.hpp"
#include "seploss/report.hpp"
#include "seploss/synth.hpp"

namespace seploss {

// Frame-wise mask predictor: log1p-compressed mixture magnitude frame in,
// K*Omega logits out, per-bin softmax onto the K-simplex.
struct MaskModel {
    std::size_t bins = 0;
    std::size_t num_sources = 0;
    std::size_t hidden = 0;
    Dense fc1, fc2;
    bool pretrained = false;

    MaskModel(std::size_t bins_, std::size_t num_sources_, std::size_t hidden_, std::uint64_t seed)
        : bins(bins_), num_sources(num_sources_), hidden(hidden_),
          fc1(make_fc1(bins_, hidden_, seed)), fc2(make_fc2(bins_, num_sources_, hidden_, seed)) {}

    Tensor forward_masks(const Tensor& mix_mag) const {
        require(mix_mag.rank() == 2 && mix_mag.dim(1) == bins, "MaskModel: bad mixture shape");
        const std::size_t frames = mix_mag.dim(0);
        const std::size_t K = num_sources;
        Tensor masks({frames, bins, K});
        std::vector<double> x(bins), h;
        for (std::size_t n = 0; n < frames; ++n) {
            for (std::size_t w = 0; w < bins; ++w) x[w] = std::log1p(mix_mag.at(n, w));
            h = fc1.forward(x);
            for (auto& v : h) v = std::tanh(v);
            const std::vector<double> z = fc2.forward(h);  // layout w*K + k
            for (std::size_t w = 0; w < bins; ++w) {
                double zmax = z[w * K];
                for (std::size_t k = 1; k < K; ++k) zmax = std::max(zmax, z[w * K + k]);
                double total = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double e = std::exp(z[w * K + k] - zmax);
                    masks.at(n, w, k) = e;
                    total += e;
                }
                for (std::size_t k = 0; k < K; ++k) masks.at(n, w, k) /= total;
            }
        }
        return masks;
    }

    Tensor forward_estimates(const Tensor& mix_mag) const {
        return apply_mask(forward_masks(mix_mag), mix_mag);
    }

    // dL/dmasks -> parameter gradients (recomputes the forward pass).
    void accumulate_mask_gradient(const Tensor& mix_mag, const Tensor& grad_masks) {
        require(grad_masks.rank() == 3 && grad_masks.dim(0) == mix_mag.dim(0) &&
                    grad_masks.dim(1) == bins && grad_masks.dim(2) == num_sources,
                "MaskModel: bad mask gradient shape");
        const std::size_t frames = mix_mag.dim(0);
        const std::size_t K = num_sources;
        std::vector<double> x(bins), gz(bins * K);
        for (std::size_t n = 0; n < frames; ++n) {
            for (std::size_t w = 0; w < bins; ++w) x[w] = std::log1p(mix_mag.at(n, w));
            std::vector<double> h = fc1.forward(x);
            for (auto& v : h) v = std::tanh(v);
            const std::vector<double> z = fc2.forward(h);
            for (std::size_t w = 0; w < bins; ++w) {
                double zmax = z[w * K];
                for (std::size_t k = 1; k < K; ++k) zmax = std::max(zmax, z[w * K + k]);
                double total = 0.0;
                std::vector<double> m(K);
                for (std::size_t k = 0; k < K; ++k) {
                    m[k] = std::exp(z[w * K + k] - zmax);
                    total += m[k];
                }
                double dot = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    m[k] /= total;
                    dot += grad_masks.at(n, w, k) * m[k];
                }
                for (std::size_t k = 0; k < K; ++k)
                    gz[w * K + k] = m[k] * (grad_masks.at(n, w, k) - dot);
            }
            std::vector<double> gh = fc2.backward(h, gz, true);
            for (std::size_t i = 0; i < gh.size(); ++i) gh[i] *= 1.0 - h[i] * h[i];
            fc1.backward(x, gh, true);
        }
    }

    // dL/destimates -> parameter gradients; estimates are masks * mixture.
    void accumulate_estimate_gradient(const Tensor& mix_mag, const Tensor& grad_est) {
        Tensor grad_masks = grad_est;
        const std::size_t K = num_sources;
        for (std::size_t i = 0; i < mix_mag.size(); ++i)
            for (std::size_t k = 0; k < K; ++k) grad_masks[i * K + k] *= mix_mag[i];
        accumulate_mask_gradient(mix_mag, grad_masks);
    }

    std::vector<Param*> params() { return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias}; }
    std::vector<const Param*> params() const {
        return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias};
    }

    void save(const std::string& blob_path, const std::string& manifest_path) const {
        const auto entries = write_tensor_blob(blob_path, params());
        nlohmann::json flags;
        flags["pretrained"] = pretrained;
        flags["bins"] = bins;
        flags["num_sources"] = num_sources;
        flags["hidden"] = hidden;
        write_tensor_manifest(manifest_path, entries, flags);
    }

    static MaskModel load(const std::string& blob_path, const std::string& manifest_path) {
        nlohmann::json flags;
        const auto entries = read_tensor_manifest(manifest_path, &flags);
        MaskModel model(flags.at("bins").get<std::size_t>(),
                        flags.at("num_sources").get<std::size_t>(),
                        flags.at("hidden").get<std::size_t>(), 0);
        read_tensor_blob(blob_path, entries, model.params());
        model.pretrained = flags.value("pretrained", false);
        return model;
    }

  private:
    static Dense make_fc1(std::size_t bins_, std::size_t hidden_, std::uint64_t seed) {
        Rng rng(seed ^ 0xA1);
        return Dense("mask.fc1", bins_, hidden_, rng);
    }
    static Dense make_fc2(std::size_t bins_, std::size_t K, std::size_t hidden_,
                          std::uint64_t seed) {
        Rng rng(seed ^ 0xA2);
        return Dense("mask.fc2", hidden_, K * bins_, rng);
    }
};

struct TrainItem {
    AudioBuffer mixture;
    MultiSourceAudio sources;
};

struct Dataset {
    std::vector<TrainItem> train, val, test;
};

// Per-split items drawn from the same recipes with per-item seeds.
inline Dataset make_dataset(const SynthSpec& base, std::size_t n_train, std::size_t n_val,
                            std::size_t n_test) {
    Dataset data;
    std::size_t index = 0;
    const auto emit = [&](std::vector<TrainItem>& split, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            SynthSpec spec = base;
            spec.seed = base.seed + 0x1000 * (++index);
            auto [mixture, sources] = synthesize(spec);
            split.push_back({std::move(mixture), std::move(sources)});
        }
    };
    emit(data.train, n_train);
    emit(data.val, n_val);
    emit(data.test, n_test);
    return data;
}

// Precomputed per-item tensors every training loss draws from.
struct TrainContext {
    ComplexSpectrogram mix_spec;
    Tensor mix_mag;                           // {N, Omega}
    Tensor ref_mags;                          // {N, Omega, K}
    Tensor oracle_masks;                      // {N, Omega, K}
    Tensor psa_vals;                          // {N, Omega, K}

    TrainContext(const TrainItem& item, const StftConfig& cfg) {
        mix_spec = stft(item.mixture, cfg);
        Tensor full = magnitude(mix_spec);
        mix_mag = std::move(full);
        const std::vector<ComplexSpectrogram> ref_specs = stft_sources(item.sources, cfg);
        ref_mags = magnitudes(ref_specs);
        oracle_masks = ratio_masks(ref_mags);
        psa_vals = psa_target(ref_specs, mix_spec);
    }
};

struct MaskLossResult {
    double value = 0.0;
    Tensor grad_masks;
};

using TrainingLoss =
    std::function<MaskLossResult(const Tensor& masks, const TrainContext&, const TrainItem&)>;

struct TrainConfig {
    std::string loss = "l2_freq";
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int patience_epochs = 80;
    double decay_factor = 0.3;
    int max_epochs = 100;
    int batch_size = 1;  // items per optimizer step
    std::uint64_t seed = 0;
    std::size_t hidden = 48;
    StftConfig stft{512, 512, 256, WindowKind::hann, true};

    // per-loss knobs
    DissimConfig dissim;
    MrsConfig mrs = MrsConfig::defaults();
    std::uint64_t embed_seed = 0x5EED;
    std::size_t embed_layer = 2;
    double deep_delta = 0.5;
    double deep_lambda = 10.0 / 3.0;
    AdvConfig adv;
    double discriminator_lr = 1e-3;
    int adv_pretrain_epochs = 20;
    std::uint64_t discriminator_seed = 0xD15C;

    void validate() const {
        require(learning_rate >= 0.0, "TrainConfig: negative learning rate");
        require(patience_epochs > 0, "TrainConfig: patience must be positive");
        require(decay_factor > 0.0 && decay_factor <= 1.0, "TrainConfig: bad decay factor");
        require(max_epochs >= 1 && batch_size >= 1, "TrainConfig: bad epochs or batch size");
        stft.validate();
        mrs.validate();
        dissim.validate();
    }
};

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.loss = j.value("loss", cfg.loss);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
    cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
    cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
    cfg.patience_epochs = j.value("patience_epochs", cfg.patience_epochs);
    cfg.decay_factor = j.value("decay_factor", cfg.decay_factor);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.hidden = j.value("hidden", cfg.hidden);
    if (j.contains("stft")) {
        const auto& s = j.at("stft");
        cfg.stft.fft_size = s.value("fft_size", cfg.stft.fft_size);
        cfg.stft.window_length = s.value("window_length", cfg.stft.window_length);
        cfg.stft.hop = s.value("hop", cfg.stft.hop);
        cfg.stft.window_kind =
            s.value("window", std::string("hann")) == "rectangular" ? WindowKind::rectangular
                                                                    : WindowKind::hann;
        cfg.stft.center_pad = s.value("center_pad", cfg.stft.center_pad);
    }
    cfg.dissim.beta = j.value("dissim_beta", cfg.dissim.beta);
    if (j.contains("mrs_resolutions")) {
        cfg.mrs.resolutions.clear();
        for (const auto& r : j.at("mrs_resolutions")) {
            StftConfig res{r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>(),
                           r.at(2).get<std::size_t>(), WindowKind::hann, true};
            cfg.mrs.resolutions.push_back(res);
        }
    }
    cfg.embed_seed = j.value("embed_seed", cfg.embed_seed);
    cfg.embed_layer = j.value("embed_layer", cfg.embed_layer);
    cfg.deep_delta = j.value("deep_delta", cfg.deep_delta);
    cfg.deep_lambda = j.value("deep_lambda", cfg.deep_lambda);
    cfg.adv.gamma = j.value("adv_gamma", cfg.adv.gamma);
    cfg.discriminator_lr = j.value("discriminator_lr", cfg.discriminator_lr);
    cfg.adv_pretrain_epochs = j.value("adv_pretrain_epochs", cfg.adv_pretrain_epochs);
    cfg.validate();
    return cfg;
}

namespace detail {

// grad wrt estimate magnitudes -> grad wrt masks (estimates = masks * |X|)
inline Tensor chain_through_mixture(const Tensor& grad_est, const Tensor& mix_mag) {
    Tensor grad_masks = grad_est;
    const std::size_t K = grad_est.dim(2);
    for (std::size_t i = 0; i < mix_mag.size(); ++i)
        for (std::size_t k = 0; k < K; ++k) grad_masks[i * K + k] *= mix_mag[i];
    return grad_masks;
}

// reconstruct per-source waveforms from masked magnitudes + mixture phase
inline MultiSourceAudio reconstruct_sources(const Tensor& est_mag, const TrainContext& ctx) {
    const std::size_t K = est_mag.dim(2);
    MultiSourceAudio out;
    for (std::size_t k = 0; k < K; ++k) {
        Tensor slice({est_mag.dim(0), est_mag.dim(1)});
        for (std::size_t i = 0; i < slice.size(); ++i) slice[i] = est_mag[i * K + k];
        out.sources.push_back(istft_mag_phase(slice, ctx.mix_spec));
    }
    return out;
}

// grad wrt waveforms {K,C,L} -> grad wrt estimate magnitudes {N,Omega,K}
inline Tensor waveform_grad_to_mag(const Tensor& grad_wave, const TrainContext& ctx) {
    const std::size_t K = grad_wave.dim(0);
    Tensor grad_mag({ctx.mix_mag.dim(0), ctx.mix_mag.dim(1), K});
    for (std::size_t k = 0; k < K; ++k) {
        Tensor gw({grad_wave.dim(1), grad_wave.dim(2)});
        for (std::size_t i = 0; i < gw.size(); ++i) gw[i] = grad_wave.data[k * gw.size() + i];
        const Tensor gm = istft_mag_phase_vjp(ctx.mix_spec, gw);
        for (std::size_t i = 0; i < gm.size(); ++i) grad_mag[i * K + k] = gm[i];
    }
    return grad_mag;
}

}  // namespace detail

// Trainable losses of the benchmark; "adversarial" runs through the
// dedicated two-phase path in train() rather than this registry.
inline const std::vector<std::string>& trainable_loss_names() {
    static const std::vector<std::string> names = {
        "l1_time",  "l2_time",  "logl1_time", "logl2_time", "sisdr_time", "sdsdr_time",
        "l1_freq",  "l2_freq",  "logl1_freq", "logl2_freq", "sisdr_freq", "psa",
        "dissim",   "mrs",      "l1_mask",    "l2_mask",    "combination", "deep_feature",
        "adversarial"};
    return names;
}

inline TrainingLoss make_training_loss(const TrainConfig& cfg) {
    const std::string& name = cfg.loss;

    const auto spec_loss = [](auto loss_fn) {
        return [loss_fn](const Tensor& masks, const TrainContext& ctx,
                         const TrainItem&) -> MaskLossResult {
            const Tensor est_mag = apply_mask(masks, ctx.mix_mag);
            LossOutput out = loss_fn(est_mag, ctx);
            return {out.value, detail::chain_through_mixture(*out.gradient, ctx.mix_mag)};
        };
    };
    const auto time_loss = [](auto loss_fn) {
        return [loss_fn](const Tensor& masks, const TrainContext& ctx,
                         const TrainItem& item) -> MaskLossResult {
            const Tensor est_mag = apply_mask(masks, ctx.mix_mag);
            const MultiSourceAudio est = detail::reconstruct_sources(est_mag, ctx);
            LossOutput out = loss_fn(est, item.sources);
            const Tensor grad_mag = detail::waveform_grad_to_mag(*out.gradient, ctx);
            return {out.value, detail::chain_through_mixture(grad_mag, ctx.mix_mag)};
        };
    };

    if (name == "l1_time")
        return time_loss([](const auto& e, const auto& t) { return lp_time(1, e, t); });
    if (name == "l2_time")
        return time_loss([](const auto& e, const auto& t) { return lp_time(2, e, t); });
    if (name == "logl1_time")
        return time_loss([](const auto& e, const auto& t) { return log_lp_time(1, e, t); });
    if (name == "logl2_time")
        return time_loss([](const auto& e, const auto& t) { return log_lp_time(2, e, t); });
    if (name == "sisdr_time")
        return time_loss([](const auto& e, const auto& t) { return sisdr_time(e, t); });
    if (name == "sdsdr_time")
        return time_loss([](const auto& e, const auto& t) { return sdsdr_time(e, t); });
    if (name == "mrs") {
        const MrsConfig mrs = cfg.mrs;
        return time_loss(
            [mrs](const auto& e, const auto& t) { return mrs_loss(e, t, mrs); });
    }
    if (name == "l1_freq")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return lp_freq(1, e, c.ref_mags);
        });
    if (name == "l2_freq")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return lp_freq(2, e, c.ref_mags);
        });
    if (name == "logl1_freq")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return log_lp_freq(1, e, c.ref_mags);
        });
    if (name == "logl2_freq")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return log_lp_freq(2, e, c.ref_mags);
        });
    if (name == "sisdr_freq")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return sisdr_freq(e, c.ref_mags);
        });
    if (name == "psa")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return psa_loss(e, c.psa_vals);
        });
    if (name == "dissim") {
        const DissimConfig dc = cfg.dissim;
        return spec_loss([dc](const Tensor& e, const TrainContext& c) {
            return dissim_loss(e, c.ref_mags, dc);
        });
    }
    if (name == "combination")
        return spec_loss([](const Tensor& e, const TrainContext& c) {
            return combination_loss(e, c.ref_mags);
        });
    if (name == "deep_feature") {
        auto net = std::make_shared<EmbeddingNet>(cfg.embed_seed);
        const std::size_t layer = cfg.embed_layer;
        const double delta = cfg.deep_delta, lambda = cfg.deep_lambda;
        return spec_loss([net, layer, delta, lambda](const Tensor& e, const TrainContext& c) {
            return deep_feature_loss(e, c.ref_mags, *net, layer, delta, lambda);
        });
    }
    if (name == "l1_mask" || name == "l2_mask") {
        const int p = name == "l1_mask" ? 1 : 2;
        return [p](const Tensor& masks, const TrainContext& ctx,
                   const TrainItem&) -> MaskLossResult {
            LossOutput out = mask_lp(p, masks, ctx.oracle_masks);
            return {out.value, std::move(*out.gradient)};
        };
    }
    throw std::invalid_argument("unknown training loss: " + name);
}

struct TraceRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    MaskModel model;
    std::vector<TraceRow> trace;
    double best_val = 0.0;
    int best_epoch = 0;
};

struct TrainingDiverged : std::runtime_error {
    std::vector<TraceRow> trace;
    explicit TrainingDiverged(std::vector<TraceRow> t)
        : std::runtime_error("training diverged: non-finite loss"), trace(std::move(t)) {}
};

namespace detail {

inline std::vector<double> snapshot(const std::vector<Param*>& params) {
    std::vector<double> out;
    for (const Param* p : params) out.insert(out.end(), p->value.data.begin(), p->value.data.end());
    return out;
}

inline void restore(const std::vector<Param*>& params, const std::vector<double>& snap) {
    std::size_t i = 0;
    for (Param* p : params)
        for (double& v : p->value.data) v = snap[i++];
}

}  // namespace detail

// Deterministic full run: Adam, x0.3 LR decay after `patience_epochs`
// without validation improvement, best-validation checkpoint returned.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    require(!data.train.empty() && !data.val.empty(), "train: need train and val items");
    const std::size_t K = data.train[0].sources.num_sources();
    const std::size_t bins = cfg.stft.bins();

    std::vector<TrainContext> train_ctx, val_ctx;
    for (const auto& item : data.train) train_ctx.emplace_back(item, cfg.stft);
    for (const auto& item : data.val) val_ctx.emplace_back(item, cfg.stft);

    MaskModel model(bins, K, cfg.hidden, cfg.seed);

    const bool adversarial = cfg.loss == "adversarial";
    TrainConfig eff = cfg;
    if (adversarial) eff.loss = "l2_freq";  // pre-training objective and validation loss
    const TrainingLoss loss = make_training_loss(eff);

    Adam opt;
    opt.lr = cfg.learning_rate;
    opt.beta1 = cfg.adam_beta1;
    opt.beta2 = cfg.adam_beta2;
    opt.eps = cfg.adam_eps;

    const auto eval_split = [&](const std::vector<TrainContext>& ctxs,
                                const std::vector<TrainItem>& items) {
        double acc = 0.0;
        for (std::size_t i = 0; i < ctxs.size(); ++i) {
            const Tensor masks = model.forward_masks(ctxs[i].mix_mag);
            acc += loss(masks, ctxs[i], items[i]).value;
        }
        return acc / static_cast<double>(ctxs.size());
    };

    TrainResult result{MaskModel(bins, K, cfg.hidden, cfg.seed), {}, 0.0, 0};
    std::vector<double> best_params = detail::snapshot(model.params());
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int stale_epochs = 0;
    double lr = cfg.learning_rate;

    // adversarial path: L2 pre-training epochs, then GAN iterations
    std::vector<Discriminator> discs;
    std::unique_ptr<AdversarialTrainer<MaskModel>> gan;
    const int pretrain_epochs = adversarial ? std::min(cfg.adv_pretrain_epochs, cfg.max_epochs) : 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        opt.lr = lr;
        double train_loss = 0.0;

        const bool gan_phase = adversarial && epoch > pretrain_epochs;
        if (gan_phase && gan == nullptr) {
            model.pretrained = true;
            for (std::size_t k = 0; k < K; ++k)
                discs.emplace_back(cfg.discriminator_seed + 31 * k);
            gan = std::make_unique<AdversarialTrainer<MaskModel>>(
                model, discs, cfg.adv, lr, cfg.discriminator_lr);
        }

        if (!gan_phase) {
            std::size_t item = 0;
            while (item < train_ctx.size()) {
                zero_grads(model.params());
                double batch_loss = 0.0;
                std::size_t in_batch = 0;
                for (; item < train_ctx.size() && in_batch < static_cast<std::size_t>(cfg.batch_size);
                     ++item, ++in_batch) {
                    const Tensor masks = model.forward_masks(train_ctx[item].mix_mag);
                    MaskLossResult r = loss(masks, train_ctx[item], data.train[item]);
                    batch_loss += r.value;
                    model.accumulate_mask_gradient(train_ctx[item].mix_mag, r.grad_masks);
                }
                opt.step(model.params());
                train_loss += batch_loss;
            }
            train_loss /= static_cast<double>(train_ctx.size());
        } else {
            // unpaired pools come from neighboring items, so mixture and
            // targets never belong to the same clip
            for (std::size_t i = 0; i < train_ctx.size(); ++i) {
                AdvBatch batch;
                batch.paired_mixture = train_ctx[i].mix_mag;
                batch.paired_targets = train_ctx[i].ref_mags;
                const std::size_t j = (i + 1) % train_ctx.size();
                const std::size_t l = (i + 2) % train_ctx.size();
                batch.unpaired_mixture = train_ctx[j].mix_mag;
                batch.unpaired_targets = train_ctx[l].ref_mags;
                auto step = gan->step(batch);
                train_loss += step.adv_loss.value;
            }
            train_loss /= static_cast<double>(train_ctx.size());
        }

        const double val_loss = eval_split(val_ctx, data.val);
        result.trace.push_back({epoch, train_loss, val_loss, lr});
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw TrainingDiverged(result.trace);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best_params = detail::snapshot(model.params());
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience_epochs) {
                lr *= cfg.decay_factor;
                stale_epochs = 0;
            }
        }
    }

    detail::restore(model.params(), best_params);
    if (cfg.loss == "l2_freq" || adversarial) model.pretrained = true;
    result.model = std::move(model);
    result.best_val = best_val;
    result.best_epoch = best_epoch;
    return result;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write trace: " + path);
    out << "epoch,train_loss,val_loss,lr\n";
    for (const auto& row : trace)
        out << row.epoch << "," << format_value(row.train_loss) << ","
            << format_value(row.val_loss) << "," << format_value(row.lr) << "\n";
}

// Applies the model's masks, reconstructs waveforms through the mixture
// phase, and returns the estimates per item.
inline std::vector<MultiSourceAudio> separate(const MaskModel& model,
                                              const std::vector<TrainItem>& items,
                                              const StftConfig& cfg) {
    std::vector<MultiSourceAudio> out;
    for (const auto& item : items) {
        const TrainContext ctx(item, cfg);
        const Tensor est_mag = apply_mask(model.forward_masks(ctx.mix_mag), ctx.mix_mag);
        out.push_back(detail::reconstruct_sources(est_mag, ctx));
    }
    return out;
}

// One metric-matrix column: mean of every requested metric over the test set.
inline std::map<std::string, double> evaluate(const MaskModel& model,
                                              const std::vector<TrainItem>& test_items,
                                              const std::vector<std::string>& metric_names,
                                              const MetricOptions& opt) {
    require(!test_items.empty(), "evaluate: no test items");
    const std::vector<MultiSourceAudio> estimates = separate(model, test_items, opt.stft);
    std::map<std::string, double> acc;
    for (const auto& name : metric_names) acc[name] = 0.0;
    for (std::size_t i = 0; i < test_items.size(); ++i) {
        const auto vals = evaluate_metrics(metric_names, estimates[i], test_items[i].sources, opt);
        for (const auto& [name, v] : vals) acc[name] += v;
    }
    for (auto& [name, v] : acc) v /= static_cast<double>(test_items.size());
    return acc;
}

}  // namespace seploss

#endif
