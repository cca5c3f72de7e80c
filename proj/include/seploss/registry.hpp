#ifndef SEPLOSS_REGISTRY_HPP
#define SEPLOSS_REGISTRY_HPP

#include <cstdlib>
#include <future>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "seploss/adversarial.hpp"
#include "seploss/deep_feature.hpp"
#include "seploss/losses_spec.hpp"
#include "seploss/losses_time.hpp"
#include "seploss/masks.hpp"
#include "seploss/metrics.hpp"
#include "seploss/stft.hpp"

namespace seploss {

struct MetricOptions {
    StftConfig stft;  // spectrogram losses; the 4096/4096/1024 hann default
    double sdr_frame_seconds = 1.0;
    DissimConfig dissim;
    MrsConfig mrs = MrsConfig::defaults();
    std::uint64_t embed_seed = 0x5EED;
    std::size_t embed_layer = 2;
    double deep_delta = 0.5;
    double deep_lambda = 10.0 / 3.0;
};

// Everything the loss-as-metric suite needs for one (estimate, reference)
// pair, computed once. The mixture is the sum of the reference stems; mask
// metrics compare ratio masks derived from each side's magnitudes.
struct PairData {
    const MultiSourceAudio& estimate;
    const MultiSourceAudio& reference;
    ComplexSpectrogram mix_spec;
    Tensor est_mags, ref_mags;    // {frames, bins, K}
    Tensor est_masks, ref_masks;  // {frames, bins, K}
    Tensor psa_vals;              // {frames, bins, K}

    PairData(const MultiSourceAudio& est, const MultiSourceAudio& ref, const MetricOptions& opt)
        : estimate(est), reference(ref) {
        require_aligned(est, ref, "metrics");
        AudioBuffer mixture = ref.sources[0];
        for (std::size_t k = 1; k < ref.num_sources(); ++k)
            for (std::size_t c = 0; c < mixture.num_channels(); ++c)
                for (std::size_t t = 0; t < mixture.length(); ++t)
                    mixture.channels[c][t] += ref.sources[k].channels[c][t];

        mix_spec = stft(mixture, opt.stft);
        const std::vector<ComplexSpectrogram> est_specs = stft_sources(est, opt.stft);
        const std::vector<ComplexSpectrogram> ref_specs = stft_sources(ref, opt.stft);
        est_mags = magnitudes(est_specs);
        ref_mags = magnitudes(ref_specs);
        est_masks = ratio_masks(est_mags);
        ref_masks = ratio_masks(ref_mags);
        psa_vals = psa_target(ref_specs, mix_spec);
    }
};

// Registered loss-as-metric names, taxonomy order. "sdr" is the score-style
// metric (higher is better); everything else is a loss (lower is better).
inline const std::vector<std::string>& all_metric_names() {
    static const std::vector<std::string> names = {
        "l1_time",    "l2_time",    "logl1_time", "logl2_time", "snr",
        "sisdr_time", "sdsdr_time", "l1_freq",    "l2_freq",    "logl1_freq",
        "logl2_freq", "sisdr_freq", "l1_mask",    "l2_mask",    "psa",
        "dissim",     "sc",         "mag",        "mrs",        "combination",
        "deep_feature", "sdr"};
    return names;
}

inline bool metric_is_loss(const std::string& name) { return name != "sdr"; }

inline void validate_metric_names(const std::vector<std::string>& names) {
    const auto& known = all_metric_names();
    for (const auto& n : names)
        if (std::find(known.begin(), known.end(), n) == known.end())
            throw std::invalid_argument("unknown metric: " + n);
}

inline double eval_metric(const std::string& name, const PairData& pair,
                          const MetricOptions& opt) {
    if (name == "l1_time") return lp_time(1, pair.estimate, pair.reference).value;
    if (name == "l2_time") return lp_time(2, pair.estimate, pair.reference).value;
    if (name == "logl1_time") return log_lp_time(1, pair.estimate, pair.reference).value;
    if (name == "logl2_time") return log_lp_time(2, pair.estimate, pair.reference).value;
    if (name == "snr") return snr(pair.estimate, pair.reference).value;
    if (name == "sisdr_time") return sisdr_time(pair.estimate, pair.reference).value;
    if (name == "sdsdr_time") return sdsdr_time(pair.estimate, pair.reference).value;
    if (name == "l1_freq") return lp_freq(1, pair.est_mags, pair.ref_mags).value;
    if (name == "l2_freq") return lp_freq(2, pair.est_mags, pair.ref_mags).value;
    if (name == "logl1_freq") return log_lp_freq(1, pair.est_mags, pair.ref_mags).value;
    if (name == "logl2_freq") return log_lp_freq(2, pair.est_mags, pair.ref_mags).value;
    if (name == "sisdr_freq") return sisdr_freq(pair.est_mags, pair.ref_mags).value;
    if (name == "l1_mask") return mask_lp(1, pair.est_masks, pair.ref_masks).value;
    if (name == "l2_mask") return mask_lp(2, pair.est_masks, pair.ref_masks).value;
    if (name == "psa") return psa_loss(pair.est_mags, pair.psa_vals).value;
    if (name == "dissim") return dissim_loss(pair.est_mags, pair.ref_mags, opt.dissim).value;
    if (name == "sc") return spectral_convergence(pair.est_mags, pair.ref_mags).value;
    if (name == "mag") return log_magnitude(pair.est_mags, pair.ref_mags).value;
    if (name == "mrs") return mrs_loss(pair.estimate, pair.reference, opt.mrs).value;
    if (name == "combination") return combination_loss(pair.est_mags, pair.ref_mags).value;
    if (name == "deep_feature") {
        EmbeddingNet net(opt.embed_seed);
        return deep_feature_loss(pair.est_mags, pair.ref_mags, net, opt.embed_layer,
                                 opt.deep_delta, opt.deep_lambda)
            .value;
    }
    if (name == "sdr") return sdr_metric(pair.estimate, pair.reference, opt.sdr_frame_seconds).mean_db();
    throw std::invalid_argument("unknown metric: " + name);
}

inline std::map<std::string, double> evaluate_metrics(const std::vector<std::string>& names,
                                                      const MultiSourceAudio& estimate,
                                                      const MultiSourceAudio& reference,
                                                      const MetricOptions& opt) {
    PairData pair(estimate, reference, opt);
    std::map<std::string, double> out;
    for (const auto& name : names) out[name] = eval_metric(name, pair, opt);
    return out;
}

inline std::size_t thread_budget() {
    if (const char* env = std::getenv("SEPLOSS_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

struct SystemEstimates {
    std::string name;
    std::vector<MultiSourceAudio> items;
};

// Mean of each metric over all items, one column per system. Items are
// evaluated in parallel across (system, item); cell order stays fixed.
inline MetricMatrix metric_matrix(const std::vector<std::string>& metric_names,
                                  const std::vector<SystemEstimates>& systems,
                                  const std::vector<MultiSourceAudio>& references,
                                  const MetricOptions& opt) {
    require(!systems.empty() && !metric_names.empty(), "metric_matrix: empty inputs");
    validate_metric_names(metric_names);
    for (const auto& sys : systems)
        require(sys.items.size() == references.size(),
                "metric_matrix: system '" + sys.name + "' covers " +
                    std::to_string(sys.items.size()) + " items, references have " +
                    std::to_string(references.size()));

    MetricMatrix matrix;
    std::vector<std::string> cols;
    for (const auto& sys : systems) cols.push_back(sys.name);
    matrix.init(metric_names, cols);

    struct Cell {
        std::map<std::string, double> values;
    };
    const std::size_t items = references.size();
    std::vector<Cell> cells(systems.size() * items);

    const std::size_t budget = thread_budget();
    std::vector<std::future<void>> futures;
    const auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t idx = begin; idx < end; ++idx) {
            const std::size_t s = idx / items, i = idx % items;
            cells[idx].values =
                evaluate_metrics(metric_names, systems[s].items[i], references[i], opt);
        }
    };
    const std::size_t total = cells.size();
    const std::size_t chunk = (total + budget - 1) / budget;
    for (std::size_t b = 0; b < total; b += chunk)
        futures.push_back(std::async(std::launch::async, worker, b, std::min(total, b + chunk)));
    for (auto& f : futures) f.get();

    for (std::size_t s = 0; s < systems.size(); ++s)
        for (std::size_t m = 0; m < metric_names.size(); ++m) {
            double acc = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < items; ++i) {
                const double v = cells[s * items + i].values.at(metric_names[m]);
                if (std::isfinite(v)) {
                    acc += v;
                    ++n;
                }
            }
            if (n == 0) {
                matrix.warnings.push_back("metric_matrix: '" + metric_names[m] + "' undefined for '" +
                                          systems[s].name + "', cell zeroed");
                matrix.values.at(m, s) = 0.0;
            } else {
                matrix.values.at(m, s) = acc / static_cast<double>(n);
            }
        }
    return matrix;
}

}  // namespace seploss

#endif
