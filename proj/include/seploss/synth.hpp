#ifndef SEPLOSS_SYNTH_HPP
#define SEPLOSS_SYNTH_HPP

#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "seploss/audio.hpp"
#include "seploss/common.hpp"

namespace seploss {

// Synthetic stand-ins for the stems: a bank of sinusoids, one-pole filtered
// noise, or a decaying pulse train. Parameters are drawn per item from the
// stated ranges, deterministically from the spec seed.
enum class RecipeKind { sine_bank, filtered_noise, pulse_train };

struct SourceRecipe {
    RecipeKind kind = RecipeKind::sine_bank;
    int min_partials = 2;
    int max_partials = 5;
    double freq_lo_hz = 80.0;
    double freq_hi_hz = 3000.0;
    double cutoff_lo_hz = 200.0;   // filtered_noise
    double cutoff_hi_hz = 1800.0;
    double pulse_rate_lo_hz = 2.0;  // pulse_train
    double pulse_rate_hi_hz = 9.0;
    double pulse_decay = 0.995;
    double peak_lo = 0.3;
    double peak_hi = 0.9;
};

struct SynthSpec {
    std::uint64_t seed = 0;
    double duration_s = 3.0;
    double sample_rate = 8000.0;
    std::vector<SourceRecipe> recipes;
    std::vector<double> gains;  // empty means all 1.0

    static SynthSpec default_two_source(std::uint64_t seed) {
        SynthSpec spec;
        spec.seed = seed;
        SourceRecipe tonal;  // harmonic-ish content
        tonal.kind = RecipeKind::sine_bank;
        SourceRecipe noisy;
        noisy.kind = RecipeKind::filtered_noise;
        spec.recipes = {tonal, noisy};
        return spec;
    }

    void validate() const {
        require(duration_s > 0.0 && sample_rate > 0.0, "SynthSpec: bad duration or rate");
        require(!recipes.empty(), "SynthSpec: needs at least one source recipe");
        require(gains.empty() || gains.size() == recipes.size(),
                "SynthSpec: gains must match recipe count");
        for (const auto& r : recipes) {
            require(r.min_partials >= 1 && r.max_partials >= r.min_partials,
                    "SynthSpec: bad partial range");
            require(r.freq_lo_hz > 0.0 && r.freq_hi_hz >= r.freq_lo_hz, "SynthSpec: bad freq range");
            require(r.peak_lo > 0.0 && r.peak_hi >= r.peak_lo, "SynthSpec: bad peak range");
            require(r.pulse_decay > 0.0 && r.pulse_decay < 1.0, "SynthSpec: bad pulse decay");
        }
    }
};

namespace detail {

inline std::vector<double> render_source(const SourceRecipe& recipe, std::size_t length,
                                         double rate, Rng& rng) {
    std::vector<double> s(length, 0.0);
    switch (recipe.kind) {
        case RecipeKind::sine_bank: {
            const int partials =
                recipe.min_partials +
                static_cast<int>(rng.index(recipe.max_partials - recipe.min_partials + 1));
            for (int p = 0; p < partials; ++p) {
                const double f = rng.uniform(recipe.freq_lo_hz,
                                             std::min(recipe.freq_hi_hz, rate * 0.45));
                const double amp = rng.uniform(0.3, 1.0);
                const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                for (std::size_t t = 0; t < length; ++t)
                    s[t] += amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) /
                                               rate +
                                           phase);
            }
            break;
        }
        case RecipeKind::filtered_noise: {
            const double cutoff = rng.uniform(recipe.cutoff_lo_hz,
                                              std::min(recipe.cutoff_hi_hz, rate * 0.45));
            const double a = std::exp(-2.0 * std::numbers::pi * cutoff / rate);
            double state = 0.0;
            for (std::size_t t = 0; t < length; ++t) {
                state = a * state + (1.0 - a) * rng.uniform(-1.0, 1.0);
                s[t] = state;
            }
            break;
        }
        case RecipeKind::pulse_train: {
            const double pulse_rate = rng.uniform(recipe.pulse_rate_lo_hz, recipe.pulse_rate_hi_hz);
            const std::size_t period =
                std::max<std::size_t>(1, static_cast<std::size_t>(rate / pulse_rate));
            const std::size_t offset = rng.index(period);
            double env = 0.0;
            for (std::size_t t = 0; t < length; ++t) {
                if ((t + period - offset) % period == 0) env = rng.uniform(0.6, 1.0);
                s[t] = env;
                env *= recipe.pulse_decay;
            }
            break;
        }
    }
    // normalize the source to a drawn peak level
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    const double target_peak = rng.uniform(recipe.peak_lo, recipe.peak_hi);
    if (peak > 0.0)
        for (double& v : s) v *= target_peak / peak;
    return s;
}

}  // namespace detail

// mixture = sum_k gain_k * source_k, exactly; reproducible per seed.
inline std::pair<AudioBuffer, MultiSourceAudio> synthesize(const SynthSpec& spec) {
    spec.validate();
    const std::size_t length =
        static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate));
    Rng rng(spec.seed);

    MultiSourceAudio sources;
    for (std::size_t k = 0; k < spec.recipes.size(); ++k) {
        const double gain = spec.gains.empty() ? 1.0 : spec.gains[k];
        std::vector<double> s =
            detail::render_source(spec.recipes[k], length, spec.sample_rate, rng);
        for (double& v : s) v *= gain;  // fold gains in so sources sum to the mixture exactly
        sources.sources.push_back({std::move(s), spec.sample_rate});
    }

    AudioBuffer mixture{std::vector<double>(length, 0.0), spec.sample_rate};
    for (const auto& src : sources.sources)
        for (std::size_t t = 0; t < length; ++t) mixture.channels[0][t] += src.channels[0][t];
    return {std::move(mixture), std::move(sources)};
}

inline RecipeKind recipe_kind_from_string(const std::string& s) {
    if (s == "sine_bank") return RecipeKind::sine_bank;
    if (s == "filtered_noise") return RecipeKind::filtered_noise;
    if (s == "pulse_train") return RecipeKind::pulse_train;
    throw std::invalid_argument("unknown source recipe kind: " + s);
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.duration_s = j.value("duration_s", spec.duration_s);
    spec.sample_rate = j.value("sample_rate", spec.sample_rate);
    if (j.contains("sources")) {
        for (const auto& sj : j.at("sources")) {
            SourceRecipe r;
            r.kind = recipe_kind_from_string(sj.value("kind", "sine_bank"));
            r.min_partials = sj.value("min_partials", r.min_partials);
            r.max_partials = sj.value("max_partials", r.max_partials);
            r.freq_lo_hz = sj.value("freq_lo_hz", r.freq_lo_hz);
            r.freq_hi_hz = sj.value("freq_hi_hz", r.freq_hi_hz);
            r.cutoff_lo_hz = sj.value("cutoff_lo_hz", r.cutoff_lo_hz);
            r.cutoff_hi_hz = sj.value("cutoff_hi_hz", r.cutoff_hi_hz);
            r.pulse_rate_lo_hz = sj.value("pulse_rate_lo_hz", r.pulse_rate_lo_hz);
            r.pulse_rate_hi_hz = sj.value("pulse_rate_hi_hz", r.pulse_rate_hi_hz);
            r.pulse_decay = sj.value("pulse_decay", r.pulse_decay);
            r.peak_lo = sj.value("peak_lo", r.peak_lo);
            r.peak_hi = sj.value("peak_hi", r.peak_hi);
            spec.recipes.push_back(r);
        }
    } else {
        spec.recipes = SynthSpec::default_two_source(spec.seed).recipes;
    }
    if (j.contains("gains")) spec.gains = j.at("gains").get<std::vector<double>>();
    spec.validate();
    return spec;
}

}  // namespace seploss

#endif
