#ifndef SEPLOSS_STFT_HPP
#define SEPLOSS_STFT_HPP

#include <complex>
#include <numbers>
#include <vector>

#include "seploss/audio.hpp"
#include "seploss/common.hpp"
#include "seploss/fft.hpp"

namespace seploss {

enum class WindowKind { hann, rectangular };

// One-sided STFT, frame-major. center_pad pads window_length/2 zeros on both
// ends so frame n is centered at t = n*hop.
struct StftConfig {
    std::size_t fft_size = 4096;
    std::size_t window_length = 4096;
    std::size_t hop = 1024;
    WindowKind window_kind = WindowKind::hann;
    bool center_pad = true;

    std::size_t bins() const { return fft_size / 2 + 1; }
    std::size_t pad() const { return center_pad ? window_length / 2 : 0; }

    void validate() const {
        require(hop > 0, "StftConfig: hop must be positive");
        require(hop <= window_length, "StftConfig: hop must not exceed window_length");
        require(window_length <= fft_size, "StftConfig: window_length must not exceed fft_size");
        require(is_power_of_two(fft_size), "StftConfig: fft_size must be a power of two");
    }
};

inline std::vector<double> make_window(const StftConfig& cfg) {
    std::vector<double> w(cfg.window_length, 1.0);
    if (cfg.window_kind == WindowKind::hann) {
        const double n = static_cast<double>(cfg.window_length);
        for (std::size_t l = 0; l < cfg.window_length; ++l)
            w[l] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(l) / n);
    }
    return w;
}

// Frames needed to cover the padded signal (tail frames read zeros).
inline std::size_t stft_frame_count(std::size_t samples, const StftConfig& cfg) {
    const std::size_t padded = samples + 2 * cfg.pad();
    if (padded <= cfg.window_length) return 1;
    return 1 + (padded - cfg.window_length + cfg.hop - 1) / cfg.hop;
}

struct ComplexSpectrogram {
    std::size_t channels = 0;
    std::size_t frames = 0;  // N per channel
    std::size_t bins = 0;    // Omega = fft_size/2 + 1
    std::vector<std::complex<double>> data;  // (channel, frame, bin)
    StftConfig config;
    std::size_t source_samples = 0;  // tau before padding
    double sample_rate = 0.0;

    std::complex<double>& at(std::size_t c, std::size_t n, std::size_t w) {
        return data[(c * frames + n) * bins + w];
    }
    std::complex<double> at(std::size_t c, std::size_t n, std::size_t w) const {
        return data[(c * frames + n) * bins + w];
    }
    // rows of the channel-stacked magnitude layout
    std::size_t stacked_frames() const { return channels * frames; }
};

inline ComplexSpectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
    cfg.validate();
    audio.validate("stft");
    const std::size_t tau = audio.length();
    require(tau >= cfg.window_length, "stft: signal shorter than one window");

    const std::vector<double> window = make_window(cfg);
    const std::size_t pad = cfg.pad();
    const std::size_t frames = stft_frame_count(tau, cfg);

    ComplexSpectrogram out;
    out.channels = audio.num_channels();
    out.frames = frames;
    out.bins = cfg.bins();
    out.config = cfg;
    out.source_samples = tau;
    out.sample_rate = audio.sample_rate;
    out.data.assign(out.channels * frames * out.bins, {0.0, 0.0});

    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (std::size_t c = 0; c < out.channels; ++c) {
        const std::vector<double>& x = audio.channels[c];
        for (std::size_t n = 0; n < frames; ++n) {
            std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
            const std::size_t start = n * cfg.hop;  // padded coordinates
            for (std::size_t l = 0; l < cfg.window_length; ++l) {
                const std::size_t p = start + l;
                if (p < pad || p >= pad + tau) continue;
                buf[l] = window[l] * x[p - pad];
            }
            fft(buf);
            for (std::size_t w = 0; w < out.bins; ++w) out.at(c, n, w) = buf[w];
        }
    }
    return out;
}

// Magnitudes with channels stacked along the frame axis: row c*N + n.
inline Tensor magnitude(const ComplexSpectrogram& spec) {
    Tensor mag({spec.stacked_frames(), spec.bins});
    std::size_t i = 0;
    for (const auto& v : spec.data) mag[i++] = std::abs(v);
    return mag;
}

inline ComplexSpectrogram combine_mag_phase(const Tensor& mag, const ComplexSpectrogram& phase_src) {
    require(mag.rank() == 2 && mag.dim(0) == phase_src.stacked_frames() &&
                mag.dim(1) == phase_src.bins,
            "combine_mag_phase: magnitude shape mismatch");
    ComplexSpectrogram out = phase_src;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double ang = std::arg(phase_src.data[i]);
        out.data[i] = std::polar(mag[i], ang);
    }
    return out;
}

namespace detail {

// Squared-window overlap-add normalizer over the padded timeline.
inline std::vector<double> window_overlap_sum(const ComplexSpectrogram& spec,
                                              const std::vector<double>& window) {
    const StftConfig& cfg = spec.config;
    const std::size_t padded = spec.source_samples + 2 * cfg.pad();
    const std::size_t reach = (spec.frames - 1) * cfg.hop + cfg.window_length;
    std::vector<double> den(std::max(padded, reach), 0.0);
    for (std::size_t n = 0; n < spec.frames; ++n)
        for (std::size_t l = 0; l < cfg.window_length; ++l)
            den[n * cfg.hop + l] += window[l] * window[l];
    return den;
}

inline void check_invertible(const ComplexSpectrogram& spec, const std::vector<double>& den) {
    const StftConfig& cfg = spec.config;
    const std::size_t pad = cfg.pad();
    // Without center padding the first/last window of samples sits under a
    // decaying window tail; only the interior is held to the COLA check.
    const std::size_t margin = cfg.center_pad ? 0 : cfg.window_length;
    const std::size_t lo = pad + margin;
    const std::size_t hi = pad + spec.source_samples - std::min(spec.source_samples, margin);
    double dmax = 0.0;
    for (double v : den) dmax = std::max(dmax, v);
    for (std::size_t t = lo; t < hi; ++t)
        if (den[t] <= 1e-6 * dmax)
            throw std::invalid_argument("istft: window/hop violates COLA, not invertible");
}

}  // namespace detail

// Weighted overlap-add inverse with pointwise window normalization.
inline AudioBuffer istft(const ComplexSpectrogram& spec) {
    const StftConfig& cfg = spec.config;
    cfg.validate();
    require(spec.source_samples > 0, "istft: missing source sample count");
    const std::vector<double> window = make_window(cfg);
    const std::vector<double> den = detail::window_overlap_sum(spec, window);
    detail::check_invertible(spec, den);

    const std::size_t pad = cfg.pad();
    const std::size_t tau = spec.source_samples;
    const std::size_t half = cfg.fft_size / 2;

    AudioBuffer out;
    out.sample_rate = spec.sample_rate;
    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (std::size_t c = 0; c < spec.channels; ++c) {
        std::vector<double> acc(den.size(), 0.0);
        for (std::size_t n = 0; n < spec.frames; ++n) {
            for (std::size_t w = 0; w < spec.bins; ++w) buf[w] = spec.at(c, n, w);
            for (std::size_t w = 1; w < half; ++w) buf[cfg.fft_size - w] = std::conj(spec.at(c, n, w));
            ifft(buf);
            const std::size_t start = n * cfg.hop;
            for (std::size_t l = 0; l < cfg.window_length; ++l)
                acc[start + l] += window[l] * buf[l].real();
        }
        std::vector<double> ch(tau, 0.0);
        for (std::size_t t = 0; t < tau; ++t) {
            const double d = den[pad + t];
            ch[t] = d > 0.0 ? acc[pad + t] / d : 0.0;
        }
        out.channels.push_back(std::move(ch));
    }
    return out;
}

inline Tensor stft_magnitude(const AudioBuffer& audio, const StftConfig& cfg) {
    return magnitude(stft(audio, cfg));
}

inline AudioBuffer istft_mag_phase(const Tensor& mag, const ComplexSpectrogram& phase_src) {
    return istft(combine_mag_phase(mag, phase_src));
}

// Gradient of a scalar loss with respect to the waveform, given its gradient
// with respect to the one-sided STFT magnitudes. Bins with zero magnitude use
// subgradient 0.
inline Tensor stft_magnitude_vjp(const AudioBuffer& audio, const StftConfig& cfg,
                                 const ComplexSpectrogram& spec, const Tensor& grad_mag) {
    require(grad_mag.rank() == 2 && grad_mag.dim(0) == spec.stacked_frames() &&
                grad_mag.dim(1) == spec.bins,
            "stft_magnitude_vjp: gradient shape mismatch");
    const std::vector<double> window = make_window(cfg);
    const std::size_t pad = cfg.pad();
    const std::size_t tau = audio.length();

    Tensor gx({audio.num_channels(), tau});
    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t n = 0; n < spec.frames; ++n) {
            std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
            for (std::size_t w = 0; w < spec.bins; ++w) {
                const std::complex<double> X = spec.at(c, n, w);
                const double m = std::abs(X);
                if (m > 0.0) buf[w] = grad_mag.at(c * spec.frames + n, w) * (X / m);
            }
            ifft(buf);  // Re(sum_w g_w e^{i theta w l}) = fft_size * Re(ifft)
            const double scale = static_cast<double>(cfg.fft_size);
            const std::size_t start = n * cfg.hop;
            for (std::size_t l = 0; l < cfg.window_length; ++l) {
                const std::size_t p = start + l;
                if (p < pad || p >= pad + tau) continue;
                gx.at(c, p - pad) += window[l] * scale * buf[l].real();
            }
        }
    }
    return gx;
}

// Gradient of a scalar loss with respect to the magnitudes fed into
// istft_mag_phase, for a fixed phase source. grad_wave has shape {C, tau}.
inline Tensor istft_mag_phase_vjp(const ComplexSpectrogram& phase_src, const Tensor& grad_wave) {
    const StftConfig& cfg = phase_src.config;
    require(grad_wave.rank() == 2 && grad_wave.dim(0) == phase_src.channels &&
                grad_wave.dim(1) == phase_src.source_samples,
            "istft_mag_phase_vjp: gradient shape mismatch");
    const std::vector<double> window = make_window(cfg);
    const std::vector<double> den = detail::window_overlap_sum(phase_src, window);
    const std::size_t pad = cfg.pad();
    const std::size_t tau = phase_src.source_samples;
    const std::size_t half = cfg.fft_size / 2;

    Tensor gm({phase_src.stacked_frames(), phase_src.bins});
    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (std::size_t c = 0; c < phase_src.channels; ++c) {
        // upstream gradient divided by the OLA normalizer, on padded timeline
        std::vector<double> v(den.size(), 0.0);
        for (std::size_t t = 0; t < tau; ++t) {
            const double d = den[pad + t];
            if (d > 0.0) v[pad + t] = grad_wave.at(c, t) / d;
        }
        for (std::size_t n = 0; n < phase_src.frames; ++n) {
            std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
            const std::size_t start = n * cfg.hop;
            for (std::size_t l = 0; l < cfg.window_length; ++l)
                buf[l] = window[l] * v[start + l];
            fft(buf);  // h = DFT(a)/fft_size
            const double inv = 1.0 / static_cast<double>(cfg.fft_size);
            for (std::size_t w = 0; w < phase_src.bins; ++w) {
                std::complex<double> h = buf[w] * inv;
                if (w != 0 && w != half) h *= 2.0;  // mirrored interior bins
                const double ang = std::arg(phase_src.at(c, n, w));
                gm.at(c * phase_src.frames + n, w) =
                    h.real() * std::cos(ang) + h.imag() * std::sin(ang);
            }
        }
    }
    return gm;
}

// Per-source STFTs sharing one config; sources must be aligned.
inline std::vector<ComplexSpectrogram> stft_sources(const MultiSourceAudio& audio,
                                                    const StftConfig& cfg) {
    audio.validate("stft_sources");
    std::vector<ComplexSpectrogram> out;
    out.reserve(audio.num_sources());
    for (const auto& src : audio.sources) out.push_back(stft(src, cfg));
    return out;
}

// Magnitude tensor {stacked frames, bins, K} from per-source spectrograms.
inline Tensor magnitudes(const std::vector<ComplexSpectrogram>& specs) {
    require(!specs.empty(), "magnitudes: no sources");
    const std::size_t rows = specs[0].stacked_frames();
    const std::size_t bins = specs[0].bins;
    for (const auto& s : specs)
        require(s.stacked_frames() == rows && s.bins == bins, "magnitudes: source shape mismatch");
    Tensor mag({rows, bins, specs.size()});
    for (std::size_t k = 0; k < specs.size(); ++k)
        for (std::size_t i = 0; i < rows * bins; ++i)
            mag[i * specs.size() + k] = std::abs(specs[k].data[i]);
    return mag;
}

}  // namespace seploss

#endif
