#ifndef SEPLOSS_AUDIO_HPP
#define SEPLOSS_AUDIO_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "seploss/common.hpp"

namespace seploss {

// Multichannel waveform. All channels share one length; samples are
// dimensionless amplitudes, typically inside [-1, 1].
struct AudioBuffer {
    std::vector<std::vector<double>> channels;
    double sample_rate = 0.0;

    AudioBuffer() = default;
    AudioBuffer(std::vector<double> mono, double rate)
        : channels{std::move(mono)}, sample_rate(rate) {}

    std::size_t num_channels() const { return channels.size(); }
    std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }

    void validate(const std::string& who = "AudioBuffer") const {
        require(!channels.empty(), who + ": no channels");
        require(sample_rate > 0.0, who + ": sample_rate must be positive");
        const std::size_t len = channels[0].size();
        for (const auto& ch : channels) {
            require(ch.size() == len, who + ": channels differ in length");
            for (double v : ch)
                require(std::isfinite(v), who + ": non-finite sample");
        }
    }
};

// K aligned sources. Losses index sources first; channels are flattened
// into the time axis wherever a per-source vector is needed.
struct MultiSourceAudio {
    std::vector<AudioBuffer> sources;

    std::size_t num_sources() const { return sources.size(); }
    std::size_t length() const { return sources.empty() ? 0 : sources[0].length(); }
    std::size_t num_channels() const { return sources.empty() ? 0 : sources[0].num_channels(); }
    double sample_rate() const { return sources.empty() ? 0.0 : sources[0].sample_rate; }

    // samples per source with channels flattened in
    std::size_t flat_length() const { return length() * num_channels(); }

    void validate(const std::string& who = "MultiSourceAudio") const {
        require(!sources.empty(), who + ": needs at least one source");
        sources[0].validate(who);
        for (std::size_t k = 1; k < sources.size(); ++k) {
            sources[k].validate(who);
            require(sources[k].length() == sources[0].length(),
                    who + ": sources differ in length");
            require(sources[k].sample_rate == sources[0].sample_rate,
                    who + ": sources differ in sample rate");
            require(sources[k].num_channels() == sources[0].num_channels(),
                    who + ": sources differ in channel count");
        }
    }
};

inline void require_aligned(const MultiSourceAudio& a, const MultiSourceAudio& b,
                            const std::string& who) {
    require(a.num_sources() == b.num_sources(), who + ": source count mismatch");
    require(a.length() == b.length(), who + ": length mismatch");
    require(a.num_channels() == b.num_channels(), who + ": channel count mismatch");
    require(a.sample_rate() == b.sample_rate(), who + ": sample rate mismatch");
}

// Gradient carrier for waveform-domain losses: shape {K, C, L}.
inline Tensor waveform_tensor(const MultiSourceAudio& audio) {
    Tensor t({audio.num_sources(), audio.num_channels(), audio.length()});
    std::size_t i = 0;
    for (const auto& src : audio.sources)
        for (const auto& ch : src.channels)
            for (double v : ch) t[i++] = v;
    return t;
}

inline MultiSourceAudio audio_from_tensor(const Tensor& t, double sample_rate) {
    require(t.rank() == 3, "audio_from_tensor: want rank-3 {K,C,L}");
    MultiSourceAudio out;
    for (std::size_t k = 0; k < t.dim(0); ++k) {
        AudioBuffer buf;
        buf.sample_rate = sample_rate;
        for (std::size_t c = 0; c < t.dim(1); ++c) {
            std::vector<double> ch(t.dim(2));
            for (std::size_t l = 0; l < t.dim(2); ++l) ch[l] = t.at(k, c, l);
            buf.channels.push_back(std::move(ch));
        }
        out.sources.push_back(std::move(buf));
    }
    return out;
}

}  // namespace seploss

#endif
