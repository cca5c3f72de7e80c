#ifndef SEPLOSS_WAV_HPP
#define SEPLOSS_WAV_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "seploss/audio.hpp"

namespace seploss {

enum class WavFormat { pcm16, pcm24, float32 };

namespace detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void wr_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(v & 0xFF);
    out.push_back((v >> 8) & 0xFF);
    out.push_back((v >> 16) & 0xFF);
    out.push_back((v >> 24) & 0xFF);
}
inline void wr_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(v & 0xFF);
    out.push_back((v >> 8) & 0xFF);
}
inline void wr_tag(std::vector<unsigned char>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

inline float bits_to_float(std::uint32_t u) {
    float f;
    static_assert(sizeof(f) == 4);
    std::memcpy(&f, &u, 4);
    return f;
}
inline std::uint32_t float_to_bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

}  // namespace detail

// Reads PCM 16/24-bit and IEEE float-32 WAV, mono or stereo (more channels
// are accepted and deinterleaved as-is).
inline AudioBuffer read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw IoError("not a RIFF/WAVE file: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(&bytes[pos]);
        const std::uint32_t size = detail::rd_u32(&bytes[pos + 4]);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw IoError("truncated WAV chunk in: " + path);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (size < 16) throw IoError("malformed fmt chunk in: " + path);
            format = detail::rd_u16(&bytes[body]);
            channels = detail::rd_u16(&bytes[body + 2]);
            rate = detail::rd_u32(&bytes[body + 4]);
            bits = detail::rd_u16(&bytes[body + 14]);
            if (format == 0xFFFE) {  // WAVE_FORMAT_EXTENSIBLE: subformat GUID
                if (size < 40) throw IoError("malformed extensible fmt chunk in: " + path);
                format = detail::rd_u16(&bytes[body + 24]);
            }
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = &bytes[body];
            data_size = size;
        }
        pos = body + size + (size & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data == nullptr) throw IoError("WAV missing fmt or data chunk: " + path);
    if (channels == 0 || rate == 0) throw IoError("WAV has zero channels or rate: " + path);

    const bool pcm16 = format == 1 && bits == 16;
    const bool pcm24 = format == 1 && bits == 24;
    const bool f32 = format == 3 && bits == 32;
    if (!pcm16 && !pcm24 && !f32)
        throw IoError("unsupported WAV encoding (want PCM16/PCM24/float32): " + path);

    const std::size_t bytes_per = bits / 8;
    const std::size_t frames = data_size / (bytes_per * channels);
    AudioBuffer out;
    out.sample_rate = static_cast<double>(rate);
    out.channels.assign(channels, std::vector<double>(frames));
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (f * channels + c) * bytes_per;
            double v = 0.0;
            if (pcm16) {
                const std::int16_t s = static_cast<std::int16_t>(detail::rd_u16(p));
                v = static_cast<double>(s) / 32768.0;
            } else if (pcm24) {
                std::int32_t s = static_cast<std::int32_t>(p[0]) |
                                 (static_cast<std::int32_t>(p[1]) << 8) |
                                 (static_cast<std::int32_t>(p[2]) << 16);
                if (s & 0x800000) s |= ~0xFFFFFF;  // sign extend
                v = static_cast<double>(s) / 8388608.0;
            } else {
                v = static_cast<double>(detail::bits_to_float(detail::rd_u32(p)));
            }
            out.channels[c][f] = v;
        }
    return out;
}

inline void write_wav(const std::string& path, const AudioBuffer& audio,
                      WavFormat format = WavFormat::float32) {
    audio.validate("write_wav");
    const std::size_t channels = audio.num_channels();
    const std::size_t frames = audio.length();
    const std::size_t bytes_per = format == WavFormat::pcm16 ? 2 : (format == WavFormat::pcm24 ? 3 : 4);
    const std::size_t data_size = frames * channels * bytes_per;
    const bool is_float = format == WavFormat::float32;

    std::vector<unsigned char> out;
    out.reserve(60 + data_size);
    detail::wr_tag(out, "RIFF");
    const std::uint32_t fact_size = is_float ? 12 : 0;
    detail::wr_u32(out, static_cast<std::uint32_t>(4 + 24 + fact_size + 8 + data_size +
                                                   (data_size & 1)));
    detail::wr_tag(out, "WAVE");
    detail::wr_tag(out, "fmt ");
    detail::wr_u32(out, 16);
    detail::wr_u16(out, is_float ? 3 : 1);
    detail::wr_u16(out, static_cast<std::uint16_t>(channels));
    detail::wr_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
    detail::wr_u32(out, static_cast<std::uint32_t>(audio.sample_rate * channels * bytes_per));
    detail::wr_u16(out, static_cast<std::uint16_t>(channels * bytes_per));
    detail::wr_u16(out, static_cast<std::uint16_t>(bytes_per * 8));
    if (is_float) {  // float WAV carries a fact chunk
        detail::wr_tag(out, "fact");
        detail::wr_u32(out, 4);
        detail::wr_u32(out, static_cast<std::uint32_t>(frames));
    }
    detail::wr_tag(out, "data");
    detail::wr_u32(out, static_cast<std::uint32_t>(data_size));

    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t c = 0; c < channels; ++c) {
            const double v = audio.channels[c][f];
            if (format == WavFormat::pcm16) {
                const double scaled = std::round(v * 32768.0);
                const std::int16_t s = static_cast<std::int16_t>(
                    std::min(32767.0, std::max(-32768.0, scaled)));
                detail::wr_u16(out, static_cast<std::uint16_t>(s));
            } else if (format == WavFormat::pcm24) {
                const double scaled = std::round(v * 8388608.0);
                const std::int32_t s = static_cast<std::int32_t>(
                    std::min(8388607.0, std::max(-8388608.0, scaled)));
                out.push_back(s & 0xFF);
                out.push_back((s >> 8) & 0xFF);
                out.push_back((s >> 16) & 0xFF);
            } else {
                detail::wr_u32(out, detail::float_to_bits(static_cast<float>(v)));
            }
        }
    if (data_size & 1) out.push_back(0);

    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write WAV file: " + path);
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("short write on WAV file: " + path);
}

}  // namespace seploss

#endif
