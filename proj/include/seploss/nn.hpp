#ifndef SEPLOSS_NN_HPP
#define SEPLOSS_NN_HPP

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "seploss/common.hpp"

namespace seploss {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
    void zero_grad() { grad.fill(0.0); }
};

inline double nn_init_scale(std::size_t fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

// y = W x + b with W of shape {out, in}.
struct Dense {
    Param weight, bias;

    Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
        : weight(name + ".weight", Tensor({out, in})), bias(name + ".bias", Tensor({out})) {
        const double s = nn_init_scale(in);
        for (auto& v : weight.value.data) v = rng.normal(0.0, s);
    }

    std::size_t in_features() const { return weight.value.dim(1); }
    std::size_t out_features() const { return weight.value.dim(0); }

    std::vector<double> forward(const std::vector<double>& x) const {
        const std::size_t out = out_features(), in = in_features();
        std::vector<double> y(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = bias.value[o];
            const double* w = &weight.value.data[o * in];
            for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    std::vector<double> backward(const std::vector<double>& x, const std::vector<double>& gy,
                                 bool accumulate_param_grads) {
        const std::size_t out = out_features(), in = in_features();
        std::vector<double> gx(in, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            const double g = gy[o];
            const double* w = &weight.value.data[o * in];
            double* gw = &weight.grad.data[o * in];
            for (std::size_t i = 0; i < in; ++i) {
                gx[i] += w[i] * g;
                if (accumulate_param_grads) gw[i] += g * x[i];
            }
            if (accumulate_param_grads) bias.grad[o] += g;
        }
        return gx;
    }
};

// Single-image conv, NCHW without the batch axis: {C,H,W} -> {C2,H2,W2}.
struct Conv2d {
    std::size_t in_ch, out_ch, ksize, stride, pad;
    Param weight;  // {out_ch, in_ch, k, k}
    Param bias;    // {out_ch}

    Conv2d(const std::string& name, std::size_t in_c, std::size_t out_c, std::size_t k,
           std::size_t s, std::size_t p, Rng& rng)
        : in_ch(in_c), out_ch(out_c), ksize(k), stride(s), pad(p),
          weight(name + ".weight", Tensor({out_c, in_c, k, k})),
          bias(name + ".bias", Tensor({out_c})) {
        const double scale = nn_init_scale(in_c * k * k);
        for (auto& v : weight.value.data) v = rng.normal(0.0, scale);
    }

    std::size_t out_dim(std::size_t in) const {
        require(in + 2 * pad >= ksize, "Conv2d: input smaller than kernel");
        return (in + 2 * pad - ksize) / stride + 1;
    }

    Tensor forward(const Tensor& x) const {
        require(x.rank() == 3 && x.dim(0) == in_ch, "Conv2d: bad input shape");
        const std::size_t H = x.dim(1), W = x.dim(2);
        const std::size_t H2 = out_dim(H), W2 = out_dim(W);
        Tensor y({out_ch, H2, W2});
        for (std::size_t co = 0; co < out_ch; ++co)
            for (std::size_t ho = 0; ho < H2; ++ho)
                for (std::size_t wo = 0; wo < W2; ++wo) {
                    double acc = bias.value[co];
                    for (std::size_t ci = 0; ci < in_ch; ++ci)
                        for (std::size_t kh = 0; kh < ksize; ++kh) {
                            const std::ptrdiff_t hi =
                                static_cast<std::ptrdiff_t>(ho * stride + kh) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kw = 0; kw < ksize; ++kw) {
                                const std::ptrdiff_t wi =
                                    static_cast<std::ptrdiff_t>(wo * stride + kw) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                                acc += weight.value.data[((co * in_ch + ci) * ksize + kh) * ksize +
                                                         kw] *
                                       x.data[(ci * H + static_cast<std::size_t>(hi)) * W +
                                              static_cast<std::size_t>(wi)];
                            }
                        }
                    y.at(co, ho, wo) = acc;
                }
        return y;
    }

    // input gradient only; weights stay fixed, so this is const
    Tensor input_gradient(const Tensor& x, const Tensor& gy) const {
        return const_cast<Conv2d*>(this)->backward(x, gy, false, true);
    }

    Tensor backward(const Tensor& x, const Tensor& gy, bool accumulate_param_grads,
                    bool want_input_grad) {
        const std::size_t H = x.dim(1), W = x.dim(2);
        const std::size_t H2 = gy.dim(1), W2 = gy.dim(2);
        Tensor gx(want_input_grad ? x.shape : std::vector<std::size_t>{1});
        for (std::size_t co = 0; co < out_ch; ++co)
            for (std::size_t ho = 0; ho < H2; ++ho)
                for (std::size_t wo = 0; wo < W2; ++wo) {
                    const double g = gy.at(co, ho, wo);
                    if (g == 0.0) continue;
                    if (accumulate_param_grads) bias.grad[co] += g;
                    for (std::size_t ci = 0; ci < in_ch; ++ci)
                        for (std::size_t kh = 0; kh < ksize; ++kh) {
                            const std::ptrdiff_t hi =
                                static_cast<std::ptrdiff_t>(ho * stride + kh) -
                                static_cast<std::ptrdiff_t>(pad);
                            if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kw = 0; kw < ksize; ++kw) {
                                const std::ptrdiff_t wi =
                                    static_cast<std::ptrdiff_t>(wo * stride + kw) -
                                    static_cast<std::ptrdiff_t>(pad);
                                if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(W)) continue;
                                const std::size_t widx =
                                    ((co * in_ch + ci) * ksize + kh) * ksize + kw;
                                const std::size_t xidx =
                                    (ci * H + static_cast<std::size_t>(hi)) * W +
                                    static_cast<std::size_t>(wi);
                                if (accumulate_param_grads)
                                    weight.grad.data[widx] += g * x.data[xidx];
                                if (want_input_grad)
                                    gx.data[xidx] += g * weight.value.data[widx];
                            }
                        }
                }
        return gx;
    }
};

inline Tensor tanh_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = std::tanh(v);
    return y;
}

// gy through tanh given the post-activation values.
inline Tensor tanh_backward(const Tensor& y_post, const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - y_post[i] * y_post[i];
    return gx;
}

struct Adam {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(const std::vector<Param*>& params) {
        if (m_.empty()) {
            for (const Param* p : params) {
                m_.emplace_back(p->value.shape);
                v_.emplace_back(p->value.shape);
            }
        }
        require(m_.size() == params.size(), "Adam: parameter set changed between steps");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = *params[i];
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double g = p.grad[j];
                m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
                v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
                p.value[j] -= lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps);
            }
        }
    }

  private:
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

inline void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

// --- flat binary tensor file + JSON shape manifest -------------------------
// Raw little-endian float64 payload; the manifest (written separately, see
// report.hpp for the JSON helpers) records names, shapes and byte offsets.

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are unsupported");

struct TensorFileEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset_bytes = 0;
};

inline std::vector<TensorFileEntry> write_tensor_blob(const std::string& path,
                                                      const std::vector<const Param*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write tensor file: " + path);
    std::vector<TensorFileEntry> entries;
    std::size_t offset = 0;
    for (const Param* p : params) {
        entries.push_back({p->name, p->value.shape, offset});
        out.write(reinterpret_cast<const char*>(p->value.data.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
        offset += p->value.size() * sizeof(double);
    }
    if (!out) throw IoError("short write on tensor file: " + path);
    return entries;
}

inline void read_tensor_blob(const std::string& path, const std::vector<TensorFileEntry>& entries,
                             const std::vector<Param*>& params) {
    require(entries.size() == params.size(), "read_tensor_blob: entry/param count mismatch");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read tensor file: " + path);
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(entries[i].shape == params[i]->value.shape,
                "read_tensor_blob: shape mismatch for " + entries[i].name);
        in.seekg(static_cast<std::streamoff>(entries[i].offset_bytes));
        in.read(reinterpret_cast<char*>(params[i]->value.data.data()),
                static_cast<std::streamsize>(params[i]->value.size() * sizeof(double)));
        if (!in) throw IoError("short read on tensor file: " + path);
    }
}

}  // namespace seploss

#endif
