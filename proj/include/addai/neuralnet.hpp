#pragma once

// Minimal fully-connected network substrate: forward pass, MSE loss,
// backprop, inverted dropout and Adam. Hidden layers are tanh, the final
// layer is linear. Templated on the scalar type; the production
// instantiation is float (4-byte wire representation), accumulations run
// in double either way.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "addai/binio.hpp"

namespace addai {

template <typename S>
struct LayerParamsT {
    uint32_t in = 0;
    uint32_t out = 0;
    std::vector<S> w;  // row-major, out x in
    std::vector<S> b;  // out

    bool operator==(const LayerParamsT&) const = default;
};

template <typename S>
struct NetworkParamsT {
    std::vector<LayerParamsT<S>> layers;

    size_t input_width() const { return layers.empty() ? 0 : layers.front().in; }
    size_t output_width() const { return layers.empty() ? 0 : layers.back().out; }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    bool operator==(const NetworkParamsT&) const = default;
};

using LayerParams = LayerParamsT<float>;
using NetworkParams = NetworkParamsT<float>;

struct TrainConfig {
    size_t epochs = 100;
    double learning_rate = 0.01;
    double dropout_rate = 0.05;
    size_t batch_size = 256;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    uint64_t seed = 0;

    bool operator==(const TrainConfig&) const = default;
};

// Glorot-uniform weights, zero biases, deterministic under seed.
template <typename S = float>
NetworkParamsT<S> init_params(const std::vector<size_t>& layer_sizes, uint64_t seed) {
    if (layer_sizes.size() < 2) throw Error("init_params: need at least 2 layer sizes");
    for (size_t s : layer_sizes)
        if (s == 0) throw Error("init_params: zero layer size");

    std::mt19937_64 rng(seed);
    NetworkParamsT<S> p;
    p.layers.resize(layer_sizes.size() - 1);
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        auto& layer = p.layers[l];
        layer.in = static_cast<uint32_t>(layer_sizes[l]);
        layer.out = static_cast<uint32_t>(layer_sizes[l + 1]);
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
        for (auto& w : layer.w) w = static_cast<S>(dist(rng));
        layer.b.assign(layer.out, S(0));
    }
    return p;
}

// Everything backward() needs: the values each layer consumed plus, on
// hidden layers, the pre-dropout tanh output and the dropout multiplier.
template <typename S>
struct ForwardTraceT {
    std::vector<std::vector<S>> activations;    // [0]=input .. [L]=output, post-dropout
    std::vector<std::vector<S>> tanh_out;       // hidden layers only; empty slot when no dropout
    std::vector<std::vector<S>> dropout_scale;  // per-unit 0 or 1/(1-rate); empty slot when off

    std::span<const S> output() const { return activations.back(); }
};

using ForwardTrace = ForwardTraceT<float>;

// Full forward pass. Supplying an rng with rate > 0 enables inverted dropout
// on the hidden activations (training mode); otherwise the pass is pure and
// draws nothing.
template <typename S>
ForwardTraceT<S> forward(const NetworkParamsT<S>& p, std::span<const S> x,
                         std::mt19937_64* dropout_rng = nullptr, double dropout_rate = 0.0) {
    if (p.layers.empty()) throw Error("forward: empty network");
    if (x.size() != p.input_width())
        throw Error("forward: input width " + std::to_string(x.size()) + " != expected " +
                    std::to_string(p.input_width()));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw Error("forward: dropout rate must be in [0,1)");
    const bool dropout = dropout_rng != nullptr && dropout_rate > 0.0;

    const size_t n_layers = p.layers.size();
    ForwardTraceT<S> trace;
    trace.activations.resize(n_layers + 1);
    trace.tanh_out.resize(n_layers + 1);
    trace.dropout_scale.resize(n_layers + 1);
    trace.activations[0].assign(x.begin(), x.end());

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const S keep_scale = static_cast<S>(1.0 / (1.0 - dropout_rate));

    for (size_t l = 0; l < n_layers; ++l) {
        const auto& layer = p.layers[l];
        const auto& in = trace.activations[l];
        if (in.size() != layer.in) throw Error("forward: layer dimension mismatch");

        std::vector<S>& out = trace.activations[l + 1];
        out.resize(layer.out);
        const bool last = (l + 1 == n_layers);
        for (uint32_t j = 0; j < layer.out; ++j) {
            double z = layer.b[j];
            const S* wrow = layer.w.data() + static_cast<size_t>(j) * layer.in;
            for (uint32_t i = 0; i < layer.in; ++i) z += static_cast<double>(wrow[i]) * in[i];
            out[j] = last ? static_cast<S>(z) : static_cast<S>(std::tanh(z));
        }

        if (!last && dropout) {
            trace.tanh_out[l + 1] = out;
            auto& scale = trace.dropout_scale[l + 1];
            scale.resize(layer.out);
            for (uint32_t j = 0; j < layer.out; ++j) {
                scale[j] = unit(*dropout_rng) < dropout_rate ? S(0) : keep_scale;
                out[j] *= scale[j];
            }
        }
    }
    return trace;
}

// Mean squared error, Eq-style: (1/K) * sum of squared differences.
template <typename S>
double mse(std::span<const S> x, std::span<const S> x_prime) {
    if (x.size() != x_prime.size())
        throw Error("mse: length mismatch: " + std::to_string(x.size()) + " vs " +
                    std::to_string(x_prime.size()));
    if (x.empty()) throw Error("mse: empty vectors");
    double sum = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
        const double d = static_cast<double>(x[j]) - static_cast<double>(x_prime[j]);
        sum += d * d;
    }
    return sum / static_cast<double>(x.size());
}

template <typename S>
NetworkParamsT<S> zero_like(const NetworkParamsT<S>& p) {
    NetworkParamsT<S> z = p;
    for (auto& l : z.layers) {
        std::fill(l.w.begin(), l.w.end(), S(0));
        std::fill(l.b.begin(), l.b.end(), S(0));
    }
    return z;
}

template <typename S>
void add_in_place(NetworkParamsT<S>& acc, const NetworkParamsT<S>& g) {
    for (size_t l = 0; l < acc.layers.size(); ++l) {
        for (size_t i = 0; i < acc.layers[l].w.size(); ++i) acc.layers[l].w[i] += g.layers[l].w[i];
        for (size_t i = 0; i < acc.layers[l].b.size(); ++i) acc.layers[l].b[i] += g.layers[l].b[i];
    }
}

template <typename S>
void scale_in_place(NetworkParamsT<S>& p, double s) {
    for (auto& l : p.layers) {
        for (auto& w : l.w) w = static_cast<S>(w * s);
        for (auto& b : l.b) b = static_cast<S>(b * s);
    }
}

// Analytic gradients of mse(target, output) w.r.t. every weight and bias.
template <typename S>
NetworkParamsT<S> backward(const NetworkParamsT<S>& p, const ForwardTraceT<S>& trace,
                           std::span<const S> target) {
    const size_t n_layers = p.layers.size();
    if (trace.activations.size() != n_layers + 1)
        throw Error("backward: trace does not match network");
    if (target.size() != p.output_width()) throw Error("backward: target width mismatch");

    NetworkParamsT<S> grads = zero_like(p);
    const auto& out = trace.activations[n_layers];
    const double inv_k = 1.0 / static_cast<double>(target.size());

    // final layer is linear: d(mse)/dz = 2/K * (out - target)
    std::vector<double> delta(out.size());
    for (size_t j = 0; j < out.size(); ++j)
        delta[j] = 2.0 * inv_k * (static_cast<double>(out[j]) - static_cast<double>(target[j]));

    for (size_t l = n_layers; l-- > 0;) {
        const auto& layer = p.layers[l];
        const auto& in = trace.activations[l];
        auto& gl = grads.layers[l];
        for (uint32_t j = 0; j < layer.out; ++j) {
            S* grow = gl.w.data() + static_cast<size_t>(j) * layer.in;
            for (uint32_t i = 0; i < layer.in; ++i)
                grow[i] = static_cast<S>(delta[j] * static_cast<double>(in[i]));
            gl.b[j] = static_cast<S>(delta[j]);
        }
        if (l == 0) break;

        std::vector<double> prev(layer.in, 0.0);
        for (uint32_t j = 0; j < layer.out; ++j) {
            const S* wrow = layer.w.data() + static_cast<size_t>(j) * layer.in;
            for (uint32_t i = 0; i < layer.in; ++i) prev[i] += static_cast<double>(wrow[i]) * delta[j];
        }
        // chain through tanh (and the dropout multiplier when it was applied)
        const bool dropped = !trace.dropout_scale[l].empty();
        const auto& act = dropped ? trace.tanh_out[l] : trace.activations[l];
        delta.assign(layer.in, 0.0);
        for (uint32_t i = 0; i < layer.in; ++i) {
            const double t = static_cast<double>(act[i]);
            double d = prev[i] * (1.0 - t * t);
            if (dropped) d *= static_cast<double>(trace.dropout_scale[l][i]);
            delta[i] = d;
        }
    }
    return grads;
}

template <typename S>
struct AdamStateT {
    uint64_t t = 0;
    NetworkParamsT<S> m;
    NetworkParamsT<S> v;
};

using AdamState = AdamStateT<float>;

template <typename S>
AdamStateT<S> init_adam_state(const NetworkParamsT<S>& p) {
    return {0, zero_like(p), zero_like(p)};
}

// Standard Adam with bias-corrected moments.
template <typename S>
void adam_step(NetworkParamsT<S>& p, const NetworkParamsT<S>& grads, AdamStateT<S>& state,
               const TrainConfig& cfg) {
    state.t += 1;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));

    auto update = [&](std::vector<S>& param, const std::vector<S>& g, std::vector<S>& m,
                      std::vector<S>& v) {
        for (size_t i = 0; i < param.size(); ++i) {
            const double gi = g[i];
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<S>(mi);
            v[i] = static_cast<S>(vi);
            const double m_hat = mi / corr1;
            const double v_hat = vi / corr2;
            param[i] = static_cast<S>(param[i] -
                                      cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon));
        }
    };
    for (size_t l = 0; l < p.layers.size(); ++l) {
        update(p.layers[l].w, grads.layers[l].w, state.m.layers[l].w, state.v.layers[l].w);
        update(p.layers[l].b, grads.layers[l].b, state.m.layers[l].b, state.v.layers[l].b);
    }
}

// --- cloud -> local distribution payload -----------------------------------
//
// Versioned binary format, little-endian throughout:
//   "ADNP" | u32 version | u32 layer count
//   per layer: u32 in | u32 out | f32 w (row-major, out x in) | f32 b (out)

inline constexpr uint32_t kParamsFormatVersion = 1;

inline std::vector<uint8_t> serialize_params(const NetworkParams& p) {
    std::vector<uint8_t> out;
    out.reserve(12 + p.parameter_count() * 4 + p.layers.size() * 8);
    for (char c : {'A', 'D', 'N', 'P'}) out.push_back(static_cast<uint8_t>(c));
    binio::put_u32(out, kParamsFormatVersion);
    binio::put_u32(out, static_cast<uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
        binio::put_u32(out, l.in);
        binio::put_u32(out, l.out);
        for (float w : l.w) binio::put_f32(out, w);
        for (float b : l.b) binio::put_f32(out, b);
    }
    return out;
}

inline NetworkParams deserialize_params(std::span<const uint8_t> bytes) {
    binio::Reader r(bytes);
    if (r.u8() != 'A' || r.u8() != 'D' || r.u8() != 'N' || r.u8() != 'P')
        throw Error("deserialize_params: bad magic");
    const uint32_t version = r.u32();
    if (version != kParamsFormatVersion)
        throw Error("deserialize_params: unsupported version " + std::to_string(version));
    const uint32_t n_layers = r.u32();
    if (n_layers == 0) throw Error("deserialize_params: zero layers");

    NetworkParams p;
    p.layers.resize(n_layers);
    for (uint32_t l = 0; l < n_layers; ++l) {
        auto& layer = p.layers[l];
        layer.in = r.u32();
        layer.out = r.u32();
        if (layer.in == 0 || layer.out == 0) throw Error("deserialize_params: zero layer size");
        if (l > 0 && layer.in != p.layers[l - 1].out)
            throw Error("deserialize_params: layer dimensions do not chain");
        layer.w.resize(static_cast<size_t>(layer.in) * layer.out);
        layer.b.resize(layer.out);
        for (auto& w : layer.w) w = r.f32();
        for (auto& b : layer.b) b = r.f32();
        for (float w : layer.w)
            if (!std::isfinite(w)) throw Error("deserialize_params: non-finite weight");
        for (float b : layer.b)
            if (!std::isfinite(b)) throw Error("deserialize_params: non-finite bias");
    }
    if (!r.done()) throw Error("deserialize_params: trailing bytes");
    return p;
}

inline void save_params(const NetworkParams& p, const std::filesystem::path& path) {
    binio::write_file(path, serialize_params(p));
}

inline NetworkParams load_params(const std::filesystem::path& path) {
    return deserialize_params(binio::read_file(path));
}

}  // namespace addai
