#include "choicenet/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace choicenet::nn {

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        default: return "identity";
    }
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw ValidationError("unknown activation: " + s);
}

ParameterBlock glorot_init(int out_dim, int in_dim, Rng& rng) {
    if (out_dim < 1 || in_dim < 1) throw ValidationError("glorot_init: dimensions must be >= 1");
    ParameterBlock p;
    p.weights = Matrix(out_dim, in_dim);
    p.bias.assign(out_dim, 0.0);
    const double limit = std::sqrt(6.0 / (in_dim + out_dim));
    for (double& w : p.weights.a) w = (2.0 * uniform_open(rng) - 1.0) * limit;
    return p;
}

void dense_forward(std::span<const double> x, const ParameterBlock& p, Activation act,
                   std::vector<double>& y, ForwardCache* cache) {
    if (static_cast<int>(x.size()) != p.in_dim())
        throw ValidationError("dense_forward: input length " + std::to_string(x.size()) +
                              " != in_dim " + std::to_string(p.in_dim()));
    const int out = p.out_dim();
    y.resize(out);
    if (cache) {
        cache->input.assign(x.begin(), x.end());
        cache->preact.resize(out);
    }
    for (int r = 0; r < out; ++r) {
        double s = p.bias[r];
        const double* w = &p.weights.a[static_cast<std::size_t>(r) * p.weights.cols];
        for (int c = 0; c < p.in_dim(); ++c) s += w[c] * x[c];
        if (cache) cache->preact[r] = s;
        y[r] = activate(act, s);
    }
}

BlockGrad BlockGrad::zeros_like(const ParameterBlock& p) {
    BlockGrad g;
    g.dW = Matrix(p.weights.rows, p.weights.cols);
    g.db.assign(p.bias.size(), 0.0);
    return g;
}

void BlockGrad::zero() {
    std::fill(dW.a.begin(), dW.a.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
}

void BlockGrad::add(const BlockGrad& other) {
    if (dW.rows != other.dW.rows || dW.cols != other.dW.cols || db.size() != other.db.size())
        throw ValidationError("BlockGrad::add: shape mismatch");
    for (std::size_t i = 0; i < dW.a.size(); ++i) dW.a[i] += other.dW.a[i];
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += other.db[i];
}

void BlockGrad::scale(double s) {
    for (double& v : dW.a) v *= s;
    for (double& v : db) v *= s;
}

void dense_backward(const ParameterBlock& p, Activation act, const ForwardCache& cache,
                    std::span<const double> upstream, BlockGrad& accum, std::vector<double>& dx) {
    const int out = p.out_dim(), in = p.in_dim();
    if (static_cast<int>(upstream.size()) != out)
        throw ValidationError("dense_backward: upstream length mismatch");
    if (accum.dW.rows != out || accum.dW.cols != in)
        throw ValidationError("dense_backward: gradient shape mismatch");
    dx.assign(in, 0.0);
    for (int r = 0; r < out; ++r) {
        const double delta = upstream[r] * activate_grad(act, cache.preact[r]);
        accum.db[r] += delta;
        double* gw = &accum.dW.a[static_cast<std::size_t>(r) * in];
        const double* w = &p.weights.a[static_cast<std::size_t>(r) * in];
        for (int c = 0; c < in; ++c) {
            gw[c] += delta * cache.input[c];
            dx[c] += delta * w[c];
        }
    }
}

DenseGradients dense_backward(const ParameterBlock& p, Activation act, const ForwardCache& cache,
                              std::span<const double> upstream) {
    DenseGradients g;
    g.param = BlockGrad::zeros_like(p);
    dense_backward(p, act, cache, upstream, g.param, g.dx);
    return g;
}

BlockGrad accumulate_tied_gradients(std::span<const BlockGrad> copies) {
    if (copies.empty()) throw ValidationError("accumulate_tied_gradients: empty group");
    BlockGrad out = copies[0];
    for (std::size_t i = 1; i < copies.size(); ++i) out.add(copies[i]);
    return out;
}

void softmax(std::span<const double> utilities, std::vector<double>& p) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double u : utilities) {
        if (!std::isfinite(u)) throw NumericalError("softmax: non-finite utility");
        mx = std::max(mx, u);
    }
    p.resize(utilities.size());
    double sum = 0;
    for (std::size_t j = 0; j < utilities.size(); ++j) {
        p[j] = std::exp(utilities[j] - mx);
        sum += p[j];
    }
    for (double& v : p) v /= sum;
}

std::vector<double> softmax(std::span<const double> utilities) {
    std::vector<double> p;
    softmax(utilities, p);
    return p;
}

double log_probability(std::span<const double> utilities, int chosen) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double u : utilities) {
        if (!std::isfinite(u)) throw NumericalError("log_probability: non-finite utility");
        mx = std::max(mx, u);
    }
    double sum = 0;
    for (double u : utilities) sum += std::exp(u - mx);
    return utilities[chosen] - mx - std::log(sum);
}

CrossEntropyResult cross_entropy(const std::vector<std::vector<double>>& p, std::span<const int> chosen) {
    if (p.size() != chosen.size()) throw ValidationError("cross_entropy: batch size mismatch");
    CrossEntropyResult out;
    for (std::size_t n = 0; n < p.size(); ++n) {
        double q = p[n][chosen[n]];
        if (q < 1e-12) {
            q = 1e-12;
            ++out.clamped;
        }
        out.value -= std::log(q);
    }
    out.value /= p.empty() ? 1.0 : static_cast<double>(p.size());
    return out;
}

AdamState AdamState::for_blocks(std::span<const ParameterBlock> blocks, AdamConfig cfg) {
    AdamState s;
    s.cfg = cfg;
    for (const auto& b : blocks) {
        s.m.push_back(BlockGrad::zeros_like(b));
        s.v.push_back(BlockGrad::zeros_like(b));
    }
    return s;
}

namespace {

inline void adam_update(double& param, double g, double& m, double& v, const AdamConfig& c,
                        double bc1, double bc2) {
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    param -= c.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + c.epsilon);
}

} // namespace

void adam_step(std::vector<ParameterBlock>& params, std::span<const BlockGrad> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ValidationError("adam_step: block count mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, state.step);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& p = params[b];
        for (std::size_t i = 0; i < p.weights.a.size(); ++i)
            adam_update(p.weights.a[i], grads[b].dW.a[i], state.m[b].dW.a[i], state.v[b].dW.a[i], state.cfg,
                         bc1, bc2);
        for (std::size_t i = 0; i < p.bias.size(); ++i)
            adam_update(p.bias[i], grads[b].db[i], state.m[b].db[i], state.v[b].db[i], state.cfg, bc1, bc2);
    }
}

} // namespace choicenet::nn
