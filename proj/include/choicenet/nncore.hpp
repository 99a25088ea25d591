#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "choicenet/common.hpp"
#include "choicenet/rng.hpp"

namespace choicenet::nn {

/// Dense row-major matrix, sized once at construction.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

enum class Activation { relu, tanh, identity };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

inline double activate(Activation a, double pre) {
    switch (a) {
        case Activation::relu: return pre > 0 ? pre : 0.0;
        case Activation::tanh: return std::tanh(pre);
        default: return pre;
    }
}

/// Derivative of the activation with respect to its preactivation.
inline double activate_grad(Activation a, double pre) {
    switch (a) {
        case Activation::relu: return pre > 0 ? 1.0 : 0.0;
        case Activation::tanh: {
            double t = std::tanh(pre);
            return 1.0 - t * t;
        }
        default: return 1.0;
    }
}

/// One dense layer's parameters. Blocks with the same tie tag are stored
/// once (canonical storage) and referenced from several places, so tied
/// copies cannot drift apart.
struct ParameterBlock {
    Matrix weights; // out x in; in == 0 for bias-only blocks (ASC)
    std::vector<double> bias;
    std::string tie_tag; // empty = untied

    int out_dim() const { return static_cast<int>(bias.size()); }
    int in_dim() const { return weights.cols; }
};

/// Uniform draw on +-sqrt(6/(in+out)), zero bias.
ParameterBlock glorot_init(int out_dim, int in_dim, Rng& rng);

/// Inputs and preactivations retained by a forward pass for the backward pass.
struct ForwardCache {
    std::vector<double> input;
    std::vector<double> preact;
};

/// y = act(Wx + b). `cache` may be null when no backward pass will follow.
void dense_forward(std::span<const double> x, const ParameterBlock& p, Activation act,
                   std::vector<double>& y, ForwardCache* cache);

struct BlockGrad {
    Matrix dW;
    std::vector<double> db;

    static BlockGrad zeros_like(const ParameterBlock& p);
    void zero();
    void add(const BlockGrad& other);
    void scale(double s);
};

/// Exact gradients of the cached forward map. dW/db accumulate into `accum`;
/// dx receives the gradient with respect to the layer input.
void dense_backward(const ParameterBlock& p, Activation act, const ForwardCache& cache,
                    std::span<const double> upstream, BlockGrad& accum, std::vector<double>& dx);

/// Non-accumulating variant returning fresh gradients.
struct DenseGradients {
    BlockGrad param;
    std::vector<double> dx;
};
DenseGradients dense_backward(const ParameterBlock& p, Activation act, const ForwardCache& cache,
                              std::span<const double> upstream);

/// Elementwise sum over per-copy gradients of one tied group: the gradient
/// of the canonical shared block.
BlockGrad accumulate_tied_gradients(std::span<const BlockGrad> copies);

/// Max-subtracted softmax. Throws NumericalError on non-finite utilities.
void softmax(std::span<const double> utilities, std::vector<double>& p);
std::vector<double> softmax(std::span<const double> utilities);

/// ln p_j computed through log-sum-exp, so tiny probabilities stay exact.
double log_probability(std::span<const double> utilities, int chosen);

struct CrossEntropyResult {
    double value = 0;    // -(1/N) sum ln p_chosen; nonnegative
    long clamped = 0;    // rows whose chosen probability hit the 1e-12 floor
};

/// Averaged categorical cross-entropy over a batch of probability rows.
CrossEntropyResult cross_entropy(const std::vector<std::vector<double>>& p, std::span<const int> chosen);

struct AdamConfig {
    // 0.003 keeps per-epoch validation gains above shuffle noise, so the
    // patience-6 stopping rule does not cut training short of convergence.
    double learning_rate = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators per parameter block.
struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<BlockGrad> m, v;

    static AdamState for_blocks(std::span<const ParameterBlock> blocks, AdamConfig cfg);
};

/// Standard Adam update with bias correction; one call = one step.
void adam_step(std::vector<ParameterBlock>& params, std::span<const BlockGrad> grads, AdamState& state);

} // namespace choicenet::nn
