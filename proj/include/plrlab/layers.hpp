#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "plrlab/rng.hpp"
#include "plrlab/tensor.hpp"

namespace plr {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// Preactivations

/// Dense preactivation f = x W^T + b. W has one row per preactivation lane,
/// so a layer of n units of rank k has n*k rows; lanes of unit i are rows
/// [i*k, i*k + k).
struct LinearParams {
    Tensor weight;  // (units*k) x in
    Tensor bias;    // units*k
};

struct LinearGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

Tensor linear_forward(const Tensor& x, const LinearParams& p);
LinearGrads linear_backward(const Tensor& x, const LinearParams& p, const Tensor& dy);

/// Zero-padded strided cross-correlation (no kernel flip).
struct ConvParams {
    Tensor kernels;  // (units*k) x in x kh x kw
    Tensor bias;     // units*k
    std::size_t stride = 1;
    std::size_t pad = 0;
};

struct ConvGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};

/// Output spatial extent floor((in + 2 pad - kernel) / stride) + 1; throws
/// DimensionError when the padded input is smaller than the kernel.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

Tensor conv2d_forward(const Tensor& x, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy);

// ---------------------------------------------------------------------------
// Piecewise-linear activations

enum class ActivationKind { ReLU, LeakyReLU, PReLU, Maxout, Identity };

const char* activation_name(ActivationKind kind);

struct ActivationSpec {
    ActivationKind kind = ActivationKind::ReLU;
    std::size_t k = 1;     // lanes per unit: >= 2 for maxout, 1 otherwise
    double alpha = 0.01;   // LReLU slope; PReLU initial slope

    static ActivationSpec relu() { return {ActivationKind::ReLU, 1, 0.0}; }
    static ActivationSpec leaky_relu(double alpha = 0.01) {
        return {ActivationKind::LeakyReLU, 1, alpha};
    }
    static ActivationSpec prelu(double initial_alpha = 0.25) {
        return {ActivationKind::PReLU, 1, initial_alpha};
    }
    static ActivationSpec maxout(std::size_t k) { return {ActivationKind::Maxout, k, 0.0}; }
    static ActivationSpec identity() { return {ActivationKind::Identity, 1, 0.0}; }

    /// Throws SpecError if k does not fit the kind.
    void validate() const;
    /// Number of distinct region indices a unit can report.
    std::size_t regions() const { return kind == ActivationKind::Maxout ? k : 2; }
};

using LaneIndex = std::uint8_t;

struct ActivationOutput {
    Tensor y;
    std::vector<LaneIndex> pattern;  // laid out like y
};

struct ActivationGrads {
    Tensor input;
    Tensor alpha;  // PReLU only; empty otherwise
};

/// Applies the activation to h, whose axis 1 holds units*k lanes.
///
/// ReLU family: y = max(alpha h, h) with alpha 0 for ReLU; pattern is 1 iff
/// h > 0. Maxout: y = max over each unit's k lanes; pattern is the winning
/// lane, lowest index on ties. `alpha` holds one PReLU slope per unit.
ActivationOutput activation_forward(const Tensor& h, const ActivationSpec& spec,
                                    const Tensor* alpha = nullptr);

ActivationGrads activation_backward(const Tensor& h, const ActivationSpec& spec,
                                    const Tensor* alpha, std::span<const LaneIndex> pattern,
                                    const Tensor& dy);

/// Maxout over groups of k lanes along axis 1; k = 1 is the identity.
ActivationOutput maxout_forward(const Tensor& h, std::size_t k);

// ---------------------------------------------------------------------------
// Batch normalisation

struct BatchNormState {
    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    double epsilon = 1e-5;
    double momentum = 0.1;

    /// gamma 1, beta 0, running moments (0, 1).
    static BatchNormState identity(std::size_t features, double epsilon = 1e-5,
                                   double momentum = 0.1);
    std::size_t features() const { return gamma.size(); }
};

struct BatchNormCache {
    Tensor normalized;           // (f - mean) / sqrt(var + eps)
    std::vector<double> inv_std;  // per feature
};

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

/// Train mode normalises with batch moments and folds them into the running
/// moments; Infer mode uses the running moments and leaves the state alone.
/// Rank-4 features are normalised per channel over batch and space.
Tensor batchnorm_forward(const Tensor& f, BatchNormState& s, Mode mode,
                         BatchNormCache* cache = nullptr);
Tensor batchnorm_infer(const Tensor& f, const BatchNormState& s);
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormState& s,
                                  const Tensor& dy);

// ---------------------------------------------------------------------------
// Dropout

struct DropoutSpec {
    double p = 0.0;
    void validate() const;
};

struct DropoutOutput {
    Tensor y;
    Tensor mask;  // 0 or 1/(1-p) per element; empty in Infer mode
};

/// Inverted dropout: Train zeroes each element with probability p and scales
/// survivors by 1/(1-p); Infer is the identity.
DropoutOutput dropout_forward(const Tensor& x, const DropoutSpec& spec, Mode mode,
                              SeededRng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& dy);

// ---------------------------------------------------------------------------
// Pooling

enum class PoolKind { Max, Avg };

struct PoolSpec {
    PoolKind kind = PoolKind::Max;
    std::size_t window = 2;
    std::size_t stride = 2;
    std::size_t pad = 0;
    bool global = false;  // window spans the whole remaining map

    static PoolSpec max(std::size_t window, std::size_t stride, std::size_t pad = 0) {
        return {PoolKind::Max, window, stride, pad, false};
    }
    static PoolSpec avg(std::size_t window, std::size_t stride, std::size_t pad = 0) {
        return {PoolKind::Avg, window, stride, pad, false};
    }
    static PoolSpec global_avg() { return {PoolKind::Avg, 0, 1, 0, true}; }
};

struct PoolOutput {
    Tensor y;
    std::vector<std::size_t> argmax;  // max pooling: flat input index per output
};

/// Per-channel pooling over a batch x c x h x w tensor. Padded positions
/// never win a max; average pooling divides by the full window area.
PoolOutput pool_forward(const Tensor& x, const PoolSpec& spec);
Tensor pool_backward(const Tensor& x, const PoolSpec& spec, const PoolOutput& out,
                     const Tensor& dy);

// ---------------------------------------------------------------------------
// Loss

struct LossOutput {
    double loss = 0.0;
    Tensor grad;  // d loss / d logits
};

/// Mean over the batch of -log softmax(logits)[label].
LossOutput softmax_xent(const Tensor& logits, std::span<const int> labels);

}  // namespace plr
