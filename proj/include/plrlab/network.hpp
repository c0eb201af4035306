#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "plrlab/layers.hpp"

namespace plr {

using Preactivation = std::variant<LinearParams, ConvParams>;
using Attachment = std::variant<PoolSpec, DropoutSpec>;

/// One hidden layer: preactivation, optional batch norm, activation, then
/// optional pooling/dropout attachments. The field order is the evaluation
/// order; there is no way to put the activation ahead of the normalisation.
struct LayerNode {
    Preactivation preact;
    std::optional<BatchNormState> bn;
    ActivationSpec act;
    Tensor prelu_alpha;  // one slope per unit, PReLU only
    std::vector<Attachment> post;

    bool is_conv() const { return std::holds_alternative<ConvParams>(preact); }
    /// Preactivation features (units * k).
    std::size_t lanes() const;
    std::size_t units() const;
    std::size_t lanes_per_unit() const {
        return act.kind == ActivationKind::Maxout ? act.k : 1;
    }
};

/// Per-layer Normal scale multipliers; layer 0 is the first preactivation,
/// the classifier head counts as a remaining layer.
struct InitScheme {
    double first_scale = 0.01;
    double rest_scale = 0.01;
    double bias = 0.0;

    static InitScheme toy() { return {0.01, 0.01, 0.0}; }
    static InitScheme mim() { return {0.01, 0.05, 0.0}; }
};

struct ParamRef {
    std::string name;
    Tensor* value;
    bool decay;  // weight decay applies (weights and kernels only)
};

struct ConstParamRef {
    std::string name;
    const Tensor* value;
    bool decay;
};

struct NodeCache {
    Shape input_shape;  // shape handed to the node before any flattening
    Tensor input;       // preactivation input as consumed
    Tensor activation_input;
    BatchNormCache bn;
    std::vector<LaneIndex> pattern;
    Shape pattern_shape;
    std::vector<Tensor> post_inputs;
    std::vector<PoolOutput> pools;
    std::vector<Tensor> masks;
    Shape output_shape;
};

struct ForwardCache {
    const void* owner = nullptr;
    std::uint64_t generation = 0;
    Mode mode = Mode::Infer;
    std::vector<NodeCache> nodes;
    Tensor head_input;
};

struct ForwardResult {
    Tensor logits;
    ForwardCache cache;
};

struct Gradients {
    std::vector<Tensor> params;  // aligned with Network::parameters()
    Tensor input;
};

/// Feed-forward chain of piecewise-linear layers ending in softmax logits.
///
/// With a head, logits = head(flatten(last node output)). Without one, the
/// last node must emit exactly `classes` features per example (e.g. after
/// global average pooling).
class Network {
public:
    Network(Shape input_dims, std::vector<LayerNode> nodes, std::optional<LinearParams> head,
            std::size_t classes);

    const Shape& input_dims() const { return input_dims_; }
    std::size_t classes() const { return classes_; }
    const std::vector<LayerNode>& nodes() const { return nodes_; }
    std::vector<LayerNode>& nodes() { return nodes_; }
    const std::optional<LinearParams>& head() const { return head_; }
    std::optional<LinearParams>& head() { return head_; }

    std::vector<ParamRef> parameters();
    std::vector<ConstParamRef> parameters() const;
    /// Parameters plus batch-norm running moments, in snapshot order.
    std::vector<ParamRef> state_tensors();
    std::vector<ConstParamRef> state_tensors() const;
    std::size_t parameter_count() const;

    /// Per-example output shape of node i (before flattening for the head).
    Shape node_output_shape(std::size_t i) const;

    /// Pure evaluation. Train mode uses batch statistics but leaves the
    /// running moments untouched; dropout needs `rng` in Train mode.
    ForwardResult evaluate(const Tensor& x, Mode mode, SeededRng* rng = nullptr) const;
    /// Training-step forward: like evaluate, and in Train mode also folds the
    /// batch moments into every running estimate.
    ForwardResult forward(const Tensor& x, Mode mode, SeededRng* rng = nullptr);
    /// Infer-mode logits.
    Tensor infer(const Tensor& x) const;

    /// Gradients of all parameters and of the input given d loss / d logits.
    /// Throws StateError unless `cache` came from a Train-mode pass of this
    /// network with no training step since.
    Gradients backward(const ForwardCache& cache, const Tensor& dlogits) const;

    /// Replaces each running moment by the exact moments of `points`
    /// propagated through the network.
    void calibrate_batchnorm(const Tensor& points);
    void set_dropout(double p);
    bool has_batchnorm() const;

    /// Validates dimension chaining; throws SpecError.
    void validate() const;

private:
    Shape input_dims_;
    std::vector<LayerNode> nodes_;
    std::optional<LinearParams> head_;
    std::size_t classes_;
    std::uint64_t generation_ = 0;

    ForwardResult run(const Tensor& x, Mode mode, SeededRng* rng,
                      std::vector<BatchNormState>* updated) const;
};

/// Multi-layer perceptron of `layers` hidden nodes of `width` units each,
/// optional batch norm ahead of every activation, optional dropout after it,
/// and a linear two-class head. Parameters are zero until init_params.
Network build_mlp(std::size_t n0, std::size_t layers, std::size_t width,
                  const ActivationSpec& act, bool with_bn,
                  std::optional<double> dropout_p = std::nullopt, std::size_t classes = 2);

enum class MimVariant { Cifar, Mnist };

struct MimOptions {
    MimVariant variant = MimVariant::Cifar;
    std::size_t classes = 10;
    double width_scale = 1.0;  // applied to every layer except the class layer
    double dropout = 0.5;
    ActivationSpec activation = ActivationSpec::maxout(2);
    bool batch_norm = true;
};

/// Three conv blocks (one m-conv and two 1x1 m-mlp layers each), 3x3
/// stride-2 max pooling plus dropout after blocks 1 and 2, and global
/// average pooling after block 3.
Network build_mim(const MimOptions& options);

void init_params(Network& net, SeededRng& rng, const InitScheme& scheme);

}  // namespace plr
