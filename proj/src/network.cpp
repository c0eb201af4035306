#include "plrlab/network.hpp"

#include <cmath>

#include "plrlab/error.hpp"
#include "plrlab/numerics.hpp"

namespace plr {

namespace {

template <class Node>
auto& preact_weight(Node& node) {
    if (auto* lin = std::get_if<LinearParams>(&node.preact)) return lin->weight;
    return std::get<ConvParams>(node.preact).kernels;
}

template <class Node>
auto& preact_bias(Node& node) {
    if (auto* lin = std::get_if<LinearParams>(&node.preact)) return lin->bias;
    return std::get<ConvParams>(node.preact).bias;
}

template <class Ref, class Net>
std::vector<Ref> collect(Net& net, bool with_running) {
    std::vector<Ref> refs;
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        auto& node = net.nodes()[i];
        const std::string prefix = "node" + std::to_string(i) + ".";
        refs.push_back({prefix + "weight", &preact_weight(node), true});
        refs.push_back({prefix + "bias", &preact_bias(node), false});
        if (node.act.kind == ActivationKind::PReLU) {
            refs.push_back({prefix + "alpha", &node.prelu_alpha, false});
        }
        if (node.bn) {
            refs.push_back({prefix + "gamma", &node.bn->gamma, false});
            refs.push_back({prefix + "beta", &node.bn->beta, false});
            if (with_running) {
                refs.push_back({prefix + "running_mean", &node.bn->running_mean, false});
                refs.push_back({prefix + "running_var", &node.bn->running_var, false});
            }
        }
    }
    if (net.head()) {
        refs.push_back({"head.weight", &net.head()->weight, true});
        refs.push_back({"head.bias", &net.head()->bias, false});
    }
    return refs;
}

Tensor flatten_batch(Tensor t) {
    const std::size_t batch = t.dim(0);
    const std::size_t rest = batch ? t.size() / batch : 0;
    return std::move(t).reshaped({batch, rest});
}

Shape with_batch(std::size_t batch, const Shape& per_example) {
    Shape s{batch};
    s.insert(s.end(), per_example.begin(), per_example.end());
    return s;
}

Tensor apply_preact(const LayerNode& node, const Tensor& in) {
    if (const auto* lin = std::get_if<LinearParams>(&node.preact)) return linear_forward(in, *lin);
    return conv2d_forward(in, std::get<ConvParams>(node.preact));
}

Tensor preact_input(const LayerNode& node, const Tensor& x) {
    if (!node.is_conv() && x.rank() != 2) return flatten_batch(x);
    return x;
}

std::size_t scaled_width(std::size_t width, double scale) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(width * scale)));
}

}  // namespace

std::size_t LayerNode::lanes() const { return preact_weight(*this).dim(0); }

std::size_t LayerNode::units() const { return lanes() / lanes_per_unit(); }

Network::Network(Shape input_dims, std::vector<LayerNode> nodes, std::optional<LinearParams> head,
                 std::size_t classes)
    : input_dims_(std::move(input_dims)),
      nodes_(std::move(nodes)),
      head_(std::move(head)),
      classes_(classes) {
    validate();
}

std::vector<ParamRef> Network::parameters() { return collect<ParamRef>(*this, false); }
std::vector<ConstParamRef> Network::parameters() const {
    return collect<ConstParamRef>(*this, false);
}
std::vector<ParamRef> Network::state_tensors() { return collect<ParamRef>(*this, true); }
std::vector<ConstParamRef> Network::state_tensors() const {
    return collect<ConstParamRef>(*this, true);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
}

bool Network::has_batchnorm() const {
    for (const auto& node : nodes_) {
        if (node.bn) return true;
    }
    return false;
}

void Network::set_dropout(double p) {
    DropoutSpec{p}.validate();
    for (auto& node : nodes_) {
        for (auto& att : node.post) {
            if (auto* d = std::get_if<DropoutSpec>(&att)) d->p = p;
        }
    }
}

void Network::validate() const {
    if (classes_ == 0) throw SpecError("network needs at least one class");
    if (input_dims_.empty() || shape_size(input_dims_) == 0) {
        throw SpecError("network input dimensions must be nonempty");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) (void)node_output_shape(i);
    const std::size_t features =
        nodes_.empty() ? shape_size(input_dims_) : shape_size(node_output_shape(nodes_.size() - 1));
    if (head_) {
        if (head_->weight.rank() != 2 || head_->weight.dim(1) != features ||
            head_->weight.dim(0) != classes_ || head_->bias.size() != classes_) {
            throw SpecError("classifier head " + shape_string(head_->weight.shape()) +
                            " does not map " + std::to_string(features) + " features to " +
                            std::to_string(classes_) + " classes");
        }
    } else if (features != classes_) {
        throw SpecError("headless network must end with " + std::to_string(classes_) +
                        " features, got " + std::to_string(features));
    }
}

Shape Network::node_output_shape(std::size_t index) const {
    Shape s = input_dims_;
    for (std::size_t i = 0; i <= index; ++i) {
        const LayerNode& node = nodes_.at(i);
        const std::string where = "node " + std::to_string(i) + ": ";
        node.act.validate();
        Shape pre;
        try {
            if (const auto* lin = std::get_if<LinearParams>(&node.preact)) {
                if (lin->weight.rank() != 2 || lin->weight.dim(1) != shape_size(s)) {
                    throw SpecError(where + "linear weight " + shape_string(lin->weight.shape()) +
                                    " does not accept input " + shape_string(s));
                }
                if (lin->bias.size() != lin->weight.dim(0)) {
                    throw SpecError(where + "bias length mismatch");
                }
                pre = {lin->weight.dim(0)};
            } else {
                const auto& conv = std::get<ConvParams>(node.preact);
                if (s.size() != 3 || conv.kernels.rank() != 4 || conv.kernels.dim(1) != s[0]) {
                    throw SpecError(where + "kernels " + shape_string(conv.kernels.shape()) +
                                    " do not accept input " + shape_string(s));
                }
                if (conv.bias.size() != conv.kernels.dim(0)) {
                    throw SpecError(where + "bias length mismatch");
                }
                pre = {conv.kernels.dim(0),
                       conv_output_extent(s[1], conv.kernels.dim(2), conv.stride, conv.pad),
                       conv_output_extent(s[2], conv.kernels.dim(3), conv.stride, conv.pad)};
            }
        } catch (const DimensionError& e) {
            throw SpecError(where + e.what());
        }
        const std::size_t k = node.lanes_per_unit();
        if (pre[0] % k != 0) throw SpecError(where + "lanes not divisible by maxout rank");
        if (node.bn && node.bn->features() != pre[0]) {
            throw SpecError(where + "batch norm size does not match preactivation lanes");
        }
        if (node.act.kind == ActivationKind::PReLU && node.prelu_alpha.size() != pre[0]) {
            throw SpecError(where + "PReLU needs one slope per unit");
        }
        s = pre;
        s[0] = pre[0] / k;
        for (const auto& att : node.post) {
            if (const auto* pool = std::get_if<PoolSpec>(&att)) {
                if (s.size() != 3) throw SpecError(where + "pooling needs a spatial map");
                const std::size_t wh = pool->global ? s[1] : pool->window;
                const std::size_t ww = pool->global ? s[2] : pool->window;
                const std::size_t st = pool->global ? 1 : pool->stride;
                const std::size_t pd = pool->global ? 0 : pool->pad;
                try {
                    s = {s[0], conv_output_extent(s[1], wh, st, pd),
                         conv_output_extent(s[2], ww, st, pd)};
                } catch (const DimensionError& e) {
                    throw SpecError(where + e.what());
                }
            } else {
                std::get<DropoutSpec>(att).validate();
            }
        }
    }
    return s;
}

ForwardResult Network::run(const Tensor& x, Mode mode, SeededRng* rng,
                           std::vector<BatchNormState>* updated) const {
    if (x.rank() != input_dims_.size() + 1 ||
        !std::equal(input_dims_.begin(), input_dims_.end(), x.shape().begin() + 1)) {
        throw DimensionError("network expects input " +
                             shape_string(with_batch(x.rank() ? x.dim(0) : 0, input_dims_)) +
                             ", got " + shape_string(x.shape()));
    }
    const bool train = mode == Mode::Train;
    ForwardResult r;
    r.cache.owner = this;
    r.cache.generation = generation_;
    r.cache.mode = mode;
    r.cache.nodes.reserve(nodes_.size());

    Tensor cur = x;
    for (const LayerNode& node : nodes_) {
        NodeCache nc;
        nc.input_shape = cur.shape();
        Tensor in = preact_input(node, cur);
        Tensor h = apply_preact(node, in);
        if (node.bn) {
            if (train) {
                BatchNormState s = *node.bn;
                h = batchnorm_forward(h, s, Mode::Train, &nc.bn);
                if (updated) updated->push_back(std::move(s));
            } else {
                h = batchnorm_infer(h, *node.bn);
            }
        }
        ActivationOutput a = activation_forward(
            h, node.act, node.act.kind == ActivationKind::PReLU ? &node.prelu_alpha : nullptr);
        nc.pattern = std::move(a.pattern);
        nc.pattern_shape = a.y.shape();
        if (train) {
            nc.input = std::move(in);
            nc.activation_input = std::move(h);
        }
        cur = std::move(a.y);
        nc.pools.resize(node.post.size());
        nc.masks.resize(node.post.size());
        nc.post_inputs.resize(node.post.size());
        for (std::size_t j = 0; j < node.post.size(); ++j) {
            if (const auto* pool = std::get_if<PoolSpec>(&node.post[j])) {
                PoolOutput p = pool_forward(cur, *pool);
                if (train) nc.post_inputs[j] = std::move(cur);
                if (train) {
                    nc.pools[j] = p;
                }
                cur = std::move(p.y);
            } else {
                const auto& drop = std::get<DropoutSpec>(node.post[j]);
                if (!train || drop.p == 0.0) continue;
                if (rng == nullptr) throw StateError("train-mode dropout needs a random generator");
                DropoutOutput d = dropout_forward(cur, drop, Mode::Train, *rng);
                cur = std::move(d.y);
                nc.masks[j] = std::move(d.mask);
            }
        }
        nc.output_shape = cur.shape();
        r.cache.nodes.push_back(std::move(nc));
    }
    Tensor flat = flatten_batch(std::move(cur));
    if (head_) {
        r.logits = linear_forward(flat, *head_);
        if (train) r.cache.head_input = std::move(flat);
    } else {
        r.logits = std::move(flat);
    }
    return r;
}

ForwardResult Network::evaluate(const Tensor& x, Mode mode, SeededRng* rng) const {
    return run(x, mode, rng, nullptr);
}

ForwardResult Network::forward(const Tensor& x, Mode mode, SeededRng* rng) {
    if (mode == Mode::Infer) return run(x, mode, rng, nullptr);
    std::vector<BatchNormState> updated;
    ForwardResult r = run(x, mode, rng, &updated);
    std::size_t u = 0;
    for (auto& node : nodes_) {
        if (!node.bn) continue;
        node.bn->running_mean = std::move(updated[u].running_mean);
        node.bn->running_var = std::move(updated[u].running_var);
        ++u;
    }
    r.cache.generation = ++generation_;
    return r;
}

Tensor Network::infer(const Tensor& x) const { return run(x, Mode::Infer, nullptr, nullptr).logits; }

Gradients Network::backward(const ForwardCache& cache, const Tensor& dlogits) const {
    if (cache.owner != this || cache.generation != generation_ ||
        cache.nodes.size() != nodes_.size()) {
        throw StateError("backward: cache does not belong to the current network state");
    }
    if (cache.mode != Mode::Train) throw StateError("backward needs a Train-mode forward cache");

    std::vector<std::vector<Tensor>> node_grads(nodes_.size());
    std::vector<Tensor> head_grads;
    Tensor d = dlogits;
    if (head_) {
        LinearGrads hg = linear_backward(cache.head_input, *head_, d);
        d = std::move(hg.input);
        head_grads.push_back(std::move(hg.weight));
        head_grads.push_back(std::move(hg.bias));
    }
    const std::size_t batch = dlogits.dim(0);
    for (std::size_t ii = nodes_.size(); ii-- > 0;) {
        const LayerNode& node = nodes_[ii];
        const NodeCache& nc = cache.nodes[ii];
        d = std::move(d).reshaped(nc.output_shape);
        for (std::size_t j = node.post.size(); j-- > 0;) {
            if (const auto* pool = std::get_if<PoolSpec>(&node.post[j])) {
                d = pool_backward(nc.post_inputs[j], *pool, nc.pools[j], d);
            } else {
                d = dropout_backward(nc.masks[j], d);
            }
        }
        const Tensor* alpha =
            node.act.kind == ActivationKind::PReLU ? &node.prelu_alpha : nullptr;
        ActivationGrads ag = activation_backward(nc.activation_input, node.act, alpha, nc.pattern, d);
        d = std::move(ag.input);
        Tensor dgamma, dbeta;
        if (node.bn) {
            BatchNormGrads bg = batchnorm_backward(nc.bn, *node.bn, d);
            d = std::move(bg.input);
            dgamma = std::move(bg.gamma);
            dbeta = std::move(bg.beta);
        }
        auto& out = node_grads[ii];
        if (const auto* lin = std::get_if<LinearParams>(&node.preact)) {
            LinearGrads lg = linear_backward(nc.input, *lin, d);
            d = std::move(lg.input);
            out.push_back(std::move(lg.weight));
            out.push_back(std::move(lg.bias));
        } else {
            ConvGrads cg = conv2d_backward(nc.input, std::get<ConvParams>(node.preact), d);
            d = std::move(cg.input);
            out.push_back(std::move(cg.kernels));
            out.push_back(std::move(cg.bias));
        }
        if (alpha) out.push_back(std::move(ag.alpha));
        if (node.bn) {
            out.push_back(std::move(dgamma));
            out.push_back(std::move(dbeta));
        }
        d = std::move(d).reshaped(nc.input_shape);
    }
    Gradients g;
    for (auto& ng : node_grads) {
        for (auto& t : ng) g.params.push_back(std::move(t));
    }
    for (auto& t : head_grads) g.params.push_back(std::move(t));
    g.input = std::move(d).reshaped(with_batch(batch, input_dims_));
    return g;
}

void Network::calibrate_batchnorm(const Tensor& points) {
    if (points.dim(0) == 0) throw DomainError("calibrate_batchnorm needs points");
    Tensor cur = points;
    for (LayerNode& node : nodes_) {
        Tensor h = apply_preact(node, preact_input(node, cur));
        if (node.bn) {
            Moments m = batch_moments(h);
            node.bn->running_mean = std::move(m.mean);
            node.bn->running_var = std::move(m.var);
            h = batchnorm_infer(h, *node.bn);
        }
        cur = activation_forward(h, node.act,
                                 node.act.kind == ActivationKind::PReLU ? &node.prelu_alpha
                                                                        : nullptr)
                  .y;
        for (const auto& att : node.post) {
            if (const auto* pool = std::get_if<PoolSpec>(&att)) cur = pool_forward(cur, *pool).y;
        }
    }
    ++generation_;
}

Network build_mlp(std::size_t n0, std::size_t layers, std::size_t width, const ActivationSpec& act,
                  bool with_bn, std::optional<double> dropout_p, std::size_t classes) {
    if (n0 == 0 || layers == 0 || width == 0) {
        throw SpecError("build_mlp needs n0, layers and width >= 1");
    }
    act.validate();
    if (dropout_p) DropoutSpec{*dropout_p}.validate();
    const std::size_t k = act.kind == ActivationKind::Maxout ? act.k : 1;
    std::vector<LayerNode> nodes;
    std::size_t in = n0;
    for (std::size_t l = 0; l < layers; ++l) {
        LayerNode node;
        node.preact = LinearParams{Tensor({width * k, in}), Tensor({width * k})};
        if (with_bn) node.bn = BatchNormState::identity(width * k);
        node.act = act;
        if (act.kind == ActivationKind::PReLU) node.prelu_alpha = Tensor({width}, act.alpha);
        if (dropout_p) node.post.emplace_back(DropoutSpec{*dropout_p});
        nodes.push_back(std::move(node));
        in = width;
    }
    LinearParams head{Tensor({classes, width}), Tensor({classes})};
    return Network({n0}, std::move(nodes), std::move(head), classes);
}

Network build_mim(const MimOptions& o) {
    struct Layer {
        std::size_t kernel, units, pad;
        bool class_layer;
    };
    const bool cifar = o.variant == MimVariant::Cifar;
    const std::size_t conv_units = cifar ? 192 : 128;
    const std::vector<std::vector<Layer>> blocks =
        cifar ? std::vector<std::vector<Layer>>{
                    {{5, 192, 2, false}, {1, 160, 0, false}, {1, 96, 0, false}},
                    {{5, 192, 2, false}, {1, 192, 0, false}, {1, 192, 0, false}},
                    {{3, 192, 0, false}, {1, 160, 0, false}, {1, o.classes, 0, true}}}
              : std::vector<std::vector<Layer>>{
                    {{5, conv_units, 2, false}, {1, 96, 0, false}, {1, 48, 0, false}},
                    {{5, conv_units, 2, false}, {1, 96, 0, false}, {1, 48, 0, false}},
                    {{3, conv_units, 0, false}, {1, 96, 0, false}, {1, o.classes, 0, true}}};
    if (o.classes == 0) throw SpecError("build_mim needs at least one class");
    if (!(o.width_scale > 0.0)) throw SpecError("build_mim width scale must be positive");
    o.activation.validate();
    const std::size_t k = o.activation.kind == ActivationKind::Maxout ? o.activation.k : 1;

    const Shape input = cifar ? Shape{3, 32, 32} : Shape{1, 28, 28};
    std::size_t channels = input[0];
    std::vector<LayerNode> nodes;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t l = 0; l < blocks[b].size(); ++l) {
            const Layer& spec = blocks[b][l];
            const std::size_t units =
                spec.class_layer ? spec.units : scaled_width(spec.units, o.width_scale);
            LayerNode node;
            node.preact = ConvParams{Tensor({units * k, channels, spec.kernel, spec.kernel}),
                                     Tensor({units * k}), 1, spec.pad};
            if (o.batch_norm) node.bn = BatchNormState::identity(units * k);
            node.act = o.activation;
            if (o.activation.kind == ActivationKind::PReLU) {
                node.prelu_alpha = Tensor({units}, o.activation.alpha);
            }
            const bool last_in_block = l + 1 == blocks[b].size();
            if (last_in_block && b + 1 < blocks.size()) {
                node.post.emplace_back(PoolSpec::max(3, 2, 1));
                node.post.emplace_back(DropoutSpec{o.dropout});
            } else if (last_in_block) {
                node.post.emplace_back(PoolSpec::global_avg());
            }
            nodes.push_back(std::move(node));
            channels = units;
        }
    }
    return Network(input, std::move(nodes), std::nullopt, o.classes);
}

void init_params(Network& net, SeededRng& rng, const InitScheme& scheme) {
    if (!(scheme.first_scale > 0.0) || !(scheme.rest_scale > 0.0)) {
        throw SpecError("init scales must be positive");
    }
    std::size_t layer = 0;
    auto draw = [&](Tensor& w, Tensor& b) {
        const double scale = layer == 0 ? scheme.first_scale : scheme.rest_scale;
        w = normal_sample(rng, w.shape(), scale);
        b.fill(scheme.bias);
        ++layer;
    };
    for (auto& node : net.nodes()) {
        draw(preact_weight(node), preact_bias(node));
        if (node.bn) {
            node.bn = BatchNormState::identity(node.bn->features(), node.bn->epsilon,
                                               node.bn->momentum);
        }
        if (node.act.kind == ActivationKind::PReLU) node.prelu_alpha.fill(node.act.alpha);
    }
    if (net.head()) draw(net.head()->weight, net.head()->bias);
}

}  // namespace plr
