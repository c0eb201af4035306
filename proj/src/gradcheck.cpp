#include "plrlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"
#include "plrlab/network.hpp"
#include "plrlab/numerics.hpp"

namespace plr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Check = std::function<std::optional<double>(SeededRng&, const GradcheckOptions&)>;

// Relative error with a floor on the denominator. Gradients that vanish
// exactly (a bias ahead of batch norm) otherwise compare rounding noise.
double compare(const Tensor& analytic, const Tensor& numeric_grad) {
    require_same_shape(analytic, numeric_grad, "gradcheck");
    const double denom = std::max(l2_norm(analytic) + l2_norm(numeric_grad), 1e-6);
    return l2_norm(analytic - numeric_grad) / denom;
}

Tensor randn(SeededRng& rng, const Shape& shape, double scale = 1.0) {
    return normal_sample(rng, shape, scale);
}

// Numeric gradient of sum(G * op(x)) with respect to x.
Tensor numeric(const std::function<Tensor(const Tensor&)>& op, const Tensor& G, const Tensor& x,
               double eps) {
    return finite_diff_grad([&](const Tensor& t) { return dot(G, op(t)); }, x, eps);
}

double min_abs(const Tensor& t) {
    double m = kInf;
    for (double v : t.values()) m = std::min(m, std::abs(v));
    return m;
}

// Smallest gap between the best and runner-up lane over all maxout units.
double maxout_gap(const Tensor& h, std::size_t k) {
    const std::size_t inner = h.rank() == 4 ? h.dim(2) * h.dim(3) : 1;
    const std::size_t units = h.dim(1) / k;
    double gap = kInf;
    for (std::size_t n = 0; n < h.dim(0); ++n) {
        for (std::size_t u = 0; u < units; ++u) {
            for (std::size_t i = 0; i < inner; ++i) {
                double best = -kInf, second = -kInf;
                for (std::size_t j = 0; j < k; ++j) {
                    const double v = h[((n * units + u) * k + j) * inner + i];
                    if (v > best) {
                        second = best;
                        best = v;
                    } else if (v > second) {
                        second = v;
                    }
                }
                gap = std::min(gap, best - second);
            }
        }
    }
    return gap;
}

double max_pool_gap(const Tensor& x, const PoolSpec& spec) {
    const std::size_t H = x.dim(2), W = x.dim(3);
    const std::size_t win = spec.global ? H : spec.window;
    const std::size_t stride = spec.global ? 1 : spec.stride;
    const std::size_t pad = spec.global ? 0 : spec.pad;
    const std::size_t oh = conv_output_extent(H, win, stride, pad);
    const std::size_t ow = conv_output_extent(W, win, stride, pad);
    double gap = kInf;
    for (std::size_t n = 0; n < x.dim(0); ++n) {
        for (std::size_t c = 0; c < x.dim(1); ++c) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    double best = -kInf, second = -kInf;
                    for (std::size_t i = 0; i < win; ++i) {
                        for (std::size_t j = 0; j < win; ++j) {
                            const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
                            const long xx = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
                            if (y < 0 || xx < 0 || y >= static_cast<long>(H) ||
                                xx >= static_cast<long>(W)) {
                                continue;
                            }
                            const double v = x.at(n, c, static_cast<std::size_t>(y),
                                                  static_cast<std::size_t>(xx));
                            if (v > best) {
                                second = best;
                                best = v;
                            } else if (v > second) {
                                second = v;
                            }
                        }
                    }
                    if (second > -kInf) gap = std::min(gap, best - second);
                }
            }
        }
    }
    return gap;
}

std::optional<double> check_linear(SeededRng& rng, const GradcheckOptions& o) {
    const std::size_t batch = 1 + rng.below(5), in = 1 + rng.below(6), out = 1 + rng.below(6);
    const Tensor x = randn(rng, {batch, in});
    LinearParams p{randn(rng, {out, in}), randn(rng, {out})};
    const Tensor G = randn(rng, {batch, out});
    const LinearGrads g = linear_backward(x, p, G);
    double err = compare(
        g.input, numeric([&](const Tensor& t) { return linear_forward(t, p); }, G, x, o.eps));
    err = std::max(err, compare(g.weight, numeric(
                                                     [&](const Tensor& t) {
                                                         LinearParams q{t, p.bias};
                                                         return linear_forward(x, q);
                                                     },
                                                     G, p.weight, o.eps)));
    err = std::max(err, compare(g.bias, numeric(
                                                   [&](const Tensor& t) {
                                                       LinearParams q{p.weight, t};
                                                       return linear_forward(x, q);
                                                   },
                                                   G, p.bias, o.eps)));
    return err;
}

std::optional<double> check_conv(SeededRng& rng, const GradcheckOptions& o) {
    const std::size_t batch = 1 + rng.below(2), cin = 1 + rng.below(3), cout = 1 + rng.below(4);
    const std::size_t kernel = 1 + rng.below(3), stride = 1 + rng.below(2), pad = rng.below(2);
    const std::size_t side = 4 + rng.below(4);
    const Tensor x = randn(rng, {batch, cin, side, side});
    const ConvParams p{randn(rng, {cout, cin, kernel, kernel}), randn(rng, {cout}), stride, pad};
    const Tensor y = conv2d_forward(x, p);
    const Tensor G = randn(rng, y.shape());
    const ConvGrads g = conv2d_backward(x, p, G);
    double err = compare(
        g.input, numeric([&](const Tensor& t) { return conv2d_forward(t, p); }, G, x, o.eps));
    err = std::max(err, compare(g.kernels, numeric(
                                                      [&](const Tensor& t) {
                                                          ConvParams q = p;
                                                          q.kernels = t;
                                                          return conv2d_forward(x, q);
                                                      },
                                                      G, p.kernels, o.eps)));
    err = std::max(err, compare(g.bias, numeric(
                                                   [&](const Tensor& t) {
                                                       ConvParams q = p;
                                                       q.bias = t;
                                                       return conv2d_forward(x, q);
                                                   },
                                                   G, p.bias, o.eps)));
    return err;
}

std::optional<double> check_batchnorm(SeededRng& rng, const GradcheckOptions& o) {
    const bool spatial = rng.below(2) == 1;
    const std::size_t batch = 2 + rng.below(5), features = 1 + rng.below(5);
    const Shape shape = spatial ? Shape{batch, features, 2, 3} : Shape{batch, features};
    const Tensor f = randn(rng, shape, 2.0);
    BatchNormState s = BatchNormState::identity(features);
    s.gamma = randn(rng, {features});
    s.beta = randn(rng, {features});
    const Tensor G = randn(rng, shape);
    auto run = [&](const Tensor& in, const Tensor& gamma, const Tensor& beta) {
        BatchNormState t = s;
        t.gamma = gamma;
        t.beta = beta;
        return batchnorm_forward(in, t, Mode::Train);
    };
    BatchNormState t = s;
    BatchNormCache cache;
    (void)batchnorm_forward(f, t, Mode::Train, &cache);
    const BatchNormGrads g = batchnorm_backward(cache, s, G);
    double err = compare(
        g.input, numeric([&](const Tensor& x) { return run(x, s.gamma, s.beta); }, G, f, o.eps));
    err = std::max(err, compare(g.gamma, numeric([&](const Tensor& x) {
        return run(f, x, s.beta);
    }, G, s.gamma, o.eps)));
    err = std::max(err, compare(g.beta, numeric([&](const Tensor& x) {
        return run(f, s.gamma, x);
    }, G, s.beta, o.eps)));
    return err;
}

Check check_rectifier(ActivationSpec spec) {
    return [spec](SeededRng& rng, const GradcheckOptions& o) -> std::optional<double> {
        const std::size_t batch = 1 + rng.below(5), units = 1 + rng.below(6);
        const Tensor h = randn(rng, {batch, units});
        if (min_abs(h) < o.kink_margin) return std::nullopt;
        Tensor alpha({units}, spec.alpha);
        if (spec.kind == ActivationKind::PReLU) {
            for (double& a : alpha.values()) a = rng.uniform(0.05, 0.5);
        }
        const Tensor G = randn(rng, h.shape());
        const ActivationOutput out = activation_forward(h, spec, &alpha);
        const ActivationGrads g = activation_backward(h, spec, &alpha, out.pattern, G);
        double err = compare(
            g.input,
            numeric([&](const Tensor& t) { return activation_forward(t, spec, &alpha).y; }, G, h,
                    o.eps));
        if (spec.kind == ActivationKind::PReLU) {
            const Tensor na = numeric(
                [&](const Tensor& a) { return activation_forward(h, spec, &a).y; }, G, alpha, o.eps);
            err = std::max(err, compare(g.alpha, na));
        }
        return err;
    };
}

std::optional<double> check_maxout(SeededRng& rng, const GradcheckOptions& o) {
    const std::size_t k = 2 + rng.below(3), batch = 1 + rng.below(4), units = 1 + rng.below(4);
    const Tensor h = randn(rng, {batch, units * k});
    if (maxout_gap(h, k) < o.kink_margin) return std::nullopt;
    const auto spec = ActivationSpec::maxout(k);
    const ActivationOutput out = activation_forward(h, spec);
    const Tensor G = randn(rng, out.y.shape());
    const ActivationGrads g = activation_backward(h, spec, nullptr, out.pattern, G);
    return compare(
        g.input,
        numeric([&](const Tensor& t) { return activation_forward(t, spec).y; }, G, h, o.eps));
}

std::optional<double> check_dropout(SeededRng& rng, const GradcheckOptions& o) {
    const DropoutSpec spec{rng.below(2) == 0 ? 0.0 : 0.3};
    const Tensor x = randn(rng, {4, 5});
    const Tensor G = randn(rng, x.shape());
    const SeededRng frozen = rng.derive(rng.next_u64());
    SeededRng r = frozen;
    const DropoutOutput out = dropout_forward(x, spec, Mode::Train, r);
    const Tensor dx = dropout_backward(out.mask, G);
    return compare(dx, numeric(
                                  [&](const Tensor& t) {
                                      SeededRng same = frozen;
                                      return dropout_forward(t, spec, Mode::Train, same).y;
                                  },
                                  G, x, o.eps));
}

Check check_pool(PoolKind kind) {
    return [kind](SeededRng& rng, const GradcheckOptions& o) -> std::optional<double> {
        PoolSpec spec;
        switch (rng.below(3)) {
            case 0:
                spec = PoolSpec::max(3, 2, 1);
                break;
            case 1:
                spec = PoolSpec::max(2, 2, 0);
                break;
            default:
                spec = PoolSpec::global_avg();
                break;
        }
        spec.kind = kind;
        const Tensor x = randn(rng, {1 + rng.below(2), 1 + rng.below(3), 5, 5});
        if (kind == PoolKind::Max && max_pool_gap(x, spec) < o.kink_margin) return std::nullopt;
        const PoolOutput out = pool_forward(x, spec);
        const Tensor G = randn(rng, out.y.shape());
        const Tensor dx = pool_backward(x, spec, out, G);
        return compare(
            dx, numeric([&](const Tensor& t) { return pool_forward(t, spec).y; }, G, x, o.eps));
    };
}

std::optional<double> check_softmax(SeededRng& rng, const GradcheckOptions& o) {
    const std::size_t batch = 1 + rng.below(5), classes = 2 + rng.below(8);
    const Tensor logits = randn(rng, {batch, classes}, 3.0);
    std::vector<int> labels(batch);
    for (int& l : labels) l = static_cast<int>(rng.below(classes));
    const LossOutput out = softmax_xent(logits, labels);
    const Tensor num = finite_diff_grad(
        [&](const Tensor& t) { return softmax_xent(t, labels).loss; }, logits, o.eps);
    return compare(out.grad, num);
}

// Smallest distance of any activation or max-pool input to a kink.
double network_margin(const Network& net, const ForwardCache& cache) {
    double margin = kInf;
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        const LayerNode& node = net.nodes()[i];
        const NodeCache& nc = cache.nodes[i];
        if (node.act.kind == ActivationKind::Maxout) {
            margin = std::min(margin, maxout_gap(nc.activation_input, node.act.k));
        } else if (node.act.kind != ActivationKind::Identity) {
            margin = std::min(margin, min_abs(nc.activation_input));
        }
        for (std::size_t j = 0; j < node.post.size(); ++j) {
            if (const auto* pool = std::get_if<PoolSpec>(&node.post[j])) {
                if (pool->kind == PoolKind::Max) {
                    margin = std::min(margin, max_pool_gap(nc.post_inputs[j], *pool));
                }
            }
        }
    }
    return margin;
}

std::optional<double> check_network(Network net, const Tensor& x, const std::vector<int>& labels,
                                    const GradcheckOptions& o) {
    auto loss_of = [&](const Network& n, const Tensor& in) {
        return softmax_xent(n.evaluate(in, Mode::Train).logits, labels).loss;
    };
    ForwardResult fr = net.evaluate(x, Mode::Train);
    if (network_margin(net, fr.cache) < o.kink_margin) return std::nullopt;
    const LossOutput loss = softmax_xent(fr.logits, labels);
    const Gradients g = net.backward(fr.cache, loss.grad);

    double err = compare(
        g.input, finite_diff_grad([&](const Tensor& t) { return loss_of(net, t); }, x, o.eps));
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor* slot = params[i].value;
        const Tensor num = finite_diff_grad(
            [&](const Tensor& t) {
                const Tensor saved = *slot;
                *slot = t;
                const double l = loss_of(net, x);
                *slot = saved;
                return l;
            },
            *slot, o.eps);
        err = std::max(err, compare(g.params[i], num));
    }
    return err;
}

std::optional<double> check_mlp(SeededRng& rng, const GradcheckOptions& o) {
    const ActivationSpec acts[] = {ActivationSpec::maxout(2), ActivationSpec::relu(),
                                   ActivationSpec::prelu(0.25), ActivationSpec::leaky_relu(0.1)};
    const ActivationSpec act = acts[rng.below(4)];
    const bool bn = rng.below(2) == 0;
    Network net = build_mlp(3, 2, 3, act, bn, std::nullopt, 3);
    init_params(net, rng, {0.7, 0.7, 0.0});
    for (auto& p : net.parameters()) {
        if (p.name.ends_with("bias") || p.name.ends_with("beta")) {
            *p.value = randn(rng, p.value->shape(), 0.3);
        }
    }
    const Tensor x = randn(rng, {5, 3});
    std::vector<int> labels(5);
    for (int& l : labels) l = static_cast<int>(rng.below(3));
    return check_network(std::move(net), x, labels, o);
}

std::optional<double> check_convnet(SeededRng& rng, const GradcheckOptions& o) {
    std::vector<LayerNode> nodes(2);
    nodes[0].preact = ConvParams{randn(rng, {4, 1, 3, 3}, 0.7), randn(rng, {4}, 0.3), 1, 1};
    nodes[0].bn = BatchNormState::identity(4);
    nodes[0].act = ActivationSpec::maxout(2);
    nodes[0].post = {PoolSpec::max(3, 2, 1), DropoutSpec{0.0}};
    nodes[1].preact = ConvParams{randn(rng, {6, 2, 1, 1}, 0.7), randn(rng, {6}, 0.3), 1, 0};
    nodes[1].bn = BatchNormState::identity(6);
    nodes[1].bn->gamma = randn(rng, {6});
    nodes[1].act = ActivationSpec::maxout(2);
    nodes[1].post = {PoolSpec::global_avg()};
    Network net({1, 6, 6}, std::move(nodes), std::nullopt, 3);
    const Tensor x = randn(rng, {3, 1, 6, 6});
    std::vector<int> labels(3);
    for (int& l : labels) l = static_cast<int>(rng.below(3));
    return check_network(std::move(net), x, labels, o);
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& options) {
    const std::vector<std::pair<std::string, Check>> checks = {
        {"linear", check_linear},
        {"conv2d", check_conv},
        {"batchnorm", check_batchnorm},
        {"relu", check_rectifier(ActivationSpec::relu())},
        {"lrelu", check_rectifier(ActivationSpec::leaky_relu(0.01))},
        {"prelu", check_rectifier(ActivationSpec::prelu(0.25))},
        {"maxout", check_maxout},
        {"dropout", check_dropout},
        {"maxpool", check_pool(PoolKind::Max)},
        {"avgpool", check_pool(PoolKind::Avg)},
        {"softmax_xent", check_softmax},
        {"network_mlp", check_mlp},
        {"network_conv", check_convnet},
    };
    std::vector<GradcheckResult> results;
    SeededRng root(options.seed);
    for (std::size_t c = 0; c < checks.size(); ++c) {
        SeededRng rng = root.derive(c);
        GradcheckResult r{checks[c].first, 0, 0.0};
        std::size_t attempts = 0;
        while (r.instances < options.instances) {
            if (++attempts > 100 * options.instances) {
                throw NumericError("gradcheck: could not draw kink-free instances for " + r.layer);
            }
            const std::optional<double> err = checks[c].second(rng, options);
            if (!err) continue;
            r.max_relative_error = std::max(r.max_relative_error, *err);
            ++r.instances;
        }
        results.push_back(r);
    }
    return results;
}

}  // namespace plr
