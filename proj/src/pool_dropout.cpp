#include <limits>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"

namespace plr {

void DropoutSpec::validate() const {
    if (!(p >= 0.0 && p < 1.0)) throw SpecError("dropout probability must lie in [0, 1)");
}

DropoutOutput dropout_forward(const Tensor& x, const DropoutSpec& spec, Mode mode,
                              SeededRng& rng) {
    spec.validate();
    if (mode == Mode::Infer || spec.p == 0.0) {
        return {x, mode == Mode::Infer ? Tensor() : Tensor(x.shape(), 1.0)};
    }
    DropoutOutput out{Tensor(x.shape()), Tensor(x.shape())};
    const double keep_scale = 1.0 / (1.0 - spec.p);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = rng.uniform() < spec.p ? 0.0 : keep_scale;
        out.mask[i] = m;
        out.y[i] = m * x[i];
    }
    return out;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& dy) {
    if (mask.empty()) return dy;
    require_same_shape(mask, dy, "dropout_backward");
    Tensor dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask[i] * dy[i];
    return dx;
}

namespace {

struct PoolGeometry {
    std::size_t batch, channels, in_h, in_w, win_h, win_w, stride, pad, out_h, out_w;
};

PoolGeometry pool_geometry(const Tensor& x, const PoolSpec& spec) {
    if (x.rank() != 4) {
        throw DimensionError("pooling expects a rank-4 tensor, got " + shape_string(x.shape()));
    }
    PoolGeometry g{};
    g.batch = x.dim(0);
    g.channels = x.dim(1);
    g.in_h = x.dim(2);
    g.in_w = x.dim(3);
    if (spec.global) {
        g.win_h = g.in_h;
        g.win_w = g.in_w;
        g.stride = 1;
        g.pad = 0;
    } else {
        if (spec.window == 0) throw DimensionError("pooling window must be positive");
        g.win_h = g.win_w = spec.window;
        g.stride = spec.stride;
        g.pad = spec.pad;
        if (g.pad >= spec.window) throw DimensionError("pooling pad must be smaller than window");
    }
    g.out_h = conv_output_extent(g.in_h, g.win_h, g.stride, g.pad);
    g.out_w = conv_output_extent(g.in_w, g.win_w, g.stride, g.pad);
    return g;
}

}  // namespace

PoolOutput pool_forward(const Tensor& x, const PoolSpec& spec) {
    const PoolGeometry g = pool_geometry(x, spec);
    PoolOutput out{Tensor({g.batch, g.channels, g.out_h, g.out_w}), {}};
    if (spec.kind == PoolKind::Max) out.argmax.assign(out.y.size(), 0);
    const double area = static_cast<double>(g.win_h * g.win_w);
    std::size_t o = 0;
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t c = 0; c < g.channels; ++c) {
            const std::size_t plane = (n * g.channels + c) * g.in_h * g.in_w;
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox, ++o) {
                    const long y0 = static_cast<long>(oy * g.stride) - static_cast<long>(g.pad);
                    const long x0 = static_cast<long>(ox * g.stride) - static_cast<long>(g.pad);
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_at = 0;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.win_h; ++i) {
                        const long y = y0 + static_cast<long>(i);
                        if (y < 0 || y >= static_cast<long>(g.in_h)) continue;
                        for (std::size_t j = 0; j < g.win_w; ++j) {
                            const long xx = x0 + static_cast<long>(j);
                            if (xx < 0 || xx >= static_cast<long>(g.in_w)) continue;
                            const std::size_t at = plane +
                                                   static_cast<std::size_t>(y) * g.in_w +
                                                   static_cast<std::size_t>(xx);
                            const double v = x[at];
                            acc += v;
                            if (v > best) {
                                best = v;
                                best_at = at;
                            }
                        }
                    }
                    if (spec.kind == PoolKind::Max) {
                        out.y[o] = best;
                        out.argmax[o] = best_at;
                    } else {
                        out.y[o] = acc / area;
                    }
                }
            }
        }
    }
    return out;
}

Tensor pool_backward(const Tensor& x, const PoolSpec& spec, const PoolOutput& out,
                     const Tensor& dy) {
    const PoolGeometry g = pool_geometry(x, spec);
    require_same_shape(out.y, dy, "pool_backward");
    Tensor dx(x.shape());
    if (spec.kind == PoolKind::Max) {
        for (std::size_t o = 0; o < dy.size(); ++o) dx[out.argmax[o]] += dy[o];
        return dx;
    }
    const double area = static_cast<double>(g.win_h * g.win_w);
    std::size_t o = 0;
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t c = 0; c < g.channels; ++c) {
            const std::size_t plane = (n * g.channels + c) * g.in_h * g.in_w;
            for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                for (std::size_t ox = 0; ox < g.out_w; ++ox, ++o) {
                    const long y0 = static_cast<long>(oy * g.stride) - static_cast<long>(g.pad);
                    const long x0 = static_cast<long>(ox * g.stride) - static_cast<long>(g.pad);
                    const double share = dy[o] / area;
                    for (std::size_t i = 0; i < g.win_h; ++i) {
                        const long y = y0 + static_cast<long>(i);
                        if (y < 0 || y >= static_cast<long>(g.in_h)) continue;
                        for (std::size_t j = 0; j < g.win_w; ++j) {
                            const long xx = x0 + static_cast<long>(j);
                            if (xx < 0 || xx >= static_cast<long>(g.in_w)) continue;
                            dx[plane + static_cast<std::size_t>(y) * g.in_w +
                               static_cast<std::size_t>(xx)] += share;
                        }
                    }
                }
            }
        }
    }
    return dx;
}

}  // namespace plr
