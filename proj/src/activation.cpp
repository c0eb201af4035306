#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"

namespace plr {

namespace {

struct LaneLayout {
    std::size_t batch;
    std::size_t units;
    std::size_t k;
    std::size_t inner;  // spatial positions per channel (1 for dense)
};

LaneLayout layout_of(const Tensor& h, std::size_t k) {
    if (h.rank() != 2 && h.rank() != 4) {
        throw DimensionError("activation expects rank 2 or 4, got " + shape_string(h.shape()));
    }
    if (k == 0 || h.dim(1) % k != 0) {
        throw DimensionError("activation: " + std::to_string(h.dim(1)) +
                             " lanes are not divisible into groups of " + std::to_string(k));
    }
    const std::size_t inner = h.rank() == 4 ? h.dim(2) * h.dim(3) : 1;
    return {h.dim(0), h.dim(1) / k, k, inner};
}

Shape grouped_shape(const Tensor& h, std::size_t units) {
    Shape s = h.shape();
    s[1] = units;
    return s;
}

double slope_for(const ActivationSpec& spec, const Tensor* alpha, std::size_t unit) {
    switch (spec.kind) {
        case ActivationKind::ReLU:
            return 0.0;
        case ActivationKind::LeakyReLU:
            return spec.alpha;
        case ActivationKind::PReLU:
            if (alpha == nullptr) throw SpecError("PReLU activation needs its slope tensor");
            return (*alpha)[unit];
        case ActivationKind::Identity:
            return 1.0;
        case ActivationKind::Maxout:
            break;
    }
    return 0.0;
}

}  // namespace

const char* activation_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::ReLU:
            return "relu";
        case ActivationKind::LeakyReLU:
            return "lrelu";
        case ActivationKind::PReLU:
            return "prelu";
        case ActivationKind::Maxout:
            return "maxout";
        case ActivationKind::Identity:
            return "identity";
    }
    return "?";
}

void ActivationSpec::validate() const {
    if (kind == ActivationKind::Maxout) {
        if (k < 2) throw SpecError("maxout needs rank k >= 2");
        if (k > 255) throw SpecError("maxout rank above 255 is not supported");
    } else if (k != 1) {
        throw SpecError(std::string(activation_name(kind)) + " requires k = 1");
    }
}

ActivationOutput maxout_forward(const Tensor& h, std::size_t k) {
    const LaneLayout L = layout_of(h, k);
    ActivationOutput out{Tensor(grouped_shape(h, L.units)), {}};
    out.pattern.assign(out.y.size(), 0);
    const double* src = h.data();
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t u = 0; u < L.units; ++u) {
            const double* lanes = src + (n * L.units * k + u * k) * L.inner;
            const std::size_t o = (n * L.units + u) * L.inner;
            for (std::size_t i = 0; i < L.inner; ++i) {
                double best = lanes[i];
                LaneIndex arg = 0;
                for (std::size_t j = 1; j < k; ++j) {
                    const double v = lanes[j * L.inner + i];
                    if (v > best) {
                        best = v;
                        arg = static_cast<LaneIndex>(j);
                    }
                }
                out.y[o + i] = best;
                out.pattern[o + i] = arg;
            }
        }
    }
    return out;
}

ActivationOutput activation_forward(const Tensor& h, const ActivationSpec& spec,
                                    const Tensor* alpha) {
    if (spec.kind == ActivationKind::Maxout) return maxout_forward(h, spec.k);
    const LaneLayout L = layout_of(h, 1);
    const bool linear = spec.kind == ActivationKind::Identity;
    ActivationOutput out{Tensor(h.shape()), std::vector<LaneIndex>(h.size(), 0)};
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t u = 0; u < L.units; ++u) {
            const double a = slope_for(spec, alpha, u);
            const std::size_t base = (n * L.units + u) * L.inner;
            for (std::size_t i = 0; i < L.inner; ++i) {
                const double v = h[base + i];
                const bool positive = v > 0.0;
                out.y[base + i] = positive ? v : a * v;
                out.pattern[base + i] = positive && !linear ? 1 : 0;
            }
        }
    }
    return out;
}

ActivationGrads activation_backward(const Tensor& h, const ActivationSpec& spec,
                                    const Tensor* alpha, std::span<const LaneIndex> pattern,
                                    const Tensor& dy) {
    const std::size_t k = spec.kind == ActivationKind::Maxout ? spec.k : 1;
    const LaneLayout L = layout_of(h, k);
    if (dy.shape() != grouped_shape(h, L.units) || pattern.size() != dy.size()) {
        throw DimensionError("activation_backward: gradient shape " + shape_string(dy.shape()) +
                             " does not match input " + shape_string(h.shape()));
    }
    ActivationGrads g{Tensor(h.shape()), {}};
    if (spec.kind == ActivationKind::Maxout) {
        // Only the winning lane receives the upstream gradient.
        for (std::size_t n = 0; n < L.batch; ++n) {
            for (std::size_t u = 0; u < L.units; ++u) {
                const std::size_t o = (n * L.units + u) * L.inner;
                const std::size_t lanes = (n * L.units * k + u * k) * L.inner;
                for (std::size_t i = 0; i < L.inner; ++i) {
                    g.input[lanes + pattern[o + i] * L.inner + i] = dy[o + i];
                }
            }
        }
        return g;
    }
    if (spec.kind == ActivationKind::PReLU) g.alpha = Tensor({L.units});
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t u = 0; u < L.units; ++u) {
            const double a = slope_for(spec, alpha, u);
            const std::size_t base = (n * L.units + u) * L.inner;
            for (std::size_t i = 0; i < L.inner; ++i) {
                const bool positive = pattern[base + i] != 0;
                g.input[base + i] = positive ? dy[base + i] : a * dy[base + i];
                if (!positive && spec.kind == ActivationKind::PReLU) {
                    g.alpha[u] += h[base + i] * dy[base + i];
                }
            }
        }
    }
    return g;
}

}  // namespace plr
