#include <cmath>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"
#include "plrlab/numerics.hpp"

namespace plr {

namespace {

struct FeatureLayout {
    std::size_t batch;
    std::size_t features;
    std::size_t inner;
};

FeatureLayout layout_of(const Tensor& f, const BatchNormState& s) {
    if (f.rank() != 2 && f.rank() != 4) {
        throw DimensionError("batchnorm expects rank 2 or 4, got " + shape_string(f.shape()));
    }
    if (f.dim(1) != s.features()) {
        throw DimensionError("batchnorm: " + std::to_string(f.dim(1)) + " features, state has " +
                             std::to_string(s.features()));
    }
    return {f.dim(0), f.dim(1), f.rank() == 4 ? f.dim(2) * f.dim(3) : 1};
}

Tensor normalize(const Tensor& f, const FeatureLayout& L, const BatchNormState& s,
                 const Tensor& mean, const std::vector<double>& inv_std, Tensor* normalized) {
    Tensor h(f.shape());
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t c = 0; c < L.features; ++c) {
            const std::size_t base = (n * L.features + c) * L.inner;
            const double mu = mean[c];
            const double is = inv_std[c];
            const double g = s.gamma[c];
            const double b = s.beta[c];
            for (std::size_t i = 0; i < L.inner; ++i) {
                const double xhat = (f[base + i] - mu) * is;
                if (normalized) (*normalized)[base + i] = xhat;
                h[base + i] = g * xhat + b;
            }
        }
    }
    return h;
}

}  // namespace

BatchNormState BatchNormState::identity(std::size_t features, double epsilon, double momentum) {
    BatchNormState s;
    s.gamma = Tensor({features}, 1.0);
    s.beta = Tensor({features}, 0.0);
    s.running_mean = Tensor({features}, 0.0);
    s.running_var = Tensor({features}, 1.0);
    s.epsilon = epsilon;
    s.momentum = momentum;
    return s;
}

Tensor batchnorm_infer(const Tensor& f, const BatchNormState& s) {
    const FeatureLayout L = layout_of(f, s);
    std::vector<double> inv_std(L.features);
    for (std::size_t c = 0; c < L.features; ++c) {
        inv_std[c] = 1.0 / std::sqrt(s.running_var[c] + s.epsilon);
    }
    return normalize(f, L, s, s.running_mean, inv_std, nullptr);
}

Tensor batchnorm_forward(const Tensor& f, BatchNormState& s, Mode mode, BatchNormCache* cache) {
    if (mode == Mode::Infer) return batchnorm_infer(f, s);
    const FeatureLayout L = layout_of(f, s);
    if (L.batch < 2) throw DomainError("batchnorm: train mode needs a batch of at least 2");
    const Moments m = batch_moments(f);
    std::vector<double> inv_std(L.features);
    for (std::size_t c = 0; c < L.features; ++c) {
        inv_std[c] = 1.0 / std::sqrt(m.var[c] + s.epsilon);
    }
    Tensor normalized(f.shape());
    Tensor h = normalize(f, L, s, m.mean, inv_std, &normalized);
    for (std::size_t c = 0; c < L.features; ++c) {
        s.running_mean[c] = (1.0 - s.momentum) * s.running_mean[c] + s.momentum * m.mean[c];
        s.running_var[c] = (1.0 - s.momentum) * s.running_var[c] + s.momentum * m.var[c];
    }
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return h;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const BatchNormState& s,
                                  const Tensor& dy) {
    require_same_shape(cache.normalized, dy, "batchnorm_backward");
    const FeatureLayout L = layout_of(dy, s);
    const double count = static_cast<double>(L.batch * L.inner);
    BatchNormGrads g{Tensor(dy.shape()), Tensor({L.features}), Tensor({L.features})};
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t c = 0; c < L.features; ++c) {
            const std::size_t base = (n * L.features + c) * L.inner;
            for (std::size_t i = 0; i < L.inner; ++i) {
                g.beta[c] += dy[base + i];
                g.gamma[c] += dy[base + i] * cache.normalized[base + i];
            }
        }
    }
    for (std::size_t n = 0; n < L.batch; ++n) {
        for (std::size_t c = 0; c < L.features; ++c) {
            const std::size_t base = (n * L.features + c) * L.inner;
            const double scale = s.gamma[c] * cache.inv_std[c] / count;
            for (std::size_t i = 0; i < L.inner; ++i) {
                g.input[base + i] = scale * (count * dy[base + i] - g.beta[c] -
                                             cache.normalized[base + i] * g.gamma[c]);
            }
        }
    }
    return g;
}

}  // namespace plr
