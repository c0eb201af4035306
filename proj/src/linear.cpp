#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"
#include "plrlab/numerics.hpp"

namespace plr {

namespace {

void check_linear(const Tensor& x, const LinearParams& p) {
    if (x.rank() != 2 || p.weight.rank() != 2) {
        throw DimensionError("linear: expected rank-2 input and weight, got " +
                             shape_string(x.shape()) + " and " + shape_string(p.weight.shape()));
    }
    if (x.dim(1) != p.weight.dim(1)) {
        throw DimensionError("linear: input width " + std::to_string(x.dim(1)) +
                             " does not match weight " + shape_string(p.weight.shape()));
    }
    if (p.bias.size() != p.weight.dim(0)) {
        throw DimensionError("linear: bias length does not match weight rows");
    }
}

}  // namespace

Tensor linear_forward(const Tensor& x, const LinearParams& p) {
    check_linear(x, p);
    const std::size_t batch = x.dim(0);
    const std::size_t out = p.weight.dim(0);
    Tensor y({batch, out});
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < out; ++o) y.at(n, o) = p.bias[o];
    }
    gemm(Transpose::No, Transpose::Yes, batch, out, x.dim(1), 1.0, x.data(), p.weight.data(), 1.0,
         y.data());
    return y;
}

LinearGrads linear_backward(const Tensor& x, const LinearParams& p, const Tensor& dy) {
    check_linear(x, p);
    const std::size_t batch = x.dim(0);
    const std::size_t in = x.dim(1);
    const std::size_t out = p.weight.dim(0);
    if (dy.shape() != Shape{batch, out}) {
        throw DimensionError("linear_backward: upstream gradient has shape " +
                             shape_string(dy.shape()));
    }
    LinearGrads g{Tensor({batch, in}), Tensor({out, in}), Tensor({out})};
    gemm(Transpose::No, Transpose::No, batch, in, out, 1.0, dy.data(), p.weight.data(), 0.0,
         g.input.data());
    gemm(Transpose::Yes, Transpose::No, out, in, batch, 1.0, dy.data(), x.data(), 0.0,
         g.weight.data());
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t o = 0; o < out; ++o) g.bias[o] += dy.at(n, o);
    }
    return g;
}

}  // namespace plr
