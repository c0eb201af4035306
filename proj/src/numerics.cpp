#include "plrlab/numerics.hpp"

#include <cmath>

#include <Eigen/Core>

#include "plrlab/error.hpp"

namespace plr {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

std::size_t features_of(const Tensor& x) {
    if (x.rank() == 2) return x.dim(1);
    if (x.rank() == 4) return x.dim(1);
    throw DimensionError("batch_moments expects rank 2 or 4, got " + shape_string(x.shape()));
}

}  // namespace

void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c) {
    const auto M = static_cast<Eigen::Index>(m);
    const auto N = static_cast<Eigen::Index>(n);
    const auto K = static_cast<Eigen::Index>(k);
    MutMap cm(c, M, N);
    if (beta == 0.0) {
        cm.setZero();
    } else if (beta != 1.0) {
        cm *= beta;
    }
    if (m == 0 || n == 0 || k == 0) return;
    const bool at = ta == Transpose::Yes;
    const bool bt = tb == Transpose::Yes;
    ConstMap am(a, at ? K : M, at ? M : K);
    ConstMap bm(b, bt ? N : K, bt ? K : N);
    if (!at && !bt) {
        cm.noalias() += alpha * am * bm;
    } else if (!at && bt) {
        cm.noalias() += alpha * am * bm.transpose();
    } else if (at && !bt) {
        cm.noalias() += alpha * am.transpose() * bm;
    } else {
        cm.noalias() += alpha * am.transpose() * bm.transpose();
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul expects rank-2 operands, got " + shape_string(a.shape()) +
                             " and " + shape_string(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()));
    }
    Tensor c({a.dim(0), b.dim(1)});
    gemm(Transpose::No, Transpose::No, a.dim(0), b.dim(1), a.dim(1), 1.0, a.data(), b.data(), 0.0,
         c.data());
    return c;
}

Moments batch_moments(const Tensor& x) {
    const std::size_t features = features_of(x);
    const std::size_t batch = x.dim(0);
    const std::size_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    const std::size_t count = batch * inner;
    if (count == 0) throw DomainError("batch_moments on an empty batch");

    Moments m{Tensor({features}), Tensor({features})};
    const double* p = x.data();
    // Two passes: mean first, then centred squares.
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t f = 0; f < features; ++f) {
            const double* row = p + (n * features + f) * inner;
            double s = 0.0;
            for (std::size_t i = 0; i < inner; ++i) s += row[i];
            m.mean[f] += s;
        }
    }
    for (std::size_t f = 0; f < features; ++f) m.mean[f] /= static_cast<double>(count);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t f = 0; f < features; ++f) {
            const double* row = p + (n * features + f) * inner;
            const double mu = m.mean[f];
            double s = 0.0;
            for (std::size_t i = 0; i < inner; ++i) s += (row[i] - mu) * (row[i] - mu);
            m.var[f] += s;
        }
    }
    for (std::size_t f = 0; f < features; ++f) m.var[f] /= static_cast<double>(count);
    return m;
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
    if (!(eps > 0.0)) throw DomainError("finite_diff_grad: eps must be positive");
    Tensor probe = x;
    Tensor grad(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double up = f(probe);
        probe[i] = orig - eps;
        const double down = f(probe);
        probe[i] = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_diff_grad: non-finite function value at coordinate " +
                               std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double relative_error(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "relative_error");
    const double denom = l2_norm(a) + l2_norm(b);
    if (denom == 0.0) return 0.0;
    return l2_norm(a - b) / denom;
}

}  // namespace plr
