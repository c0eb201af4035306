#pragma once

#include <functional>

#include "plrlab/tensor.hpp"

namespace plr {

/// Rank-2 matrix product a * b.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Transpose { No, Yes };

/// c = alpha * op(a) * op(b) + beta * c on raw row-major buffers.
///
/// op(a) is m x k, op(b) is k x n, c is m x n. This is the single GEMM entry
/// point used by the dense and convolution kernels.
void gemm(Transpose ta, Transpose tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, const double* b, double beta, double* c);

struct Moments {
    Tensor mean;
    Tensor var;  // population variance (divide by N)
};

/// Per-feature mean and population variance.
///
/// Rank-2 input (batch x features) reduces over the batch axis. Rank-4 input
/// (batch x channels x h x w) reduces per channel over batch and space.
Moments batch_moments(const Tensor& x);

/// Central-difference gradient of a scalar function.
///
/// Each coordinate is perturbed by +-eps in turn; throws NumericError if f
/// returns a non-finite value.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps = 1e-5);

/// ||a - b|| / (||a|| + ||b||), or 0 when both are exactly zero.
double relative_error(const Tensor& a, const Tensor& b);

}  // namespace plr
