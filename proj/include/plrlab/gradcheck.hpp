#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plr {

/// Worst analytic-vs-central-difference disagreement for one layer type.
struct GradcheckResult {
    std::string layer;
    std::size_t instances = 0;
    double max_relative_error = 0.0;
};

struct GradcheckOptions {
    std::uint64_t seed = 2024;
    std::size_t instances = 20;
    double eps = 1e-5;
    /// Instances whose activations sit closer than this to a kink are
    /// redrawn; central differences straddling a kink are meaningless.
    double kink_margin = 1e-3;
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Checks every backward kernel (linear, conv, batch norm in train mode,
/// ReLU, LReLU, PReLU, maxout, dropout with a frozen mask, max and average
/// pooling, softmax cross-entropy) and two whole networks against
/// finite_diff_grad on seeded random instances. Each check uses the scalar
/// loss sum(G * output) for a random upstream G.
std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& options = {});

}  // namespace plr
