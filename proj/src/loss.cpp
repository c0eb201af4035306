#include <algorithm>
#include <cmath>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"

namespace plr {

LossOutput softmax_xent(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) {
        throw DimensionError("softmax_xent expects batch x classes, got " +
                             shape_string(logits.shape()));
    }
    const std::size_t batch = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != batch) throw DimensionError("softmax_xent: label count != batch size");
    if (batch == 0) throw DomainError("softmax_xent on an empty batch");

    LossOutput out{0.0, Tensor(logits.shape())};
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t n = 0; n < batch; ++n) {
        const int label = labels[n];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw DomainError("softmax_xent: label " + std::to_string(label) +
                              " outside [0, " + std::to_string(classes) + ")");
        }
        const double* row = logits.data() + n * classes;
        const double peak = *std::max_element(row, row + classes);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - peak);
        const double log_z = std::log(z) + peak;
        out.loss += (log_z - row[label]) * inv_batch;
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(row[c] - log_z);
            out.grad.at(n, c) = (p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_batch;
        }
    }
    return out;
}

}  // namespace plr
