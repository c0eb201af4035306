#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "plrlab/network.hpp"

namespace plr {

struct Dataset {
    Tensor inputs;  // batch axis first
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

struct SplitDataset {
    Dataset train;
    Dataset test;
};

/// Piecewise-constant learning-rate phase.
struct LrPhase {
    double rate;
    std::size_t epochs;
};

struct TrainConfig {
    std::size_t batch_size = 100;
    std::vector<LrPhase> schedule{{0.0005, 20}, {0.0001, 20}};
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    std::optional<double> dropout;  // overrides every dropout attachment
    std::size_t eval_chunk = 2000;

    std::size_t total_epochs() const;
};

/// Momentum buffers, one per parameter tensor, starting at zero.
struct SgdState {
    std::vector<Tensor> velocity;

    static SgdState zeros_like(const Network& net);
};

/// v <- momentum * v - lr * (g + weight_decay * p); p <- p + v.
/// Weight decay only touches parameters flagged `decay`.
void sgd_step(std::span<const ParamRef> params, std::span<const Tensor> grads, SgdState& state,
              double lr, double momentum, double weight_decay);

struct RunReport {
    // Index 0 is the evaluation before any update; index e is after epoch e.
    std::vector<double> train_error;
    std::vector<double> test_error;
    std::vector<double> mean_loss;  // per epoch, index e-1 for epoch e
    double final_train_error = 0.0;
    double final_test_error = 0.0;
    bool non_finite = false;
    bool diverged = false;
};

/// Fraction of examples whose argmax logit differs from the label; an
/// example with a non-finite logit counts as an error.
double classification_error(const Network& net, const Dataset& data, std::size_t chunk = 2000);

/// A run is diverged when a loss went non-finite or the final train error
/// did not fall at least this far below the initial one.
inline constexpr double kDivergenceMargin = 0.02;

/// Minibatch SGD over the schedule with a seeded per-epoch shuffle.
///
/// Errors are measured in Infer mode before training and after each epoch.
/// A non-finite loss stops training and marks the run diverged.
RunReport train(Network& net, const SplitDataset& data, const TrainConfig& config);

struct MultiRunReport {
    std::vector<RunReport> runs;
    double mean_train = 0.0;
    double std_train = 0.0;
    double mean_test = 0.0;
    double std_test = 0.0;
};

/// Mean and sample standard deviation (n - 1; 0 for a single run) of the
/// final errors.
MultiRunReport aggregate(std::vector<RunReport> runs);

using NetworkBuilder = std::function<Network(std::uint64_t seed)>;
using DatasetBuilder = std::function<SplitDataset(std::uint64_t seed)>;

/// Run i uses seed config.seed + i for initialisation, data and shuffling.
/// Runs may execute concurrently; results are kept in run order.
MultiRunReport multi_run(const NetworkBuilder& build, const DatasetBuilder& data,
                         const TrainConfig& config, std::size_t n_runs);

}  // namespace plr
