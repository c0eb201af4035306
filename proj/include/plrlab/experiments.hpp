#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "plrlab/config.hpp"
#include "plrlab/regions.hpp"
#include "plrlab/toy.hpp"

namespace plr {

/// "relu", "lrelu", "prelu", "maxout<k>" (e.g. maxout4).
ActivationSpec parse_activation(const std::string& name);
std::string activation_label(const ActivationSpec& spec);

/// Toy-study defaults: the partition used for the shipped results and the
/// tight class balance that keeps the majority-class error near 0.5.
ToyPartitionSpec toy_partition_defaults();

struct SweepCell {
    ActivationSpec activation;
    std::size_t layers = 2;
    std::size_t width = 2;
    bool bn = true;
    double dropout = 0.0;
};

/// Toy MLP for a cell with the toy initialisation (all layers 0.01).
Network build_toy_net(const SweepCell& cell, std::uint64_t seed);

struct ToySweepConfig {
    ToyPartitionSpec partition = toy_partition_defaults();
    std::uint64_t seed = 1;  // dataset seed; run i trains with seed + i
    std::vector<std::size_t> widths{2, 4};
    std::vector<std::size_t> layers{2, 3, 4, 5, 6};
    std::vector<ActivationSpec> activations{ActivationSpec::relu(), ActivationSpec::maxout(2),
                                            ActivationSpec::maxout(4)};
    std::vector<bool> batch_norm{true, false};
    std::vector<double> dropout{0.0, 0.2};
    std::size_t runs = 5;
    TrainConfig train;
    std::size_t raster_resolution = 200;

    /// Grid in (activation, width, layers, bn, dropout) order.
    std::vector<SweepCell> cells() const;
    void validate() const;
};

struct RunOutcome {
    RunReport report;
    std::size_t train_regions = 0;  // distinct patterns over the training points
    std::size_t grid_regions = 0;   // distinct patterns over the raster grid
};

struct CellOutcome {
    SweepCell cell;
    std::vector<RunOutcome> runs;
    MultiRunReport summary;
    std::size_t best_run = 0;  // lowest final test error
    std::optional<Network> best_network;
};

struct ToySweepResult {
    std::vector<CellOutcome> cells;
};

ToySweepResult toy_sweep(const ToySweepConfig& config);

/// Degenerate-unit census of freshly initialised maxout nets on the toy
/// training set. Batch-norm nets have their running moments set to the
/// exact training-set moments first, so inference normalises as training
/// would.
struct DegeneracyRow {
    SweepCell cell;
    std::size_t run = 0;
    std::size_t degenerate_units = 0;
    std::size_t total_units = 0;

    double fraction() const {
        return total_units ? static_cast<double>(degenerate_units) / total_units : 0.0;
    }
};

std::vector<DegeneracyRow> degeneracy_at_init(const ToySweepConfig& config);

struct IllCondConfig {
    ToyPartitionSpec partition = toy_partition_defaults();
    std::uint64_t seed = 1;
    std::size_t layers = 5;
    std::size_t width = 4;
    ActivationSpec activation = ActivationSpec::maxout(2);
    std::vector<double> rates{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0, 3.0, 10.0};
    std::size_t epochs = 10;  // constant rate per run
    std::size_t runs = 5;
    TrainConfig train;

    void validate() const;
};

struct IllCondRow {
    double rate = 0.0;
    bool bn = false;
    MultiRunReport summary;
};

/// Rows ordered by rate, then bn off before bn on.
std::vector<IllCondRow> illcond_sweep(const IllCondConfig& config);

struct AblationConfig {
    ToyPartitionSpec partition = toy_partition_defaults();
    std::uint64_t seed = 1;
    std::size_t layers = 3;
    std::size_t width = 4;
    std::size_t k = 2;
    std::size_t runs = 5;
    TrainConfig train;
    // Dropout check: BN-off nets this deep, trained with this dropout.
    std::size_t dropout_layers = 5;
    double dropout = 0.2;
};

struct AblationRow {
    std::string variant;
    SweepCell cell;
    MultiRunReport summary;
};

struct AblationResult {
    std::vector<AblationRow> rows;          // relu, maxout, relu_bn, maxout_bn
    std::vector<AblationRow> dropout_rows;  // BN-off deep nets with dropout
};

AblationResult ablation(const AblationConfig& config);

struct MimRunConfig {
    std::filesystem::path mnist_dir = "/root/data/mnist";
    double width_scale = 0.25;
    std::size_t train_subset = 10000;
    std::optional<std::size_t> test_limit;  // full test set when empty
    double dropout = 0.5;
    TrainConfig train = default_train();

    static TrainConfig default_train();
};

struct MimRunResult {
    RunReport report;
    Network network;
    double seconds = 0.0;
};

/// Quarter-width MNIST MIM on a training subset, evaluated on the test set.
MimRunResult mnist_mini(const MimRunConfig& config);

struct RegionsConfig {
    ToyPartitionSpec partition = toy_partition_defaults();
    std::uint64_t seed = 1;
    SweepCell cell{ActivationSpec::maxout(4), 5, 4, true, 0.0};
    TrainConfig train;
    std::size_t resolution = 200;
    std::size_t affinity_trials = 20;
};

struct RegionsResult {
    RunReport report;
    Network network;
    RegionCensus train_census;
    DecisionRaster raster;
    std::size_t affine_regions = 0;
    std::size_t inconclusive_regions = 0;
    std::size_t non_affine_regions = 0;
};

/// Trains one toy net, then partitions its training points and a grid.
RegionsResult region_study(const RegionsConfig& config);

// Readers for the config-file sections. Keys a reader does not know stay
// unused and are rejected by Config::check_all_used.
ToyPartitionSpec read_partition(const Config& cfg, ToyPartitionSpec base);
TrainConfig read_train(const Config& cfg, TrainConfig base);
ToySweepConfig read_toy_sweep(const Config& cfg);
IllCondConfig read_illcond(const Config& cfg);
AblationConfig read_ablation(const Config& cfg);
MimRunConfig read_mim(const Config& cfg);
RegionsConfig read_regions(const Config& cfg);

}  // namespace plr
