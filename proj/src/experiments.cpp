#include "plrlab/experiments.hpp"

#include <algorithm>
#include <chrono>

#include "plrlab/error.hpp"
#include "plrlab/mnist.hpp"
#include "plrlab/parallel.hpp"

namespace plr {

namespace {

std::optional<double> dropout_of(double p) {
    return p > 0.0 ? std::optional<double>(p) : std::nullopt;
}

std::size_t best_index(const std::vector<RunOutcome>& runs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        if (runs[i].report.final_test_error < runs[best].report.final_test_error) best = i;
    }
    return best;
}

MultiRunReport run_cell(const SweepCell& cell, const SplitDataset& data, TrainConfig train,
                        std::uint64_t seed, std::size_t runs) {
    train.seed = seed;
    return multi_run([&](std::uint64_t s) { return build_toy_net(cell, s); },
                     [&](std::uint64_t) { return data; }, train, runs);
}

}  // namespace

ActivationSpec parse_activation(const std::string& name) {
    if (name == "relu") return ActivationSpec::relu();
    if (name == "lrelu") return ActivationSpec::leaky_relu();
    if (name == "prelu") return ActivationSpec::prelu();
    if (name.rfind("maxout", 0) == 0) {
        const std::string k = name.substr(6);
        std::size_t value = 0;
        try {
            value = parse_size(k);
        } catch (const ConfigError&) {
            throw ConfigError("activation '" + name + "': maxout needs a rank, e.g. maxout4");
        }
        if (value < 2 || value > 255) throw ConfigError("activation '" + name + "': rank must be 2..255");
        return ActivationSpec::maxout(value);
    }
    throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_label(const ActivationSpec& spec) {
    switch (spec.kind) {
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
    return "unknown";
}

ToyPartitionSpec toy_partition_defaults() {
    ToyPartitionSpec p;
    p.seed = 7;
    p.chords = 12;
    p.arcs = 2;
    p.balance_lo = 0.497;
    p.balance_hi = 0.503;
    return p;
}

Network build_toy_net(const SweepCell& cell, std::uint64_t seed) {
    Network net = build_mlp(2, cell.layers, cell.width, cell.activation, cell.bn,
                            dropout_of(cell.dropout));
    SeededRng rng(seed);
    init_params(net, rng, InitScheme::toy());
    return net;
}

std::vector<SweepCell> ToySweepConfig::cells() const {
    std::vector<SweepCell> out;
    for (const auto& act : activations) {
        for (std::size_t w : widths) {
            for (std::size_t l : layers) {
                for (bool bn : batch_norm) {
                    for (double p : dropout) out.push_back({act, l, w, bn, p});
                }
            }
        }
    }
    return out;
}

void ToySweepConfig::validate() const {
    if (cells().empty()) throw ConfigError("toy sweep grid is empty");
    if (runs == 0) throw ConfigError("toy sweep needs at least one run per cell");
    for (std::size_t w : widths) {
        if (w == 0) throw ConfigError("toy sweep widths must be positive");
    }
    for (std::size_t l : layers) {
        if (l == 0) throw ConfigError("toy sweep layer counts must be positive");
    }
    for (double p : dropout) {
        if (!(p >= 0.0 && p < 1.0)) throw ConfigError("toy sweep dropout must lie in [0, 1)");
    }
    for (const auto& a : activations) a.validate();
    if (raster_resolution == 0) throw ConfigError("raster resolution must be positive");
}

ToySweepResult toy_sweep(const ToySweepConfig& config) {
    config.validate();
    const SplitDataset data = gen_toy_dataset(config.partition, config.seed);
    const Tensor grid = grid_points(Box2{}, config.raster_resolution);
    const std::vector<SweepCell> cells = config.cells();

    const std::size_t tasks = cells.size() * config.runs;
    std::vector<RunOutcome> outcomes(tasks);
    std::vector<std::optional<Network>> nets(tasks);
    parallel_for(tasks, [&](std::size_t t) {
        const SweepCell& cell = cells[t / config.runs];
        TrainConfig train = config.train;
        train.seed = config.seed + t % config.runs;
        Network net = build_toy_net(cell, train.seed);
        RunOutcome& out = outcomes[t];
        out.report = plr::train(net, data, train);
        out.train_regions = enumerate_regions(net, data.train.inputs).region_count();
        out.grid_regions = enumerate_regions(net, grid).region_count();
        nets[t] = std::move(net);
    });

    ToySweepResult result;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellOutcome cell;
        cell.cell = cells[c];
        std::vector<RunReport> reports;
        for (std::size_t r = 0; r < config.runs; ++r) {
            cell.runs.push_back(std::move(outcomes[c * config.runs + r]));
            reports.push_back(cell.runs.back().report);
        }
        cell.summary = aggregate(std::move(reports));
        cell.best_run = best_index(cell.runs);
        cell.best_network = std::move(nets[c * config.runs + cell.best_run]);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

std::vector<DegeneracyRow> degeneracy_at_init(const ToySweepConfig& config) {
    config.validate();
    const SplitDataset data = gen_toy_dataset(config.partition, config.seed);
    std::vector<SweepCell> cells;
    for (const auto& act : config.activations) {
        if (act.kind != ActivationKind::Maxout) continue;
        for (std::size_t w : config.widths) {
            for (std::size_t l : config.layers) {
                for (bool bn : config.batch_norm) cells.push_back({act, l, w, bn, 0.0});
            }
        }
    }
    std::vector<DegeneracyRow> rows(cells.size() * config.runs);
    parallel_for(rows.size(), [&](std::size_t t) {
        DegeneracyRow& row = rows[t];
        row.cell = cells[t / config.runs];
        row.run = t % config.runs;
        Network net = build_toy_net(row.cell, config.seed + row.run);
        if (row.cell.bn) net.calibrate_batchnorm(data.train.inputs);
        const RegionCensus c = census(net, data.train.inputs);
        row.degenerate_units = c.degenerate_unit_count;
        row.total_units = c.total_units;
    });
    return rows;
}

void IllCondConfig::validate() const {
    if (rates.empty()) throw ConfigError("illcond needs at least one learning rate");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] > 0.0)) throw ConfigError("illcond learning rates must be > 0");
        if (i && !(rates[i] > rates[i - 1])) {
            throw ConfigError("illcond learning rates must be sorted ascending");
        }
    }
    if (runs == 0 || epochs == 0) throw ConfigError("illcond needs runs and epochs > 0");
    activation.validate();
}

std::vector<IllCondRow> illcond_sweep(const IllCondConfig& config) {
    config.validate();
    const SplitDataset data = gen_toy_dataset(config.partition, config.seed);
    std::vector<IllCondRow> rows;
    for (double rate : config.rates) {
        for (bool bn : {false, true}) {
            TrainConfig train = config.train;
            train.schedule = {{rate, config.epochs}};
            const SweepCell cell{config.activation, config.layers, config.width, bn, 0.0};
            rows.push_back({rate, bn, run_cell(cell, data, train, config.seed, config.runs)});
        }
    }
    return rows;
}

AblationResult ablation(const AblationConfig& config) {
    if (config.runs == 0) throw ConfigError("ablation needs at least one run");
    if (config.k < 2) throw ConfigError("ablation maxout rank must be at least 2");
    const SplitDataset data = gen_toy_dataset(config.partition, config.seed);
    const ActivationSpec relu = ActivationSpec::relu();
    const ActivationSpec maxout = ActivationSpec::maxout(config.k);
    AblationResult result;
    const std::vector<std::pair<std::string, SweepCell>> variants = {
        {"relu", {relu, config.layers, config.width, false, 0.0}},
        {"maxout", {maxout, config.layers, config.width, false, 0.0}},
        {"relu_bn", {relu, config.layers, config.width, true, 0.0}},
        {"maxout_bn", {maxout, config.layers, config.width, true, 0.0}},
    };
    for (const auto& [name, cell] : variants) {
        result.rows.push_back(
            {name, cell, run_cell(cell, data, config.train, config.seed, config.runs)});
    }
    if (config.dropout > 0.0) {
        const std::vector<std::pair<std::string, SweepCell>> deep = {
            {"relu_dropout", {relu, config.dropout_layers, config.width, false, config.dropout}},
            {"maxout_dropout", {maxout, config.dropout_layers, config.width, false, config.dropout}},
        };
        for (const auto& [name, cell] : deep) {
            result.dropout_rows.push_back(
                {name, cell, run_cell(cell, data, config.train, config.seed, config.runs)});
        }
    }
    return result;
}

TrainConfig MimRunConfig::default_train() {
    TrainConfig t;
    t.batch_size = 100;
    t.schedule = {{0.1, 6}, {0.02, 3}, {0.004, 1}};
    t.momentum = 0.9;
    t.weight_decay = 1e-4;
    t.eval_chunk = 250;
    return t;
}

MimRunResult mnist_mini(const MimRunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const MnistFiles files = MnistFiles::in(config.mnist_dir);
    MnistData train = load_mnist_idx(files.train_images, files.train_labels, config.train_subset);
    MnistData test =
        load_mnist_idx(files.test_images, files.test_labels, config.test_limit, train.pixel_mean);

    MimOptions options;
    options.variant = MimVariant::Mnist;
    options.width_scale = config.width_scale;
    options.dropout = config.dropout;
    Network net = build_mim(options);
    SeededRng rng(config.train.seed);
    init_params(net, rng, InitScheme::mim());
    const SplitDataset data{std::move(train.data), std::move(test.data)};
    RunReport report = plr::train(net, data, config.train);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(report), std::move(net), seconds};
}

RegionsResult region_study(const RegionsConfig& config) {
    const SplitDataset data = gen_toy_dataset(config.partition, config.seed);
    TrainConfig train = config.train;
    train.seed = config.seed;
    Network net = build_toy_net(config.cell, train.seed);
    RunReport report = plr::train(net, data, train);

    const RegionMap map = enumerate_regions(net, data.train.inputs);
    RegionCensus train_census = census(net, map);
    DecisionRaster raster = decision_raster(net, Box2{}, config.resolution);

    std::size_t affine = 0, inconclusive = 0, non_affine = 0;
    SeededRng rng = SeededRng(config.seed).derive(0xaff);
    for (const auto& members : map.members) {
        const AffinityResult a = affinity_check(net, data.train.inputs.gather_rows(members),
                                                config.affinity_trials, rng);
        switch (a.verdict) {
            case Affinity::Affine:
                ++affine;
                break;
            case Affinity::NotAffine:
                ++non_affine;
                break;
            case Affinity::Inconclusive:
                ++inconclusive;
                break;
        }
    }
    return {std::move(report), std::move(net), std::move(train_census), std::move(raster),
            affine, inconclusive, non_affine};
}

ToyPartitionSpec read_partition(const Config& cfg, ToyPartitionSpec base) {
    base.seed = cfg.get_u64("data", "partition_seed", base.seed);
    base.chords = cfg.get_size("data", "chords", base.chords);
    base.arcs = cfg.get_size("data", "arcs", base.arcs);
    base.balance_lo = cfg.get_double("data", "balance_lo", base.balance_lo);
    base.balance_hi = cfg.get_double("data", "balance_hi", base.balance_hi);
    base.max_attempts = cfg.get_size("data", "max_attempts", base.max_attempts);
    return base;
}

TrainConfig read_train(const Config& cfg, TrainConfig base) {
    base.batch_size = cfg.get_size("train", "batch_size", base.batch_size);
    base.schedule = cfg.get_schedule("train", "schedule", base.schedule);
    base.momentum = cfg.get_double("train", "momentum", base.momentum);
    base.weight_decay = cfg.get_double("train", "weight_decay", base.weight_decay);
    base.eval_chunk = cfg.get_size("train", "eval_chunk", base.eval_chunk);
    base.seed = cfg.get_u64("", "seed", base.seed);
    return base;
}

namespace {

std::vector<ActivationSpec> read_activations(const Config& cfg, const std::string& section,
                                             const std::vector<ActivationSpec>& fallback) {
    if (!cfg.has(section, "activations")) return fallback;
    std::vector<ActivationSpec> out;
    for (const auto& name : cfg.get_strings(section, "activations", {})) {
        out.push_back(parse_activation(name));
    }
    return out;
}

std::vector<bool> read_bools(const Config& cfg, const std::string& section, const std::string& key,
                             const std::vector<bool>& fallback) {
    if (!cfg.has(section, key)) return fallback;
    std::vector<bool> out;
    for (const auto& s : cfg.get_strings(section, key, {})) out.push_back(parse_bool(s));
    return out;
}

}  // namespace

ToySweepConfig read_toy_sweep(const Config& cfg) {
    ToySweepConfig c;
    c.partition = read_partition(cfg, c.partition);
    c.seed = cfg.get_u64("", "seed", c.seed);
    c.train = read_train(cfg, c.train);
    c.widths = cfg.get_sizes("sweep", "widths", c.widths);
    c.layers = cfg.get_sizes("sweep", "layers", c.layers);
    c.activations = read_activations(cfg, "sweep", c.activations);
    c.batch_norm = read_bools(cfg, "sweep", "batch_norm", c.batch_norm);
    c.dropout = cfg.get_doubles("sweep", "dropout", c.dropout);
    c.runs = cfg.get_size("sweep", "runs", c.runs);
    c.raster_resolution = cfg.get_size("sweep", "raster_resolution", c.raster_resolution);
    c.validate();
    return c;
}

IllCondConfig read_illcond(const Config& cfg) {
    IllCondConfig c;
    c.partition = read_partition(cfg, c.partition);
    c.seed = cfg.get_u64("", "seed", c.seed);
    c.train = read_train(cfg, c.train);
    c.layers = cfg.get_size("illcond", "layers", c.layers);
    c.width = cfg.get_size("illcond", "width", c.width);
    c.activation = parse_activation(
        cfg.get_string("illcond", "activation", "maxout" + std::to_string(c.activation.k)));
    c.rates = cfg.get_doubles("illcond", "rates", c.rates);
    c.epochs = cfg.get_size("illcond", "epochs", c.epochs);
    c.runs = cfg.get_size("illcond", "runs", c.runs);
    c.validate();
    return c;
}

AblationConfig read_ablation(const Config& cfg) {
    AblationConfig c;
    c.partition = read_partition(cfg, c.partition);
    c.seed = cfg.get_u64("", "seed", c.seed);
    c.train = read_train(cfg, c.train);
    c.layers = cfg.get_size("ablation", "layers", c.layers);
    c.width = cfg.get_size("ablation", "width", c.width);
    c.k = cfg.get_size("ablation", "k", c.k);
    c.runs = cfg.get_size("ablation", "runs", c.runs);
    c.dropout_layers = cfg.get_size("ablation", "dropout_layers", c.dropout_layers);
    c.dropout = cfg.get_double("ablation", "dropout", c.dropout);
    return c;
}

MimRunConfig read_mim(const Config& cfg) {
    MimRunConfig c;
    c.train = read_train(cfg, c.train);
    c.mnist_dir = cfg.get_string("mim", "mnist_dir", c.mnist_dir.string());
    c.width_scale = cfg.get_double("mim", "width_scale", c.width_scale);
    c.train_subset = cfg.get_size("mim", "train_subset", c.train_subset);
    if (cfg.has("mim", "test_limit")) c.test_limit = cfg.get_size("mim", "test_limit", 0);
    c.dropout = cfg.get_double("mim", "dropout", c.dropout);
    if (!(c.width_scale > 0.0)) throw ConfigError("mim width_scale must be positive");
    return c;
}

RegionsConfig read_regions(const Config& cfg) {
    RegionsConfig c;
    c.partition = read_partition(cfg, c.partition);
    c.seed = cfg.get_u64("", "seed", c.seed);
    c.train = read_train(cfg, c.train);
    c.cell.activation = parse_activation(cfg.get_string("regions", "activation", "maxout4"));
    c.cell.layers = cfg.get_size("regions", "layers", c.cell.layers);
    c.cell.width = cfg.get_size("regions", "width", c.cell.width);
    c.cell.bn = cfg.get_bool("regions", "bn", c.cell.bn);
    c.cell.dropout = cfg.get_double("regions", "dropout", c.cell.dropout);
    c.resolution = cfg.get_size("regions", "resolution", c.resolution);
    c.affinity_trials = cfg.get_size("regions", "affinity_trials", c.affinity_trials);
    return c;
}

}  // namespace plr
