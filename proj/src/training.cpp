#include "plrlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "plrlab/error.hpp"
#include "plrlab/parallel.hpp"

namespace plr {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348u;
constexpr std::uint64_t kDropoutStream = 0x4452u;

void validate(const Network& net, const SplitDataset& data, const TrainConfig& config) {
    if (data.train.size() == 0) throw DomainError("train: empty training set");
    if (data.train.inputs.dim(0) != data.train.size() ||
        (data.test.size() && data.test.inputs.dim(0) != data.test.size())) {
        throw DimensionError("train: inputs and labels disagree in length");
    }
    if (config.batch_size == 0 || config.batch_size > data.train.size()) {
        throw DomainError("train: batch size must be in [1, training set size]");
    }
    if (net.has_batchnorm() && config.batch_size < 2) {
        throw DomainError("train: batch norm needs batches of at least 2");
    }
    for (const auto& phase : config.schedule) {
        if (!(phase.rate >= 0.0)) throw DomainError("train: learning rates must be >= 0");
    }
    if (!(config.momentum >= 0.0) || !(config.weight_decay >= 0.0)) {
        throw DomainError("train: momentum and weight decay must be >= 0");
    }
}

std::vector<std::size_t> shuffled(std::size_t n, SeededRng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::size_t TrainConfig::total_epochs() const {
    std::size_t n = 0;
    for (const auto& p : schedule) n += p.epochs;
    return n;
}

SgdState SgdState::zeros_like(const Network& net) {
    SgdState s;
    for (const auto& p : net.parameters()) s.velocity.emplace_back(p.value->shape());
    return s;
}

void sgd_step(std::span<const ParamRef> params, std::span<const Tensor> grads, SgdState& state,
              double lr, double momentum, double weight_decay) {
    if (params.size() != grads.size() || params.size() != state.velocity.size()) {
        throw DimensionError("sgd_step: parameter, gradient and velocity counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].value;
        Tensor& v = state.velocity[i];
        require_same_shape(p, grads[i], "sgd_step");
        require_same_shape(p, v, "sgd_step");
        const double decay = params[i].decay ? weight_decay : 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = momentum * v[j] - lr * (grads[i][j] + decay * p[j]);
            p[j] += v[j];
        }
    }
}

double classification_error(const Network& net, const Dataset& data, std::size_t chunk) {
    if (data.size() == 0) return 0.0;
    chunk = std::max<std::size_t>(chunk, 1);
    std::size_t wrong = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
        const std::size_t end = std::min(data.size(), begin + chunk);
        const Tensor logits = net.infer(data.inputs.slice_rows(begin, end));
        const std::size_t classes = logits.dim(1);
        for (std::size_t n = 0; n < end - begin; ++n) {
            const double* row = logits.data() + n * classes;
            bool finite = true;
            std::size_t best = 0;
            for (std::size_t c = 0; c < classes; ++c) {
                if (!std::isfinite(row[c])) finite = false;
                if (row[c] > row[best]) best = c;
            }
            if (!finite || static_cast<int>(best) != data.labels[begin + n]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

RunReport train(Network& net, const SplitDataset& data, const TrainConfig& config) {
    validate(net, data, config);
    if (config.dropout) net.set_dropout(*config.dropout);

    const SeededRng root(config.seed);
    SeededRng shuffle_rng = root.derive(kShuffleStream);
    SeededRng dropout_rng = root.derive(kDropoutStream);
    SgdState sgd = SgdState::zeros_like(net);

    RunReport report;
    auto evaluate = [&] {
        report.train_error.push_back(classification_error(net, data.train, config.eval_chunk));
        report.test_error.push_back(classification_error(net, data.test, config.eval_chunk));
    };
    evaluate();

    const std::size_t n = data.train.size();
    for (const LrPhase& phase : config.schedule) {
        for (std::size_t epoch = 0; epoch < phase.epochs && !report.non_finite; ++epoch) {
            const std::vector<std::size_t> order = shuffled(n, shuffle_rng);
            double loss_sum = 0.0;
            std::size_t batches = 0;
            for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
                const std::size_t end = std::min(n, begin + config.batch_size);
                // A trailing batch too small for batch statistics is skipped.
                if (end - begin < 2 && net.has_batchnorm()) break;
                const std::span<const std::size_t> rows(order.data() + begin, end - begin);
                const Tensor xb = data.train.inputs.gather_rows(rows);
                std::vector<int> yb(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) yb[i] = data.train.labels[rows[i]];

                ForwardResult fr = net.forward(xb, Mode::Train, &dropout_rng);
                const LossOutput loss = softmax_xent(fr.logits, yb);
                if (!std::isfinite(loss.loss)) {
                    report.non_finite = true;
                    break;
                }
                loss_sum += loss.loss;
                ++batches;
                const Gradients g = net.backward(fr.cache, loss.grad);
                auto params = net.parameters();
                sgd_step(params, g.params, sgd, phase.rate, config.momentum, config.weight_decay);
            }
            report.mean_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
            evaluate();
        }
        if (report.non_finite) break;
    }
    report.final_train_error = report.train_error.back();
    report.final_test_error = report.test_error.back();
    report.diverged = report.non_finite ||
                      report.final_train_error >= report.train_error.front() - kDivergenceMargin;
    return report;
}

MultiRunReport aggregate(std::vector<RunReport> runs) {
    MultiRunReport m;
    m.runs = std::move(runs);
    if (m.runs.empty()) return m;
    std::vector<double> tr, te;
    for (const auto& r : m.runs) {
        tr.push_back(r.final_train_error);
        te.push_back(r.final_test_error);
    }
    m.mean_train = mean_of(tr);
    m.mean_test = mean_of(te);
    m.std_train = sample_std(tr, m.mean_train);
    m.std_test = sample_std(te, m.mean_test);
    return m;
}

MultiRunReport multi_run(const NetworkBuilder& build, const DatasetBuilder& data,
                         const TrainConfig& config, std::size_t n_runs) {
    if (n_runs == 0) throw DomainError("multi_run needs at least one run");
    std::vector<RunReport> runs(n_runs);
    parallel_for(n_runs, [&](std::size_t i) {
        TrainConfig c = config;
        c.seed = config.seed + i;
        Network net = build(c.seed);
        const SplitDataset d = data(c.seed);
        runs[i] = train(net, d, c);
    });
    return aggregate(std::move(runs));
}

}  // namespace plr
