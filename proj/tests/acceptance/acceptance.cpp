// Acceptance suite: one [PASS]/[FAIL] line per criterion.
//
//   acceptance [--only AC4,AC9] [--out DIR]
//
// Exit status is 0 iff every selected criterion passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "plrlab/bounds.hpp"
#include "plrlab/experiments.hpp"
#include "plrlab/gradcheck.hpp"
#include "plrlab/reports.hpp"

using namespace plr;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kBnMeanTol = 1e-9;
constexpr double kBnStdRelTol = 1e-3;
constexpr double kMaxoutDeepBnMax = 0.10;
constexpr double kReluBnLo = 0.12, kReluBnHi = 0.26;
constexpr double kToyCpuHours = 2.0;
constexpr double kConvergeDrop = 0.1;
constexpr double kDegenerateBnMax = 0.05;
constexpr double kDegenerateOffMin = 0.50;
constexpr double kMimMaxTestError = 0.03;
constexpr double kMimCpuMinutes = 30.0;

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Verdict {
    bool pass;
    std::string detail;
};

struct Criterion {
    std::string id;
    std::string title;
    std::function<Verdict()> run;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path g_out = "acceptance_out";

// ---------------------------------------------------------------------------

Verdict ac1_gradients() {
    const double t0 = cpu_seconds();
    const auto results = run_gradcheck_suite({});
    const double secs = cpu_seconds() - t0;
    bool ok = secs < kGradSeconds;
    double worst = 0.0;
    std::string worst_layer;
    std::size_t min_instances = SIZE_MAX;
    std::set<std::string> seen;
    for (const auto& r : results) {
        seen.insert(r.layer);
        min_instances = std::min(min_instances, r.instances);
        if (r.max_relative_error >= worst) {
            worst = r.max_relative_error;
            worst_layer = r.layer;
        }
        ok = ok && r.max_relative_error < kGradTol && r.instances >= 20;
    }
    for (const char* need : {"linear", "conv2d", "batchnorm", "maxout", "relu", "lrelu", "prelu",
                             "dropout", "maxpool", "avgpool", "softmax_xent"}) {
        ok = ok && seen.count(need);
    }
    return {ok, fmt("%zu checks, >= %zu instances each, worst %.2e (%s), tol %.0e, %.2f s",
                    results.size(), min_instances, worst, worst_layer.c_str(), kGradTol, secs)};
}

Verdict ac2_bn_moments() {
    double worst_mean = 0.0, worst_std = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SeededRng rng(1000 + seed);
        Tensor x({100, 64});
        for (std::size_t f = 0; f < 64; ++f) {
            const double shift = rng.uniform(-5, 5), scale = rng.uniform(0.1, 10);
            for (std::size_t n = 0; n < 100; ++n) x.at(n, f) = shift + scale * rng.normal();
        }
        BatchNormState s = BatchNormState::identity(64);
        for (std::size_t f = 0; f < 64; ++f) {
            s.gamma[f] = rng.uniform(-3, 3);
            s.beta[f] = rng.uniform(-3, 3);
        }
        const Tensor y = batchnorm_forward(x, s, Mode::Train);
        for (std::size_t f = 0; f < 64; ++f) {
            double mean = 0.0;
            for (std::size_t n = 0; n < 100; ++n) mean += y.at(n, f);
            mean /= 100.0;
            double var = 0.0;
            for (std::size_t n = 0; n < 100; ++n) var += (y.at(n, f) - mean) * (y.at(n, f) - mean);
            const double sd = std::sqrt(var / 100.0);
            worst_mean = std::max(worst_mean, std::abs(mean - s.beta[f]));
            worst_std = std::max(worst_std, std::abs(sd - std::abs(s.gamma[f])) / std::abs(s.gamma[f]));
        }
    }
    return {worst_mean <= kBnMeanTol && worst_std <= kBnStdRelTol,
            fmt("10 batches of 100x64: max |mean - beta| %.1e (tol %.0e), max rel std dev %.1e "
                "(tol %.0e)",
                worst_mean, kBnMeanTol, worst_std, kBnStdRelTol)};
}

Verdict ac3_regions() {
    bool ok = true;
    std::size_t regions_total = 0, affine = 0, checked = 0, maxout_nets = 0, within_bound = 0,
                exact_nets = 0;
    std::string notes;
    const Tensor grid = grid_points(Box2{}, 200);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SeededRng rng(2000 + seed);
        const bool maxout = seed % 2 == 0;
        // Toy family: widths {2, 4}, depths 2..6, maxout rank {2, 4}.
        const std::size_t layers = 2 + seed % 5, width = 2 + 2 * (seed / 2 % 2),
                          k = 2 + 2 * (seed / 4 % 2);
        const ActivationSpec act = maxout ? ActivationSpec::maxout(k) : ActivationSpec::relu();
        Network net = build_mlp(2, layers, width, act, seed % 3 == 0);
        init_params(net, rng, {0.5, 0.5, 0.0});
        for (auto& p : net.parameters()) {
            if (!p.decay) {
                for (auto& v : p.value->values()) v = rng.uniform(-2.0, 2.0);
            }
        }
        const RegionMap m = enumerate_regions(net, grid);
        std::size_t total = 0;
        for (const auto& mem : m.members) total += mem.size();
        std::set<std::vector<LaneIndex>> distinct;
        for (const auto& p : m.patterns) distinct.insert(p.indices);
        const bool exact = total == grid.dim(0) && distinct.size() == m.region_count();
        exact_nets += exact ? 1 : 0;
        ok = ok && exact;
        for (const auto& mem : m.members) {
            if (mem.size() < 3) continue;
            ++checked;
            const AffinityResult r = affinity_check(net, grid.gather_rows(mem), 20, rng);
            if (r.verdict == Affinity::Affine) ++affine;
        }
        if (maxout) {
            const BigInt bound = maxout_region_bound(static_cast<unsigned>(layers), 2,
                                                     static_cast<unsigned>(k));
            const bool within = BigInt(m.region_count()) <= bound;
            if (!within) {
                notes += fmt(" [maxout%zu L%zu w%zu: %zu > %s]", k, layers, width, m.region_count(),
                             bound.str().c_str());
            }
            ++maxout_nets;
            within_bound += within ? 1 : 0;
            ok = ok && within;
        }
        regions_total += m.region_count();
    }
    ok = ok && affine == checked;
    return {ok, fmt("10 nets, %zu regions on 200x200 grids, %zu/10 partitions exact, %zu/%zu regions "
                    "(>= 3 points) affine at %.0e, %zu/%zu maxout counts within k^(L-1)k^n0%s",
                    regions_total, exact_nets, affine, checked, kAffinityTolerance, within_bound, maxout_nets,
                    notes.empty() ? "" : ";") + notes};
}

// The toy sweep feeds AC4 and AC6; run it once.
struct ToyRun {
    ToySweepConfig config;
    ToySweepResult result;
    double cpu_seconds = 0.0;
};

const ToyRun& toy_run() {
    static const ToyRun run = [] {
        ToyRun r;
        const double t0 = cpu_seconds();
        r.result = toy_sweep(r.config);
        r.cpu_seconds = cpu_seconds() - t0;
        fs::create_directories(g_out);
        write_text(g_out / "toy_sweep.csv", sweep_csv(r.result), true);
        write_text(g_out / "toy_sweep_regions.csv", sweep_regions_csv(r.result), true);
        return r;
    }();
    return run;
}

bool is_maxout(const SweepCell& c, std::size_t k) {
    return c.activation.kind == ActivationKind::Maxout && c.activation.k == k;
}

bool is_relu(const SweepCell& c) { return c.activation.kind == ActivationKind::ReLU; }

Verdict ac4_toy() {
    const ToyRun& run = toy_run();
    // (a)
    bool a = true;
    std::string a_vals;
    // (b), (d)
    double best_relu = 1.0, best_maxout = 1.0;
    std::string best_relu_cell, best_maxout_cell;
    // (c)
    std::size_t off_runs = 0, off_diverged = 0;
    for (const auto& cell : run.result.cells) {
        const SweepCell& c = cell.cell;
        if (is_maxout(c, 4) && c.width == 4 && c.layers >= 5 && c.bn && c.dropout == 0.0) {
            a = a && cell.summary.mean_test <= kMaxoutDeepBnMax;
            a_vals += fmt("%sL%zu %.3f", a_vals.empty() ? "" : ", ", c.layers, cell.summary.mean_test);
        }
        if (c.bn && is_relu(c) && cell.summary.mean_test < best_relu) {
            best_relu = cell.summary.mean_test;
            best_relu_cell = fmt("w%zu L%zu do%.1f", c.width, c.layers, c.dropout);
        }
        if (c.bn && c.activation.kind == ActivationKind::Maxout &&
            cell.summary.mean_test < best_maxout) {
            best_maxout = cell.summary.mean_test;
            best_maxout_cell = fmt("k%zu w%zu L%zu do%.1f", c.activation.k, c.width, c.layers, c.dropout);
        }
        if (!c.bn && c.layers >= 4) {
            for (const auto& r : cell.runs) {
                ++off_runs;
                off_diverged += r.report.diverged ? 1 : 0;
            }
        }
    }
    const bool b = best_relu >= kReluBnLo && best_relu <= kReluBnHi;
    const bool cc = off_runs > 0 && off_diverged == off_runs;
    const bool d = best_maxout < best_relu;
    const bool t = run.cpu_seconds < kToyCpuHours * 3600.0;
    std::printf("       (a) %s maxout4 w4 BN L>=5 mean test: %s (limit %.2f)\n",
                a ? "pass" : "FAIL", a_vals.c_str(), kMaxoutDeepBnMax);
    std::printf("       (b) %s best ReLU+BN cell %.3f [%s] (band [%.2f, %.2f])\n",
                b ? "pass" : "FAIL", best_relu, best_relu_cell.c_str(), kReluBnLo, kReluBnHi);
    std::printf("       (c) %s BN-off L>=4 runs flagged diverged: %zu/%zu\n", cc ? "pass" : "FAIL",
                off_diverged, off_runs);
    std::printf("       (d) %s best maxout+BN %.3f [%s] < best ReLU+BN %.3f\n", d ? "pass" : "FAIL",
                best_maxout, best_maxout_cell.c_str(), best_relu);
    return {a && b && cc && d && t,
            fmt("%zu cells x %zu runs, %.1f CPU-min (limit %.0f h)", run.result.cells.size(),
                run.config.runs, run.cpu_seconds / 60.0, kToyCpuHours)};
}

Verdict ac5_illcond() {
    const IllCondConfig config;
    const auto rows = illcond_sweep(config);
    write_text(g_out / "illcond.csv", illcond_csv(rows), true);
    std::vector<double> witnesses;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        const IllCondRow& off = rows[i];
        const IllCondRow& on = rows[i + 1];
        bool all_off = true, all_on = true;
        for (const auto& r : off.summary.runs) all_off = all_off && r.diverged;
        for (const auto& r : on.summary.runs) {
            all_on = all_on && !r.non_finite &&
                     r.train_error.front() - r.final_train_error > kConvergeDrop;
        }
        if (all_off && all_on) witnesses.push_back(off.rate);
    }
    std::string list;
    for (double r : witnesses) list += fmt("%s%g", list.empty() ? "" : " ", r);
    return {!witnesses.empty(),
            fmt("L=%zu w=%zu maxout%zu, %zu rates x %zu runs; rates where BN-off all diverge and "
                "BN-on all drop > %.1f: {%s}",
                config.layers, config.width, config.activation.k, config.rates.size(), config.runs,
                kConvergeDrop, list.c_str())};
}

Verdict ac6_degeneracy() {
    const ToySweepConfig& config = toy_run().config;
    const auto rows = degeneracy_at_init(config);
    write_text(g_out / "degeneracy.csv", degeneracy_csv(rows), true);
    double worst_on = 0.0, lowest_off = 1.0;
    std::size_t off_nets = 0, off_ok = 0;
    for (const auto& row : rows) {
        if (row.cell.bn) {
            worst_on = std::max(worst_on, row.fraction());
        } else if (row.cell.layers >= 4) {
            ++off_nets;
            off_ok += row.fraction() > kDegenerateOffMin ? 1 : 0;
            lowest_off = std::min(lowest_off, row.fraction());
        }
    }
    const bool on = worst_on < kDegenerateBnMax;
    const bool off = off_ok == off_nets;
    std::printf("       BN on  %s worst degenerate fraction %.3f (limit < %.2f)\n",
                on ? "pass" : "FAIL", worst_on, kDegenerateBnMax);
    std::printf("       BN off %s L>=4 nets above %.2f: %zu/%zu (lowest %.3f)\n",
                off ? "pass" : "FAIL", kDegenerateOffMin, off_ok, off_nets, lowest_off);
    return {on && off, fmt("%zu maxout nets at initialisation", rows.size())};
}

Verdict ac7_ablation() {
    const AblationConfig config;
    const AblationResult r = ablation(config);
    write_text(g_out / "ablation.csv", ablation_csv(r.rows), true);
    write_text(g_out / "ablation_dropout.csv", ablation_csv(r.dropout_rows), true);
    auto mean = [&](const std::string& v) {
        for (const auto& row : r.rows)
            if (row.variant == v) return row.summary.mean_test;
        return 1.0;
    };
    const double relu = mean("relu"), relu_bn = mean("relu_bn"), maxout_bn = mean("maxout_bn");
    for (const auto& row : r.dropout_rows) {
        std::size_t diverged = 0;
        for (const auto& run : row.summary.runs) diverged += run.diverged ? 1 : 0;
        std::printf("       info: %s (L=%zu, p=%.1f, BN off) diverged %zu/%zu runs\n",
                    row.variant.c_str(), row.cell.layers, row.cell.dropout, diverged,
                    row.summary.runs.size());
    }
    return {maxout_bn < relu_bn && relu_bn < relu,
            fmt("L=%zu w=%zu: maxout+BN %.3f < ReLU+BN %.3f < ReLU %.3f (maxout %.3f)",
                config.layers, config.width, maxout_bn, relu_bn, relu, mean("maxout"))};
}

Verdict ac8_mim() {
    if (!fs::exists(MimRunConfig{}.mnist_dir)) return {false, "MNIST files not found"};
    const MimRunConfig config;
    const double t0 = cpu_seconds();
    const MimRunResult r = mnist_mini(config);
    const double minutes = (cpu_seconds() - t0) / 60.0;
    write_text(g_out / "mim_epochs.csv", epochs_csv(r.report), true);

    // Determinism: the first epoch again, from scratch.
    MimRunConfig first = config;
    first.train.schedule = {{config.train.schedule.front().rate, 1}};
    const MimRunResult again = mnist_mini(first);
    const bool same = again.report.train_error[1] == r.report.train_error[1] &&
                      again.report.test_error[1] == r.report.test_error[1] &&
                      again.report.mean_loss[0] == r.report.mean_loss[0];
    const bool ok = r.report.final_test_error <= kMimMaxTestError && minutes < kMimCpuMinutes &&
                    r.report.train_error.size() == 11 && same;
    return {ok, fmt("test error %.4f after %zu epochs (limit %.2f), %.1f CPU-min (limit %.0f), "
                    "epoch-1 rerun %s",
                    r.report.final_test_error, r.report.train_error.size() - 1, kMimMaxTestError,
                    minutes, kMimCpuMinutes, same ? "identical" : "DIFFERS")};
}

Verdict ac9_determinism() {
    const fs::path root = g_out / "determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    struct Job {
        std::string command;
        std::string config;
    };
    const std::vector<Job> jobs = {
        {"toy-sweep",
         "seed = 3\n[train]\nschedule = 0.0005:2, 0.0001:1\n[sweep]\nactivations = relu, maxout4\n"
         "widths = 4\nlayers = 2, 4\nbatch_norm = on, off\ndropout = 0, 0.2\nruns = 2\n"
         "raster_resolution = 64\n"},
        {"illcond", "seed = 3\n[illcond]\nrates = 0.001, 1\nepochs = 2\nruns = 2\n"},
        {"ablation", "seed = 3\n[train]\nschedule = 0.0005:2\n[ablation]\nruns = 2\n"},
        {"regions", "seed = 3\n[train]\nschedule = 0.0005:2\n[regions]\nresolution = 64\n"},
        {"train-mim",
         "seed = 3\n[train]\nschedule = 0.05:1\n[mim]\ntrain_subset = 300\ntest_limit = 200\n"},
    };
    std::size_t files = 0, identical = 0;
    std::string failures;
    for (const Job& job : jobs) {
        if (job.command == "train-mim" && !fs::exists(MimRunConfig{}.mnist_dir)) continue;
        const fs::path cfg = root / (job.command + ".cfg");
        std::ofstream(cfg) << job.config;
        for (const char* rep : {"a", "b"}) {
            std::ostringstream out, err;
            const int code = run_cli({"plrlab", job.command, "-c", cfg.string(), "-o",
                                      (root / job.command / rep).string()},
                                     out, err);
            if (code != kExitOk) failures += " " + job.command + " exit " + std::to_string(code);
        }
        for (const auto& e : fs::recursive_directory_iterator(root / job.command / "a")) {
            if (!e.is_regular_file()) continue;
            const auto ext = e.path().extension();
            if (ext != ".csv" && ext != ".ppm") continue;
            ++files;
            const fs::path twin = root / job.command / "b" / fs::relative(e.path(), root / job.command / "a");
            if (fs::exists(twin) && slurp(e.path()) == slurp(twin)) {
                ++identical;
            } else {
                failures += " " + e.path().filename().string();
            }
        }
    }
    return {failures.empty() && files > 0 && identical == files,
            fmt("%zu CSV/PPM files from %zu commands, %zu byte-identical on rerun%s%s", files,
                jobs.size(), identical, failures.empty() ? "" : "; mismatches:",
                failures.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::string only;
    std::string out = g_out.string();
    app.add_option("--only", only, "Comma-separated criterion ids, e.g. AC1,AC9");
    app.add_option("--out", out, "Directory for result CSVs")->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    g_out = out;
    fs::create_directories(g_out);

    const std::vector<Criterion> all = {
        {"AC1", "gradient oracle suite", ac1_gradients},
        {"AC2", "batch-norm moment invariant", ac2_bn_moments},
        {"AC3", "region partition and affinity", ac3_regions},
        {"AC4", "toy study", ac4_toy},
        {"AC5", "ill-conditioning sweep", ac5_illcond},
        {"AC6", "degeneracy at initialisation", ac6_degeneracy},
        {"AC7", "ablation ordering", ac7_ablation},
        {"AC8", "mini MIM on MNIST", ac8_mim},
        {"AC9", "determinism", ac9_determinism},
    };
    std::set<std::string> selected;
    for (const auto& id : CLI::detail::split(only, ',')) {
        if (!id.empty()) selected.insert(id);
    }

    std::size_t failed = 0, ran = 0;
    for (const auto& c : all) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += v.pass ? 0 : 1;
        std::printf("[%s] %s %s: %s (%.0f s)\n", v.pass ? "PASS" : "FAIL", c.id.c_str(),
                    c.title.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", ran - failed, ran);
    return failed ? 1 : 0;
}
