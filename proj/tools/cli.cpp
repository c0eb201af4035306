#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>

#include "plrlab/error.hpp"
#include "plrlab/experiments.hpp"
#include "plrlab/gradcheck.hpp"
#include "plrlab/raster.hpp"
#include "plrlab/reports.hpp"
#include "plrlab/snapshot.hpp"

namespace plr {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string config;
    std::string out = "runs";
    std::optional<std::uint64_t> seed;
    std::string mnist_dir;
    bool force = false;
    bool verbose = false;
};

class Session {
public:
    Session(const Options& o, std::ostream& out) : opt_(o), out_(out) {}

    Config config() const {
        Config cfg = opt_.config.empty() ? Config::parse("", "<defaults>") : Config::load(opt_.config);
        if (opt_.seed) cfg.set("", "seed", std::to_string(*opt_.seed));
        return cfg;
    }

    fs::path path(const std::string& name) const { return fs::path(opt_.out) / name; }

    /// Refuses to start when any declared output already exists.
    void reserve(const std::vector<fs::path>& paths) const {
        for (const auto& p : paths) check_writable(p, opt_.force);
        for (const auto& p : paths) {
            std::error_code ec;
            fs::create_directories(p.parent_path(), ec);
            if (ec) {
                throw IoError(p.parent_path().string() + ": cannot create directory: " +
                              ec.message());
            }
        }
    }

    void text(const fs::path& p, const std::string& body) const {
        write_text(p, body, true);
        wrote(p);
    }

    void wrote(const fs::path& p) const { out_ << "wrote " << p.string() << "\n"; }

    void note(const std::string& line) const {
        if (opt_.verbose) out_ << line << "\n";
    }

    std::ostream& out() const { return out_; }

private:
    const Options& opt_;
    std::ostream& out_;
};

std::string cell_stem(const SweepCell& c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s%zu_L%zu_w%zu_bn%s_do%.2f",
                  activation_label(c.activation).c_str(),
                  c.activation.kind == ActivationKind::Maxout ? c.activation.k : std::size_t{1},
                  c.layers, c.width, c.bn ? "on" : "off", c.dropout);
    return buf;
}

std::vector<fs::path> raster_paths(const Session& s, const std::string& stem) {
    return {s.path(stem + "_class.ppm"), s.path(stem + "_regions.ppm"),
            s.path(stem + "_regions.csv")};
}

void write_rasters(const Session& s, const DecisionRaster& r, const std::string& stem) {
    const auto paths = raster_paths(s, stem);
    IdGrid classes{r.resolution, r.resolution, r.class_grid, {}};
    emit_raster(classes, PaletteMode::Class, paths[0]);
    s.wrote(paths[0]);
    IdGrid regions{r.resolution, r.resolution, r.region_grid, r.region_keys};
    emit_raster(regions, PaletteMode::Region, paths[1]);
    s.wrote(paths[1]);
    write_region_counts(r.region_keys, r.region_sizes, paths[2]);
    s.wrote(paths[2]);
}

int toy_sweep_cmd(const Session& s) {
    const Config cfg = s.config();
    const ToySweepConfig config = read_toy_sweep(cfg);
    cfg.check_all_used();
    const auto cells = config.cells();
    std::vector<fs::path> outputs{s.path("toy_sweep.csv"), s.path("toy_sweep_regions.csv"),
                                  s.path("degeneracy.csv")};
    for (const auto& c : cells) {
        for (auto& p : raster_paths(s, "rasters/" + cell_stem(c))) outputs.push_back(p);
    }
    s.reserve(outputs);
    s.note(std::to_string(cells.size()) + " cells x " + std::to_string(config.runs) + " runs");

    const ToySweepResult result = toy_sweep(config);
    s.text(outputs[0], sweep_csv(result));
    s.text(outputs[1], sweep_regions_csv(result));
    s.text(outputs[2], degeneracy_csv(degeneracy_at_init(config)));
    for (const auto& cell : result.cells) {
        const DecisionRaster r =
            decision_raster(*cell.best_network, Box2{}, config.raster_resolution);
        write_rasters(s, r, "rasters/" + cell_stem(cell.cell));
    }
    return kExitOk;
}

int illcond_cmd(const Session& s) {
    const Config cfg = s.config();
    const IllCondConfig config = read_illcond(cfg);
    cfg.check_all_used();
    const fs::path csv = s.path("illcond.csv");
    s.reserve({csv});
    s.text(csv, illcond_csv(illcond_sweep(config)));
    return kExitOk;
}

int ablation_cmd(const Session& s) {
    const Config cfg = s.config();
    const AblationConfig config = read_ablation(cfg);
    cfg.check_all_used();
    const fs::path csv = s.path("ablation.csv");
    const fs::path dropout_csv = s.path("ablation_dropout.csv");
    s.reserve({csv, dropout_csv});
    const AblationResult result = ablation(config);
    s.text(csv, ablation_csv(result.rows));
    s.text(dropout_csv, ablation_csv(result.dropout_rows));
    for (const auto& row : result.rows) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-10s test %.4f +- %.4f", row.variant.c_str(),
                      row.summary.mean_test, row.summary.std_test);
        s.out() << buf << "\n";
    }
    return kExitOk;
}

int train_mim_cmd(const Session& s, const std::string& mnist_dir) {
    Config cfg = s.config();
    if (!mnist_dir.empty()) cfg.set("mim", "mnist_dir", mnist_dir);
    const MimRunConfig config = read_mim(cfg);
    cfg.check_all_used();
    const fs::path csv = s.path("mim_epochs.csv");
    const fs::path weights = s.path("mim_weights.plr");
    s.reserve({csv, weights});
    const MimRunResult r = mnist_mini(config);
    s.text(csv, epochs_csv(r.report));
    save_snapshot(r.network, weights);
    s.wrote(weights);
    char buf[160];
    std::snprintf(buf, sizeof buf, "final test error %.4f, train error %.4f, %.1f s",
                  r.report.final_test_error, r.report.final_train_error, r.seconds);
    s.out() << buf << "\n";
    return kExitOk;
}

int regions_cmd(const Session& s) {
    const Config cfg = s.config();
    const RegionsConfig config = read_regions(cfg);
    cfg.check_all_used();
    std::vector<fs::path> outputs = raster_paths(s, "regions");
    outputs.push_back(s.path("regions_summary.csv"));
    outputs.push_back(s.path("regions_epochs.csv"));
    outputs.push_back(s.path("regions_weights.plr"));
    s.reserve(outputs);

    const RegionsResult r = region_study(config);
    write_rasters(s, r.raster, "regions");
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "train_err,test_err,train_regions,grid_regions,degenerate_units,total_units,"
                  "affine,inconclusive,not_affine\n%.6f,%.6f,%zu,%zu,%zu,%zu,%zu,%zu,%zu\n",
                  r.report.final_train_error, r.report.final_test_error,
                  r.train_census.region_count, r.raster.region_keys.size(),
                  r.train_census.degenerate_unit_count, r.train_census.total_units,
                  r.affine_regions, r.inconclusive_regions, r.non_affine_regions);
    s.text(outputs[3], buf);
    s.text(outputs[4], epochs_csv(r.report));
    save_snapshot(r.network, outputs[5]);
    s.wrote(outputs[5]);
    return kExitOk;
}

int gradcheck_cmd(const Session& s, std::optional<std::uint64_t> seed) {
    GradcheckOptions options;
    if (seed) options.seed = *seed;
    bool ok = true;
    for (const auto& r : run_gradcheck_suite(options)) {
        const bool pass = r.max_relative_error < kGradcheckTolerance;
        ok = ok && pass;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-14s %3zu instances  max rel err %.3e  %s",
                      r.layer.c_str(), r.instances, r.max_relative_error, pass ? "ok" : "FAIL");
        s.out() << buf << "\n";
    }
    return ok ? kExitOk : kExitRuntime;
}

void add_common(CLI::App* cmd, Options& o, bool outputs) {
    cmd->add_option("--config,-c", o.config, "Config file (defaults when omitted)");
    cmd->add_option("--seed", o.seed, "Override the config's seed");
    cmd->add_flag("-v,--verbose", o.verbose, "Print progress");
    if (outputs) {
        cmd->add_option("--out,-o", o.out, "Output directory")->capture_default_str();
        cmd->add_flag("--force", o.force, "Overwrite existing outputs");
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Piecewise-linear network laboratory", "plrlab"};
    app.require_subcommand(1);
    Options o;
    CLI::App* toy = app.add_subcommand("toy-sweep", "Toy 2-D sweep over depth, width, activation");
    CLI::App* ill = app.add_subcommand("illcond", "Learning-rate sweep with and without BN");
    CLI::App* abl = app.add_subcommand("ablation", "ReLU/maxout x BN ablation on the toy task");
    CLI::App* mim = app.add_subcommand("train-mim", "Reduced-width MIM on an MNIST subset");
    CLI::App* reg = app.add_subcommand("regions", "Train one toy net and map its regions");
    CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
    for (CLI::App* c : {toy, ill, abl, mim, reg}) add_common(c, o, true);
    mim->add_option("--mnist-dir", o.mnist_dir, "Directory holding the four IDX files");
    gc->add_option("--seed", o.seed, "Instance seed");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "plrlab: " << e.what() << "\n";
        return kExitUsage;
    }

    const Session s(o, out);
    try {
        if (*toy) return toy_sweep_cmd(s);
        if (*ill) return illcond_cmd(s);
        if (*abl) return ablation_cmd(s);
        if (*mim) return train_mim_cmd(s, o.mnist_dir);
        if (*reg) return regions_cmd(s);
        if (*gc) return gradcheck_cmd(s, o.seed);
    } catch (const ConfigError& e) {
        err << "plrlab: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const SpecError& e) {
        err << "plrlab: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const FormatError& e) {
        err << "plrlab: format error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const MissingFileError& e) {
        err << "plrlab: missing file: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        err << "plrlab: i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        err << "plrlab: runtime error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "plrlab: unexpected error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace plr
