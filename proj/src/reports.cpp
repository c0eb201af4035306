#include "plrlab/reports.hpp"

#include <cstdio>
#include <fstream>

#include "plrlab/error.hpp"

namespace plr {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string err(double v) { return fmt("%.6f", v); }

std::string cell_prefix(const SweepCell& c) {
    const std::size_t k = c.activation.kind == ActivationKind::Maxout ? c.activation.k : 1;
    return activation_label(c.activation) + "," + std::to_string(k) + "," +
           std::to_string(c.layers) + "," + std::to_string(c.width) + "," + (c.bn ? "on" : "off") +
           "," + fmt("%.2f", c.dropout);
}

void append_summary(std::string& out, const std::string& prefix, const MultiRunReport& m) {
    out += prefix + ",mean," + err(m.mean_train) + "," + err(m.mean_test) + ",,\n";
    out += prefix + ",std," + err(m.std_train) + "," + err(m.std_test) + ",,\n";
}

}  // namespace

std::string sweep_csv(const ToySweepResult& result) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& cell : result.cells) {
        const std::string prefix = cell_prefix(cell.cell);
        for (std::size_t r = 0; r < cell.runs.size(); ++r) {
            const auto& run = cell.runs[r];
            out += prefix + "," + std::to_string(r) + "," + err(run.report.final_train_error) + "," +
                   err(run.report.final_test_error) + "," + std::to_string(run.train_regions) +
                   "," + (run.report.diverged ? "1" : "0") + "\n";
        }
        append_summary(out, prefix, cell.summary);
    }
    return out;
}

std::string sweep_regions_csv(const ToySweepResult& result) {
    std::string out = "activation,k,layers,width,bn,dropout,run,train_regions,grid_regions,best\n";
    for (const auto& cell : result.cells) {
        const std::string prefix = cell_prefix(cell.cell);
        for (std::size_t r = 0; r < cell.runs.size(); ++r) {
            out += prefix + "," + std::to_string(r) + "," +
                   std::to_string(cell.runs[r].train_regions) + "," +
                   std::to_string(cell.runs[r].grid_regions) + "," +
                   (r == cell.best_run ? "1" : "0") + "\n";
        }
    }
    return out;
}

std::string degeneracy_csv(const std::vector<DegeneracyRow>& rows) {
    std::string out = "activation,k,layers,width,bn,run,degenerate_units,total_units,fraction\n";
    for (const auto& row : rows) {
        const SweepCell& c = row.cell;
        out += activation_label(c.activation) + "," + std::to_string(c.activation.k) + "," +
               std::to_string(c.layers) + "," + std::to_string(c.width) + "," +
               (c.bn ? "on" : "off") + "," + std::to_string(row.run) + "," +
               std::to_string(row.degenerate_units) + "," + std::to_string(row.total_units) + "," +
               err(row.fraction()) + "\n";
    }
    return out;
}

std::string illcond_csv(const std::vector<IllCondRow>& rows) {
    std::string out = "lr,bn,run,train_err,test_err,diverged\n";
    for (const auto& row : rows) {
        const std::string prefix = fmt("%g", row.rate) + "," + (row.bn ? "on" : "off");
        for (std::size_t r = 0; r < row.summary.runs.size(); ++r) {
            const RunReport& run = row.summary.runs[r];
            out += prefix + "," + std::to_string(r) + "," + err(run.final_train_error) + "," +
                   err(run.final_test_error) + "," + (run.diverged ? "1" : "0") + "\n";
        }
        out += prefix + ",mean," + err(row.summary.mean_train) + "," +
               err(row.summary.mean_test) + ",\n";
    }
    return out;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "variant,activation,k,layers,width,bn,dropout,run,train_err,test_err,diverged\n";
    for (const auto& row : rows) {
        const std::string prefix = row.variant + "," + cell_prefix(row.cell);
        for (std::size_t r = 0; r < row.summary.runs.size(); ++r) {
            const RunReport& run = row.summary.runs[r];
            out += prefix + "," + std::to_string(r) + "," + err(run.final_train_error) + "," +
                   err(run.final_test_error) + "," + (run.diverged ? "1" : "0") + "\n";
        }
        out += prefix + ",mean," + err(row.summary.mean_train) + "," + err(row.summary.mean_test) +
               ",\n";
        out += prefix + ",std," + err(row.summary.std_train) + "," + err(row.summary.std_test) +
               ",\n";
    }
    return out;
}

std::string epochs_csv(const RunReport& report) {
    std::string out = "epoch,train_err,test_err,mean_loss\n";
    for (std::size_t e = 0; e < report.train_error.size(); ++e) {
        out += std::to_string(e) + "," + err(report.train_error[e]) + "," +
               err(report.test_error[e]) + "," +
               (e ? fmt("%.6f", report.mean_loss[e - 1]) : std::string()) + "\n";
    }
    return out;
}

void check_writable(const std::filesystem::path& path, bool force) {
    if (!force && std::filesystem::exists(path)) {
        throw OverwriteError(path.string() + ": exists (pass --force to overwrite)");
    }
}

void write_text(const std::filesystem::path& path, const std::string& text, bool force) {
    check_writable(path, force);
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path.string() + ": cannot open for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError(path.string() + ": write failed");
}

}  // namespace plr
