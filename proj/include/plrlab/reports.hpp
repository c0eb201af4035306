#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plrlab/experiments.hpp"

namespace plr {

// CSV renderers. Numbers are printed with fixed precision so identical
// results give byte-identical files.

inline constexpr const char* kSweepHeader =
    "activation,k,layers,width,bn,dropout,run,train_err,test_err,regions,diverged";

/// One row per run, then `mean` and `std` rows per cell. The regions
/// column counts distinct patterns over the training points.
std::string sweep_csv(const ToySweepResult& result);
/// Per run: train-point and grid region counts, plus the best-run flag.
std::string sweep_regions_csv(const ToySweepResult& result);
std::string degeneracy_csv(const std::vector<DegeneracyRow>& rows);
std::string illcond_csv(const std::vector<IllCondRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string epochs_csv(const RunReport& report);

/// Writes text to path, creating parent directories. Throws OverwriteError
/// if the file exists and force is false, IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text, bool force);

/// Throws OverwriteError if the file exists and force is false.
void check_writable(const std::filesystem::path& path, bool force);

}  // namespace plr
