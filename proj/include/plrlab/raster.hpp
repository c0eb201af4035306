#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace plr {

using Rgb = std::array<std::uint8_t, 3>;

enum class PaletteMode {
    Class,   // fixed colours indexed by class id
    Region,  // colours derived from a per-id key (pattern hash)
};

/// Rectangular grid of small ids in raster order.
struct IdGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::size_t> ids;
    /// Region mode only: colour key per id; ids index into it. When empty
    /// the id itself is the key.
    std::vector<std::uint64_t> keys;
};

/// Pairwise distinct colours for ids 0..count-1 under the given mode.
std::vector<Rgb> palette(const IdGrid& grid, PaletteMode mode);

/// Writes a binary P6 PPM. Identical grids give byte-identical files.
void emit_raster(const IdGrid& grid, PaletteMode mode, const std::filesystem::path& path);

/// Sidecar CSV `pattern_id,key,count`, one row per region id.
void write_region_counts(const std::vector<std::uint64_t>& keys,
                         const std::vector<std::size_t>& counts,
                         const std::filesystem::path& path);

}  // namespace plr
