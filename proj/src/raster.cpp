#include "plrlab/raster.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "plrlab/error.hpp"
#include "plrlab/rng.hpp"

namespace plr {

namespace {

constexpr Rgb kClassColors[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},  {148, 103, 189},
    {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
};

Rgb rgb_of(std::uint64_t h) {
    return {static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8),
            static_cast<std::uint8_t>(h >> 16)};
}

std::uint32_t packed(const Rgb& c) {
    return (std::uint32_t{c[0]} << 16) | (std::uint32_t{c[1]} << 8) | c[2];
}

void check_grid(const IdGrid& grid) {
    if (grid.width == 0 || grid.height == 0 || grid.ids.size() != grid.width * grid.height) {
        throw DimensionError("raster grid must be rectangular and nonempty");
    }
    if (!grid.keys.empty()) {
        for (std::size_t id : grid.ids) {
            if (id >= grid.keys.size()) throw DimensionError("raster id has no colour key");
        }
    }
}

}  // namespace

std::vector<Rgb> palette(const IdGrid& grid, PaletteMode mode) {
    std::size_t count = grid.keys.size();
    for (std::size_t id : grid.ids) count = std::max(count, id + 1);
    std::vector<Rgb> colors(count);
    std::set<std::uint32_t> used;
    for (std::size_t id = 0; id < count; ++id) {
        const std::uint64_t key = id < grid.keys.size() ? grid.keys[id] : id;
        Rgb c;
        std::uint64_t h = splitmix64(mode == PaletteMode::Class ? id : key);
        if (mode == PaletteMode::Class && id < std::size(kClassColors)) {
            c = kClassColors[id];
        } else {
            c = rgb_of(h);
        }
        // Collisions are resolved by rehashing, in id order.
        while (!used.insert(packed(c)).second) {
            h = splitmix64(h);
            c = rgb_of(h);
        }
        colors[id] = c;
    }
    return colors;
}

void emit_raster(const IdGrid& grid, PaletteMode mode, const std::filesystem::path& path) {
    check_grid(grid);
    const std::vector<Rgb> colors = palette(grid, mode);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P6\n" << grid.width << ' ' << grid.height << "\n255\n";
    std::vector<char> payload(grid.ids.size() * 3);
    for (std::size_t i = 0; i < grid.ids.size(); ++i) {
        const Rgb& c = colors[grid.ids[i]];
        std::copy(c.begin(), c.end(), payload.begin() + static_cast<std::ptrdiff_t>(3 * i));
    }
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

void write_region_counts(const std::vector<std::uint64_t>& keys,
                         const std::vector<std::size_t>& counts,
                         const std::filesystem::path& path) {
    if (keys.size() != counts.size()) throw DimensionError("region keys and counts differ");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "pattern_id,key,count\n";
    char buf[64];
    for (std::size_t i = 0; i < keys.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%016" PRIx64, keys[i]);
        out << i << ',' << buf << ',' << counts[i] << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace plr
