#pragma once

#include <cstdint>
#include <vector>

#include "plrlab/network.hpp"

namespace plr {

/// Region index of every piecewise-linear unit, layer-major and unit-minor.
/// Convolutional layers contribute one unit per channel and spatial
/// position. Identity layers contribute nothing.
struct ActivationPattern {
    std::vector<LaneIndex> indices;

    std::uint64_t hash() const;
    friend bool operator==(const ActivationPattern&, const ActivationPattern&) = default;
};

/// Number of regions (lanes) of each pattern position, aligned with
/// ActivationPattern::indices.
std::vector<std::size_t> pattern_arity(const Network& net);

/// Pattern of a single example; `x` may carry a leading batch axis of 1.
ActivationPattern extract_pattern(const Network& net, const Tensor& x);
/// Patterns of every row of `points`, in row order. Infer mode.
std::vector<ActivationPattern> extract_patterns(const Network& net, const Tensor& points);

/// Points grouped by exact pattern equality. Regions are numbered by the
/// first point that lands in them.
struct RegionMap {
    std::vector<ActivationPattern> patterns;
    std::vector<std::vector<std::size_t>> members;
    std::vector<std::size_t> region_of;  // per point
    std::size_t point_count = 0;

    std::size_t region_count() const { return patterns.size(); }
};

RegionMap group_patterns(std::vector<ActivationPattern> patterns);
RegionMap enumerate_regions(const Network& net, const Tensor& points);

struct RegionCensus {
    std::size_t region_count = 0;
    std::vector<std::size_t> region_sizes;
    std::vector<std::vector<std::size_t>> lane_usage;  // per unit, per lane
    std::size_t total_units = 0;
    std::size_t degenerate_unit_count = 0;

    double degenerate_fraction() const {
        return total_units ? static_cast<double>(degenerate_unit_count) / total_units : 0.0;
    }
};

/// A unit is degenerate when every point selects the same lane.
RegionCensus census(const Network& net, const Tensor& points);
RegionCensus census(const Network& net, const RegionMap& regions);

enum class Affinity { Affine, NotAffine, Inconclusive };

struct AffinityResult {
    Affinity verdict = Affinity::Inconclusive;
    std::size_t triples_checked = 0;
    double max_deviation = 0.0;
};

inline constexpr double kAffinityTolerance = 1e-8;

/// Checks F((a+b)/2) = (F(a)+F(b))/2 on the logits for random pairs of
/// `region_points`, which must all share one pattern. The deviation limit
/// is tolerance * max(1, |F|). Fewer than three points, mixed patterns or no
/// midpoint inside the region give Inconclusive.
AffinityResult affinity_check(const Network& net, const Tensor& region_points, std::size_t trials,
                              SeededRng& rng, double tolerance = kAffinityTolerance);

struct Box2 {
    double x_min = -10.0, x_max = 10.0;
    double y_min = -10.0, y_max = 10.0;
};

/// Cell centres of a resolution x resolution grid, row 0 at the top (y_max),
/// as a (resolution^2, 2) tensor in raster order.
Tensor grid_points(const Box2& box, std::size_t resolution);

struct DecisionRaster {
    std::size_t resolution = 0;
    std::vector<std::size_t> class_grid;   // argmax logit, raster order
    std::vector<std::size_t> region_grid;  // dense region ids by first occurrence
    std::vector<std::uint64_t> region_keys;  // pattern hash per region id
    std::vector<std::size_t> region_sizes;
};

/// Infer-mode class and region maps of a network with 2-D input.
DecisionRaster decision_raster(const Network& net, const Box2& box, std::size_t resolution);

}  // namespace plr
