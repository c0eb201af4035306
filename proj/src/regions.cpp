#include "plrlab/regions.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "plrlab/error.hpp"
#include "plrlab/parallel.hpp"

namespace plr {

namespace {

constexpr std::size_t kChunk = 4096;

bool has_regions(const LayerNode& node) { return node.act.kind != ActivationKind::Identity; }

// Appends the per-example pattern slices of one forward pass.
void collect_patterns(const Network& net, const ForwardCache& cache, std::size_t batch,
                      std::vector<ActivationPattern>& out) {
    const std::size_t base = out.size();
    out.resize(base + batch);
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        if (!has_regions(net.nodes()[i])) continue;
        const auto& pat = cache.nodes[i].pattern;
        const std::size_t per = batch ? pat.size() / batch : 0;
        for (std::size_t n = 0; n < batch; ++n) {
            auto& dst = out[base + n].indices;
            dst.insert(dst.end(), pat.begin() + n * per, pat.begin() + (n + 1) * per);
        }
    }
}

Tensor rows_of(const Tensor& points, std::span<const std::size_t> rows) {
    return points.gather_rows(rows);
}

}  // namespace

std::uint64_t ActivationPattern::hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ indices.size();
    for (LaneIndex v : indices) h = splitmix64(h ^ v);
    return h;
}

std::vector<std::size_t> pattern_arity(const Network& net) {
    std::vector<std::size_t> arity;
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        const LayerNode& node = net.nodes()[i];
        if (!has_regions(node)) continue;
        const std::size_t k = node.act.regions();
        Shape s = net.node_output_shape(i);
        // Pooling and dropout follow the activation; the pattern lives at
        // the activation output, which has `units` channels.
        std::size_t positions = 1;
        if (node.is_conv()) {
            Shape in = i == 0 ? net.input_dims() : net.node_output_shape(i - 1);
            const auto& conv = std::get<ConvParams>(node.preact);
            positions = conv_output_extent(in[1], conv.kernels.dim(2), conv.stride, conv.pad) *
                        conv_output_extent(in[2], conv.kernels.dim(3), conv.stride, conv.pad);
        }
        arity.insert(arity.end(), node.units() * positions, k);
    }
    return arity;
}

ActivationPattern extract_pattern(const Network& net, const Tensor& x) {
    Tensor batch = x;
    if (x.rank() == net.input_dims().size()) {
        Shape s{1};
        s.insert(s.end(), x.shape().begin(), x.shape().end());
        batch = std::move(batch).reshaped(s);
    }
    if (batch.dim(0) != 1) throw DimensionError("extract_pattern takes a single example");
    return extract_patterns(net, batch).front();
}

std::vector<ActivationPattern> extract_patterns(const Network& net, const Tensor& points) {
    const std::size_t n = points.rank() ? points.dim(0) : 0;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::vector<ActivationPattern>> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kChunk, end = std::min(n, begin + kChunk);
        const ForwardResult fr = net.evaluate(points.slice_rows(begin, end), Mode::Infer);
        collect_patterns(net, fr.cache, end - begin, parts[c]);
    });
    std::vector<ActivationPattern> out;
    out.reserve(n);
    for (auto& part : parts) {
        for (auto& p : part) out.push_back(std::move(p));
    }
    return out;
}

RegionMap group_patterns(std::vector<ActivationPattern> patterns) {
    RegionMap map;
    map.point_count = patterns.size();
    map.region_of.resize(patterns.size());
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> by_hash;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        auto& bucket = by_hash[patterns[i].hash()];
        std::size_t region = map.patterns.size();
        for (std::size_t r : bucket) {
            if (map.patterns[r] == patterns[i]) {
                region = r;
                break;
            }
        }
        if (region == map.patterns.size()) {
            bucket.push_back(region);
            map.patterns.push_back(std::move(patterns[i]));
            map.members.emplace_back();
        }
        map.members[region].push_back(i);
        map.region_of[i] = region;
    }
    return map;
}

RegionMap enumerate_regions(const Network& net, const Tensor& points) {
    if (points.rank() == 0 || points.dim(0) == 0) {
        throw DomainError("enumerate_regions needs a nonempty point set");
    }
    return group_patterns(extract_patterns(net, points));
}

RegionCensus census(const Network& net, const RegionMap& regions) {
    RegionCensus c;
    c.region_count = regions.region_count();
    const std::vector<std::size_t> arity = pattern_arity(net);
    c.total_units = arity.size();
    c.lane_usage.resize(arity.size());
    for (std::size_t u = 0; u < arity.size(); ++u) c.lane_usage[u].assign(arity[u], 0);
    for (std::size_t r = 0; r < regions.region_count(); ++r) {
        const std::size_t size = regions.members[r].size();
        c.region_sizes.push_back(size);
        const auto& idx = regions.patterns[r].indices;
        if (idx.size() != arity.size()) throw DimensionError("census: pattern length mismatch");
        for (std::size_t u = 0; u < idx.size(); ++u) c.lane_usage[u][idx[u]] += size;
    }
    for (const auto& usage : c.lane_usage) {
        const std::size_t used = static_cast<std::size_t>(
            std::count_if(usage.begin(), usage.end(), [](std::size_t v) { return v > 0; }));
        if (used <= 1) ++c.degenerate_unit_count;
    }
    return c;
}

RegionCensus census(const Network& net, const Tensor& points) {
    return census(net, enumerate_regions(net, points));
}

AffinityResult affinity_check(const Network& net, const Tensor& region_points, std::size_t trials,
                              SeededRng& rng, double tolerance) {
    AffinityResult result;
    const std::size_t n = region_points.rank() ? region_points.dim(0) : 0;
    if (n < 3 || trials == 0) return result;
    const std::vector<ActivationPattern> own = extract_patterns(net, region_points);
    for (const auto& p : own) {
        if (!(p == own.front())) return result;
    }

    // Rows [0, t) are the a points, [t, 2t) the b points, [2t, 3t) midpoints.
    std::vector<std::size_t> a(trials), b(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        a[t] = rng.below(n);
        b[t] = (a[t] + 1 + rng.below(n - 1)) % n;
    }
    const Tensor pa = rows_of(region_points, a);
    const Tensor pb = rows_of(region_points, b);
    Tensor mid = pa;
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (pa[i] + pb[i]);

    Shape all_shape = pa.shape();
    all_shape[0] = 3 * trials;
    Tensor all(all_shape);
    std::copy(pa.values().begin(), pa.values().end(), all.data());
    std::copy(pb.values().begin(), pb.values().end(), all.data() + pa.size());
    std::copy(mid.values().begin(), mid.values().end(), all.data() + 2 * pa.size());

    const Tensor logits = net.infer(all);
    const std::vector<ActivationPattern> pats = extract_patterns(net, all);
    const std::size_t classes = logits.dim(1);
    bool affine = true;
    for (std::size_t t = 0; t < trials; ++t) {
        if (!(pats[2 * trials + t] == own.front())) continue;
        ++result.triples_checked;
        for (std::size_t c = 0; c < classes; ++c) {
            const double fa = logits.at(t, c), fb = logits.at(trials + t, c);
            const double fc = logits.at(2 * trials + t, c);
            const double dev = std::abs(fc - 0.5 * (fa + fb));
            const double scale = std::max({1.0, std::abs(fa), std::abs(fb), std::abs(fc)});
            result.max_deviation = std::max(result.max_deviation, dev / scale);
            if (!(dev <= tolerance * scale)) affine = false;
        }
    }
    if (result.triples_checked == 0) return result;
    result.verdict = affine ? Affinity::Affine : Affinity::NotAffine;
    return result;
}

Tensor grid_points(const Box2& box, std::size_t resolution) {
    if (resolution == 0) throw DomainError("grid resolution must be positive");
    if (!(box.x_max > box.x_min) || !(box.y_max > box.y_min)) {
        throw DomainError("grid box must have positive extent");
    }
    Tensor pts({resolution * resolution, 2});
    const double dx = (box.x_max - box.x_min) / static_cast<double>(resolution);
    const double dy = (box.y_max - box.y_min) / static_cast<double>(resolution);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            const std::size_t i = r * resolution + c;
            pts.at(i, 0) = box.x_min + (static_cast<double>(c) + 0.5) * dx;
            pts.at(i, 1) = box.y_max - (static_cast<double>(r) + 0.5) * dy;
        }
    }
    return pts;
}

DecisionRaster decision_raster(const Network& net, const Box2& box, std::size_t resolution) {
    if (net.input_dims() != Shape{2}) {
        throw DomainError("decision_raster needs a network with 2-D input, got " +
                          shape_string(net.input_dims()));
    }
    const Tensor pts = grid_points(box, resolution);
    DecisionRaster out;
    out.resolution = resolution;
    const Tensor logits = net.infer(pts);
    out.class_grid.resize(pts.dim(0));
    for (std::size_t i = 0; i < pts.dim(0); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.dim(1); ++c) {
            if (logits.at(i, c) > logits.at(i, best)) best = c;
        }
        out.class_grid[i] = best;
    }
    const RegionMap map = enumerate_regions(net, pts);
    out.region_grid = map.region_of;
    for (std::size_t r = 0; r < map.region_count(); ++r) {
        out.region_keys.push_back(map.patterns[r].hash());
        out.region_sizes.push_back(map.members[r].size());
    }
    return out;
}

}  // namespace plr
