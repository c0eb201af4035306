#include "plrlab/toy.hpp"

#include <cmath>
#include <numbers>

#include "plrlab/error.hpp"

namespace plr {

namespace {

constexpr std::uint64_t kGeometryStream = 0x47454fu;
constexpr std::uint64_t kLabelStream = 0x4c4142u;
constexpr std::uint64_t kTrainStream = 0x545241u;
constexpr std::uint64_t kTestStream = 0x545354u;

Dataset sample(const ToyPartition& partition, SeededRng rng, std::size_t n) {
    Dataset d{Tensor({n, 2}), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(-kToyHalfWidth, kToyHalfWidth);
        const double y = rng.uniform(-kToyHalfWidth, kToyHalfWidth);
        d.inputs.at(i, 0) = x;
        d.inputs.at(i, 1) = y;
        d.labels[i] = partition.label(x, y);
    }
    return d;
}

}  // namespace

ToyPartition::ToyPartition(std::vector<Chord> chords, std::vector<Arc> arcs,
                           std::uint64_t label_key)
    : chords_(std::move(chords)), arcs_(std::move(arcs)), label_key_(label_key) {
    if (chords_.size() + arcs_.size() > 64) throw DomainError("toy partition allows 64 cuts");
}

int ToyPartition::label(double x, double y) const {
    std::uint64_t cell = 0;
    std::size_t bit = 0;
    for (const Chord& c : chords_) cell |= std::uint64_t{c.a * x + c.b * y + c.c > 0.0} << bit++;
    for (const Arc& a : arcs_) {
        const double dx = x - a.cx, dy = y - a.cy;
        cell |= std::uint64_t{dx * dx + dy * dy < a.r * a.r} << bit++;
    }
    return static_cast<int>(splitmix64(cell ^ label_key_) & 1u);
}

double ToyPartition::class_one_fraction(std::size_t resolution) const {
    std::size_t ones = 0;
    const double step = 2.0 * kToyHalfWidth / static_cast<double>(resolution);
    for (std::size_t r = 0; r < resolution; ++r) {
        for (std::size_t c = 0; c < resolution; ++c) {
            ones += static_cast<std::size_t>(label(-kToyHalfWidth + (c + 0.5) * step,
                                                   -kToyHalfWidth + (r + 0.5) * step));
        }
    }
    return static_cast<double>(ones) / static_cast<double>(resolution * resolution);
}

ToyPartition make_partition(const ToyPartitionSpec& spec) {
    if (!(spec.balance_lo <= spec.balance_hi) || spec.balance_lo < 0.0 || spec.balance_hi > 1.0) {
        throw DomainError("toy partition balance band must satisfy 0 <= lo <= hi <= 1");
    }
    const SeededRng root(spec.seed);
    SeededRng geo = root.derive(kGeometryStream);
    SeededRng labels = root.derive(kLabelStream);
    for (std::size_t attempt = 0; attempt < spec.max_attempts; ++attempt) {
        std::vector<Chord> chords;
        for (std::size_t i = 0; i < spec.chords; ++i) {
            // Line through a random interior point at a random angle.
            const double px = geo.uniform(-0.8, 0.8) * kToyHalfWidth;
            const double py = geo.uniform(-0.8, 0.8) * kToyHalfWidth;
            const double theta = geo.uniform(0.0, std::numbers::pi);
            const double a = std::sin(theta), b = -std::cos(theta);
            chords.push_back({a, b, -(a * px + b * py)});
        }
        std::vector<Arc> arcs;
        for (std::size_t i = 0; i < spec.arcs; ++i) {
            const double cx = geo.uniform(-kToyHalfWidth, kToyHalfWidth);
            const double cy = geo.uniform(-kToyHalfWidth, kToyHalfWidth);
            arcs.push_back({cx, cy, geo.uniform(0.25, 0.7) * kToyHalfWidth});
        }
        ToyPartition p(std::move(chords), std::move(arcs), labels.next_u64());
        const double f = p.class_one_fraction();
        if (f >= spec.balance_lo && f <= spec.balance_hi) return p;
    }
    throw GenerationError("toy partition: no labelling within the balance band after " +
                          std::to_string(spec.max_attempts) + " attempts");
}

SplitDataset sample_toy_dataset(const ToyPartition& partition, std::uint64_t seed,
                                std::size_t train, std::size_t test) {
    const SeededRng root(seed);
    return {sample(partition, root.derive(kTrainStream), train),
            sample(partition, root.derive(kTestStream), test)};
}

SplitDataset gen_toy_dataset(const ToyPartitionSpec& spec, std::uint64_t seed) {
    return sample_toy_dataset(make_partition(spec), seed);
}

}  // namespace plr
