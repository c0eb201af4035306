#pragma once

#include <cstdint>
#include <vector>

#include "plrlab/training.hpp"

namespace plr {

/// Seeded two-class partition of [-10,10]^2 cut by random chords and
/// circular arcs. Each cell (sign vector over all cuts) gets a pseudo-random
/// label; cells are relabelled until the class-1 area fraction lies in
/// [balance_lo, balance_hi].
struct ToyPartitionSpec {
    std::uint64_t seed = 7;
    std::size_t chords = 12;
    std::size_t arcs = 2;
    double balance_lo = 0.3;
    double balance_hi = 0.7;
    std::size_t max_attempts = 100;
};

struct Chord {
    double a, b, c;  // a x + b y + c > 0 is the positive side
};

struct Arc {
    double cx, cy, r;  // inside is the positive side
};

class ToyPartition {
public:
    ToyPartition(std::vector<Chord> chords, std::vector<Arc> arcs, std::uint64_t label_key);

    int label(double x, double y) const;
    /// Fraction of class 1 over a fine grid of the box.
    double class_one_fraction(std::size_t resolution = 200) const;

    const std::vector<Chord>& chords() const { return chords_; }
    const std::vector<Arc>& arcs() const { return arcs_; }
    std::uint64_t label_key() const { return label_key_; }

private:
    std::vector<Chord> chords_;
    std::vector<Arc> arcs_;
    std::uint64_t label_key_;
};

inline constexpr double kToyHalfWidth = 10.0;
inline constexpr std::size_t kToyTrain = 12000;
inline constexpr std::size_t kToyTest = 2000;

/// Builds the partition for spec.seed; throws GenerationError when no
/// labelling within max_attempts meets the balance band.
ToyPartition make_partition(const ToyPartitionSpec& spec);

/// 12000 train and 2000 test points, uniform on the box, labelled by the
/// partition. Deterministic per (spec, seed).
SplitDataset gen_toy_dataset(const ToyPartitionSpec& spec, std::uint64_t seed);
SplitDataset sample_toy_dataset(const ToyPartition& partition, std::uint64_t seed,
                                std::size_t train = kToyTrain, std::size_t test = kToyTest);

}  // namespace plr
