#pragma once

#include <filesystem>
#include <optional>

#include "plrlab/training.hpp"

namespace plr {

struct MnistData {
    Dataset data;         // inputs (n, 1, 28, 28)
    double pixel_mean = 0.0;  // subtracted from every pixel
};

/// Parses an IDX image/label file pair (big-endian, magic 2051 and 2049).
/// Pixels are scaled to [0, 1] and then centred: by `subtract_mean` when
/// given (e.g. the training mean for the test split), otherwise by the mean
/// of the loaded images. `limit` keeps the first examples only.
MnistData load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::optional<std::size_t> limit = std::nullopt,
                         std::optional<double> subtract_mean = std::nullopt);

/// Standard file names inside an MNIST directory.
struct MnistFiles {
    std::filesystem::path train_images, train_labels, test_images, test_labels;

    static MnistFiles in(const std::filesystem::path& dir);
};

}  // namespace plr
