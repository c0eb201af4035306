#include "plrlab/mnist.hpp"

#include <fstream>
#include <vector>

#include "plrlab/error.hpp"

namespace plr {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

class IdxReader {
public:
    explicit IdxReader(const std::filesystem::path& path) : path_(path) {
        if (!std::filesystem::exists(path)) throw MissingFileError("missing file: " + path.string());
        in_.open(path, std::ios::binary);
        if (!in_) throw IoError("cannot open " + path.string());
    }

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
               (std::uint32_t{b[2]} << 8) | b[3];
    }

    void read(unsigned char* dst, std::size_t n) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) {
            throw FormatError(path_.string() + ": truncated at byte offset " +
                              std::to_string(offset_ + got));
        }
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void expect_magic(IdxReader& r, std::uint32_t want) {
    const std::uint32_t got = r.u32();
    if (got != want) {
        throw FormatError(r.path().string() + ": bad magic number " + std::to_string(got) +
                          " at byte offset 0 (expected " + std::to_string(want) + ")");
    }
}

}  // namespace

MnistData load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::optional<std::size_t> limit, std::optional<double> subtract_mean) {
    IdxReader img(images), lab(labels);
    expect_magic(img, kImageMagic);
    expect_magic(lab, kLabelMagic);
    const std::size_t count = img.u32();
    const std::size_t rows = img.u32(), cols = img.u32();
    const std::size_t label_count = lab.u32();
    if (label_count != count) {
        throw FormatError(labels.string() + ": label count " + std::to_string(label_count) +
                          " at byte offset 4 differs from image count " + std::to_string(count));
    }
    const std::size_t n = limit ? std::min(*limit, count) : count;

    MnistData out;
    out.data.inputs = Tensor({n, 1, rows, cols});
    out.data.labels.resize(n);
    std::vector<unsigned char> buf(n * rows * cols);
    img.read(buf.data(), buf.size());
    double total = 0.0;
    for (std::size_t i = 0; i < buf.size(); ++i) {
        out.data.inputs[i] = buf[i] / 255.0;
        total += out.data.inputs[i];
    }
    std::vector<unsigned char> lbuf(n);
    lab.read(lbuf.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
        if (lbuf[i] > 9) {
            throw FormatError(labels.string() + ": label " + std::to_string(lbuf[i]) +
                              " out of range at byte offset " + std::to_string(8 + i));
        }
        out.data.labels[i] = lbuf[i];
    }
    out.pixel_mean = subtract_mean ? *subtract_mean
                                   : (buf.empty() ? 0.0 : total / static_cast<double>(buf.size()));
    for (double& v : out.data.inputs.values()) v -= out.pixel_mean;
    return out;
}

MnistFiles MnistFiles::in(const std::filesystem::path& dir) {
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
            dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
}

}  // namespace plr
