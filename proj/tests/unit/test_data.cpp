#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "plrlab/config.hpp"
#include "plrlab/error.hpp"
#include "plrlab/experiments.hpp"
#include "plrlab/mnist.hpp"
#include "plrlab/toy.hpp"

using namespace plr;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "plrlab_unit";
    fs::create_directories(dir);
    return dir / name;
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// Three 2x2 images with pixel values 0, 255, ... and labels 7, 0, 9.
struct IdxPair {
    fs::path images, labels;
    std::vector<unsigned char> image_bytes, label_bytes;

    explicit IdxPair(const std::string& stem)
        : images(scratch(stem + "-images")), labels(scratch(stem + "-labels")) {
        put_u32(image_bytes, 2051);
        put_u32(image_bytes, 3);
        put_u32(image_bytes, 2);
        put_u32(image_bytes, 2);
        const unsigned char px[12] = {0, 255, 0, 255, 51, 51, 51, 51, 255, 255, 255, 255};
        image_bytes.insert(image_bytes.end(), px, px + 12);
        put_u32(label_bytes, 2049);
        put_u32(label_bytes, 3);
        label_bytes.insert(label_bytes.end(), {7, 0, 9});
    }

    void write() const {
        write_bytes(images, image_bytes);
        write_bytes(labels, label_bytes);
    }
};

}  // namespace

TEST_CASE("toy dataset is deterministic and inside the box") {
    const ToyPartitionSpec spec = toy_partition_defaults();
    const SplitDataset a = gen_toy_dataset(spec, 5);
    const SplitDataset b = gen_toy_dataset(spec, 5);
    CHECK(a.train.inputs == b.train.inputs);
    CHECK(a.train.labels == b.train.labels);
    CHECK(a.test.labels == b.test.labels);
    CHECK(a.train.size() == 12000);
    CHECK(a.test.size() == 2000);
    for (double v : a.train.inputs.values()) {
        CHECK(v >= -10.0);
        CHECK(v <= 10.0);
    }
    CHECK_FALSE(gen_toy_dataset(spec, 6).train.inputs == a.train.inputs);
}

TEST_CASE("toy labels equal direct evaluation of the partition") {
    const ToyPartitionSpec spec = toy_partition_defaults();
    const ToyPartition part = make_partition(spec);
    const SplitDataset d = sample_toy_dataset(part, 9, 3000, 10);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        CHECK(d.train.labels[i] == part.label(d.train.inputs.at(i, 0), d.train.inputs.at(i, 1)));
        ones += static_cast<std::size_t>(d.train.labels[i]);
    }
    const double f = part.class_one_fraction();
    CHECK(f >= spec.balance_lo);
    CHECK(f <= spec.balance_hi);
    CHECK(static_cast<double>(ones) / 3000.0 == doctest::Approx(0.5).epsilon(0.1));
    CHECK(part.chords().size() == 12);
    CHECK(part.arcs().size() == 2);
}

TEST_CASE("toy labels are constant on each cell of the arrangement") {
    const ToyPartition part = make_partition(toy_partition_defaults());
    SeededRng rng(3);
    for (int t = 0; t < 2000; ++t) {
        const double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10);
        const double x2 = x + 1e-9, y2 = y - 1e-9;
        bool same_cell = true;
        for (const Chord& c : part.chords())
            same_cell &= (c.a * x + c.b * y + c.c > 0) == (c.a * x2 + c.b * y2 + c.c > 0);
        for (const Arc& a : part.arcs()) {
            const double d1 = (x - a.cx) * (x - a.cx) + (y - a.cy) * (y - a.cy);
            const double d2 = (x2 - a.cx) * (x2 - a.cx) + (y2 - a.cy) * (y2 - a.cy);
            same_cell &= (d1 < a.r * a.r) == (d2 < a.r * a.r);
        }
        if (same_cell) CHECK(part.label(x, y) == part.label(x2, y2));
    }
}

TEST_CASE("toy partition generation failures") {
    ToyPartitionSpec impossible = toy_partition_defaults();
    impossible.balance_lo = impossible.balance_hi = 0.123456;
    impossible.max_attempts = 3;
    CHECK_THROWS_AS(make_partition(impossible), GenerationError);
    ToyPartitionSpec inverted;
    inverted.balance_lo = 0.8;
    inverted.balance_hi = 0.2;
    CHECK_THROWS_AS(make_partition(inverted), DomainError);
    ToyPartitionSpec crowded;
    crowded.chords = 70;
    CHECK_THROWS_AS(make_partition(crowded), DomainError);
}

TEST_CASE("IDX loader on a synthetic file pair") {
    IdxPair pair("ok");
    pair.write();
    const MnistData raw = load_mnist_idx(pair.images, pair.labels, std::nullopt, 0.0);
    CHECK(raw.data.inputs.shape() == Shape{3, 1, 2, 2});
    CHECK(raw.data.labels == std::vector<int>{7, 0, 9});
    CHECK(raw.data.inputs[1] == 1.0);
    CHECK(raw.data.inputs[0] == 0.0);
    CHECK(raw.data.inputs[4] == doctest::Approx(0.2));

    const MnistData centred = load_mnist_idx(pair.images, pair.labels);
    const double mean = (6 * 255 + 4 * 51) / 255.0 / 12.0;
    CHECK(centred.pixel_mean == doctest::Approx(mean));
    CHECK(centred.data.inputs[1] == doctest::Approx(1.0 - mean));

    const MnistData first = load_mnist_idx(pair.images, pair.labels, 2, 0.0);
    CHECK(first.data.inputs.shape() == Shape{2, 1, 2, 2});
    CHECK(first.data.labels == std::vector<int>{7, 0});
    CHECK(first.data.inputs == raw.data.inputs.slice_rows(0, 2));
}

TEST_CASE("IDX loader errors") {
    IdxPair magic("magic");
    magic.image_bytes[3] = 0x04;
    magic.write();
    CHECK_THROWS_AS(load_mnist_idx(magic.images, magic.labels), FormatError);

    IdxPair truncated("trunc");
    truncated.image_bytes.resize(truncated.image_bytes.size() - 3);
    truncated.write();
    try {
        load_mnist_idx(truncated.images, truncated.labels);
        FAIL("expected a FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset 25") != std::string::npos);
    }

    IdxPair count("count");
    count.label_bytes[7] = 4;
    count.write();
    CHECK_THROWS_AS(load_mnist_idx(count.images, count.labels), FormatError);

    IdxPair label("label");
    label.label_bytes.back() = 10;
    label.write();
    CHECK_THROWS_AS(load_mnist_idx(label.images, label.labels), FormatError);

    CHECK_THROWS_AS(load_mnist_idx(scratch("absent-a"), scratch("absent-b")), MissingFileError);
}

TEST_CASE("MNIST training file extents" * doctest::skip(!fs::exists("/root/data/mnist"))) {
    const MnistFiles f = MnistFiles::in("/root/data/mnist");
    const MnistData d = load_mnist_idx(f.train_images, f.train_labels);
    CHECK(d.data.inputs.shape() == Shape{60000, 1, 28, 28});
    const MnistData head = load_mnist_idx(f.train_images, f.train_labels, 1000, d.pixel_mean);
    CHECK(head.data.labels == std::vector<int>(d.data.labels.begin(), d.data.labels.begin() + 1000));
    CHECK(head.data.inputs == d.data.inputs.slice_rows(0, 1000));
}

TEST_CASE("config parsing") {
    const Config cfg = Config::parse(
        "seed = 4  # trailing comment\n"
        "\n"
        "[train]\n"
        "schedule = 0.0005:20, 0.0001:20\n"
        "momentum = 0.9\n"
        "[sweep]\n"
        "widths = 2, 4\n"
        "batch_norm = on\n"
        "activations = relu, maxout4\n",
        "test.cfg");
    CHECK(cfg.get_u64("", "seed", 0) == 4);
    const auto sched = cfg.get_schedule("train", "schedule", {});
    REQUIRE(sched.size() == 2);
    CHECK(sched[1].rate == 0.0001);
    CHECK(sched[1].epochs == 20);
    CHECK(cfg.get_double("train", "momentum", 0.0) == 0.9);
    CHECK(cfg.get_sizes("sweep", "widths", {}) == std::vector<std::size_t>{2, 4});
    CHECK(cfg.get_bool("sweep", "batch_norm", false));
    CHECK(cfg.get_size("sweep", "runs", 5) == 5);
    CHECK_THROWS_AS(cfg.check_all_used(), ConfigError);
    (void)cfg.get_strings("sweep", "activations", {});
    CHECK_NOTHROW(cfg.check_all_used());
}

TEST_CASE("config errors name the source line") {
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("[broken\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("just words\n"), ConfigError);
    const Config cfg = Config::parse("[train]\nmomentum = fast\n", "bad.cfg");
    try {
        (void)cfg.get_double("train", "momentum", 0.0);
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bad.cfg:2") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::load(scratch("no-such.cfg")), MissingFileError);
    CHECK_THROWS_AS(parse_schedule("0.1"), ConfigError);
    CHECK_THROWS_AS(parse_bool("maybe"), ConfigError);
}

TEST_CASE("experiment config readers") {
    const Config cfg = Config::parse(
        "seed = 9\n[data]\nchords = 8\n[sweep]\nlayers = 2\nactivations = maxout3\n"
        "batch_norm = on, off\nruns = 2\n[train]\nbatch_size = 50\n");
    const ToySweepConfig c = read_toy_sweep(cfg);
    CHECK(c.seed == 9);
    CHECK(c.train.seed == 9);
    CHECK(c.partition.chords == 8);
    CHECK(c.train.batch_size == 50);
    CHECK(c.cells().size() == 2 * 1 * 2 * 2);
    CHECK(c.activations[0].k == 3);
    CHECK_NOTHROW(cfg.check_all_used());

    CHECK_THROWS_AS(read_toy_sweep(Config::parse("[sweep]\nwidths = 0\n")), ConfigError);
    CHECK_THROWS_AS(read_toy_sweep(Config::parse("[sweep]\nactivations = tanh\n")), ConfigError);
    CHECK_THROWS_AS(read_illcond(Config::parse("[illcond]\nrates = 1, 0.1\n")), ConfigError);
    CHECK(parse_activation("maxout4").k == 4);
    CHECK(parse_activation("prelu").kind == ActivationKind::PReLU);
    CHECK_THROWS_AS(parse_activation("maxout1"), ConfigError);
}
