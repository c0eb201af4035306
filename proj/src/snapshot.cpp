#include "plrlab/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "plrlab/error.hpp"

namespace plr {

namespace {

constexpr char kMagic[] = "PLR1\n";

std::string header_for(const Network& net) {
    std::ostringstream h;
    h << "input";
    for (auto d : net.input_dims()) h << ' ' << d;
    h << "\nclasses " << net.classes() << '\n';
    for (std::size_t i = 0; i < net.nodes().size(); ++i) {
        const auto& node = net.nodes()[i];
        h << "layer " << i << ' ' << (node.is_conv() ? "conv" : "linear") << ' '
          << activation_name(node.act.kind) << ' ' << node.act.k << ' ' << (node.bn ? 1 : 0)
          << '\n';
    }
    for (const auto& t : net.state_tensors()) {
        h << "tensor " << t.name << ' ' << t.value->rank();
        for (auto d : t.value->shape()) h << ' ' << d;
        h << '\n';
    }
    h << "data\n";
    return h.str();
}

std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
        return r;
    }
    return v;
}

}  // namespace

void save_snapshot(const Network& net, std::ostream& out) {
    out.write(kMagic, sizeof(kMagic) - 1);
    const std::string header = header_for(net);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& t : net.state_tensors()) {
        for (double v : t.value->values()) {
            const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
            char bytes[8];
            std::memcpy(bytes, &bits, 8);
            out.write(bytes, 8);
        }
    }
    if (!out) throw IoError("failed writing snapshot");
}

void save_snapshot(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_snapshot(net, out);
}

void load_snapshot(Network& net, std::istream& in) {
    char magic[sizeof(kMagic) - 1];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw FormatError("snapshot: bad magic at byte 0");
    }
    const std::string expected = header_for(net);
    std::string actual(expected.size(), '\0');
    if (!in.read(actual.data(), static_cast<std::streamsize>(actual.size())) ||
        actual != expected) {
        std::size_t at = 0;
        while (at < actual.size() && actual[at] == expected[at]) ++at;
        throw FormatError("snapshot: header does not match network at byte " +
                          std::to_string(sizeof(magic) + at));
    }
    std::size_t offset = sizeof(magic) + expected.size();
    for (auto& t : net.state_tensors()) {
        for (double& v : t.value->values()) {
            char bytes[8];
            if (!in.read(bytes, 8)) {
                throw FormatError("snapshot: truncated data at byte " + std::to_string(offset));
            }
            std::uint64_t bits;
            std::memcpy(&bits, bytes, 8);
            v = std::bit_cast<double>(to_little_endian(bits));
            offset += 8;
        }
    }
}

void load_snapshot(Network& net, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    load_snapshot(net, in);
}

}  // namespace plr
