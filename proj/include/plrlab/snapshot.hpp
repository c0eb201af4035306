#pragma once

#include <filesystem>
#include <iosfwd>

#include "plrlab/network.hpp"

namespace plr {

// Weight snapshot layout:
//
//   PLR1\n
//   input <d0> <d1> ...\n
//   classes <n>\n
//   layer <i> <linear|conv> <activation> <k> <bn 0|1>\n     (one per node)
//   tensor <name> <rank> <d0> <d1> ...\n                  (one per tensor)
//   data\n
//   <little-endian float64 arrays, tensor declaration order>
//
// Tensors are Network::state_tensors(): parameters and running moments.

void save_snapshot(const Network& net, std::ostream& out);
void save_snapshot(const Network& net, const std::filesystem::path& path);

/// Loads values into `net`, whose architecture must match the header
/// exactly; throws FormatError otherwise.
void load_snapshot(Network& net, std::istream& in);
void load_snapshot(Network& net, const std::filesystem::path& path);

}  // namespace plr
