#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace plr {

using BigInt = boost::multiprecision::cpp_int;

/// k^(L-1) * k^n0: regions computable by a depth-L rank-k maxout network on
/// n0 inputs. Needs L >= 1, n0 >= 1, k >= 2.
BigInt maxout_region_bound(unsigned L, unsigned n0, unsigned k);

/// floor(n/n0)^(L-1) * n^n0, the expression inside the asymptotic lower
/// bound for rectifier networks of width n. A reference value, not a count.
/// Needs L >= 1 and n >= n0 >= 1.
BigInt rectifier_region_bound(unsigned L, unsigned n, unsigned n0);

}  // namespace plr
