#include "plrlab/bounds.hpp"

#include "plrlab/error.hpp"

namespace plr {

BigInt maxout_region_bound(unsigned L, unsigned n0, unsigned k) {
    if (L < 1 || n0 < 1 || k < 2) {
        throw DomainError("maxout_region_bound needs L >= 1, n0 >= 1, k >= 2");
    }
    return boost::multiprecision::pow(BigInt(k), L - 1 + n0);
}

BigInt rectifier_region_bound(unsigned L, unsigned n, unsigned n0) {
    if (L < 1 || n0 < 1) throw DomainError("rectifier_region_bound needs L >= 1, n0 >= 1");
    if (n < n0) throw DomainError("rectifier_region_bound needs n >= n0");
    return boost::multiprecision::pow(BigInt(n / n0), L - 1) *
           boost::multiprecision::pow(BigInt(n), n0);
}

}  // namespace plr
