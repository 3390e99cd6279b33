#include "sigstop/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <stdexcept>

namespace sigstop {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ (stream * GOLDEN64 + 1))) {}

double CounterRng::next_uniform() {
    // (0,1): offset the 53-bit mantissa by half an ulp so 0 and 1 never occur.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::next_normal() { return inverse_normal_cdf(next_uniform()); }

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p outside (0,1)");
    // Phi^{-1}(p) = -sqrt(2) erfc^{-1}(2p)
    return -1.4142135623730951 * boost::math::erfc_inv(2.0 * p);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t role) {
    return mix64(base * GOLDEN64 + role + 1);
}

}  // namespace sigstop
