#pragma once

#include <cstdint>

namespace sigstop {

/// splitmix64 finalizer (Stafford Mix13). Output i of the classic splitmix64
/// stream with seed s is mix64(s + (i+1)*GOLDEN64), which makes the stream a
/// pure function of a counter.
constexpr std::uint64_t GOLDEN64 = 0x9E3779B97F4A7C15ULL;
std::uint64_t mix64(std::uint64_t z);

/// Counter-based random stream: output n is a pure function of
/// (seed, stream, n), so any path of a batch can be regenerated in isolation
/// and results do not depend on scheduling. Stream keys are derived by
/// double-mixing so that nearby (seed, stream) pairs decorrelate.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return mix64(key_ + ++counter_ * GOLDEN64); }

    /// Uniform on the open interval (0,1), 53-bit resolution.
    double next_uniform();

    /// Standard normal via the inverse CDF (deterministic, no rejection).
    double next_normal();

    void skip(std::uint64_t n) { counter_ += n; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Inverse standard normal CDF on (0,1).
double inverse_normal_cdf(double p);

/// Derives a child seed for an experiment leg from a base seed and a role tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t role);

}  // namespace sigstop
