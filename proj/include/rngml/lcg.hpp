#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml {

// x_{k+1} = (a x_k + c) mod m, with m up to 2^63 so the multiply is done
// in 128-bit arithmetic rather than trusting wraparound.
struct LcgParams {
    std::uint64_t a = 0;
    std::uint64_t c = 0;
    std::uint64_t m = 0;
};

void validate_lcg(const LcgParams& p);

std::uint64_t lcg_next_state(const LcgParams& p, std::uint64_t x);

struct FullPeriodCheck {
    bool full_period = false;
    std::string reason; // empty when full_period is true
};

// Hull-Dobell test: c coprime to m, a-1 divisible by every prime factor
// of m, and by 4 if m is. Factorization is plain trial division, fine for
// the power-of-two and small composite moduli this tool works with.
FullPeriodCheck hull_dobell(const LcgParams& p);

std::vector<std::uint64_t> distinct_prime_factors(std::uint64_t n);

// Most significant byte of each state, scaled to the modulus:
// floor(256 * x / m). Produces `count` bytes starting after `seed`.
std::vector<std::uint8_t> lcg_emit_bytes(const LcgParams& p, std::uint64_t seed,
                                         std::size_t count);

// Same bytes wrapped as an unsigned 8-bit stream.
SampleStream lcg_stream(const LcgParams& p, std::uint64_t seed, std::size_t count);

} // namespace rngml
