#include "rngml/lcg.hpp"

#include <numeric>

#include "rngml/errors.hpp"

namespace rngml {

void validate_lcg(const LcgParams& p) {
    require(p.m >= 2, "lcg: modulus must be at least 2");
    require(p.m <= (std::uint64_t(1) << 63), "lcg: modulus must be at most 2^63");
    // a and c larger than m are fine: the recurrence only sees them mod m,
    // and textbook parameter sets keep the same multiplier across moduli
    require(p.a >= 1, "lcg: multiplier must be at least 1");
}

std::uint64_t lcg_next_state(const LcgParams& p, std::uint64_t x) {
    validate_lcg(p);
    require(x < p.m, "lcg: state must be in [0, m)");
    const unsigned __int128 prod =
        static_cast<unsigned __int128>(p.a) * x + p.c;
    return static_cast<std::uint64_t>(prod % p.m);
}

std::vector<std::uint64_t> distinct_prime_factors(std::uint64_t n) {
    std::vector<std::uint64_t> out;
    if (n % 2 == 0) {
        out.push_back(2);
        while (n % 2 == 0) n /= 2;
    }
    for (std::uint64_t d = 3; d * d <= n; d += 2) {
        if (n % d == 0) {
            out.push_back(d);
            while (n % d == 0) n /= d;
        }
    }
    if (n > 1) out.push_back(n);
    return out;
}

FullPeriodCheck hull_dobell(const LcgParams& p) {
    validate_lcg(p);
    if (std::gcd(p.c, p.m) != 1)
        return {false, "increment shares a factor with the modulus"};
    const std::uint64_t am1 = p.a - 1;
    for (std::uint64_t q : distinct_prime_factors(p.m)) {
        if (am1 % q != 0)
            return {false,
                    "a-1 not divisible by prime factor " + std::to_string(q) +
                        " of the modulus"};
    }
    if (p.m % 4 == 0 && am1 % 4 != 0)
        return {false, "modulus divisible by 4 but a-1 is not"};
    return {true, ""};
}

std::vector<std::uint8_t> lcg_emit_bytes(const LcgParams& p, std::uint64_t seed,
                                         std::size_t count) {
    validate_lcg(p);
    require(seed < p.m, "lcg: seed must be in [0, m)");
    std::vector<std::uint8_t> out(count);
    std::uint64_t x = seed;
    for (std::size_t i = 0; i < count; ++i) {
        x = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(p.a) * x + p.c) % p.m);
        out[i] = static_cast<std::uint8_t>(
            (static_cast<unsigned __int128>(x) << 8) / p.m);
    }
    return out;
}

SampleStream lcg_stream(const LcgParams& p, std::uint64_t seed, std::size_t count) {
    const auto bytes = lcg_emit_bytes(p, seed, count);
    SampleStream s;
    s.values.assign(bytes.begin(), bytes.end());
    s.bit_depth = 8;
    s.unsigned_range = true;
    s.stage = Stage::lcg;
    s.scenario = Scenario::none;
    s.seed = seed;
    return s;
}

} // namespace rngml
