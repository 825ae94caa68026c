#include "rngml/sts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rngml/errors.hpp"
#include "rngml/fft.hpp"

namespace rngml::sts {

namespace {

double phi_normal(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void require_len(const BitSequence& bits, std::size_t min,
                 const char* test) {
    require(bits.size() >= min, std::string(test) + ": sequence of " +
                                    std::to_string(bits.size()) +
                                    " bits is below the minimum of " +
                                    std::to_string(min));
}

} // namespace

BitSequence bytes_to_bits(const SampleStream& s) {
    require(s.bit_depth == 8, "bytes_to_bits: stream bit depth must be 8");
    BitSequence bits;
    bits.reserve(s.values.size() * 8);
    for (std::int16_t v : s.values) {
        auto byte = std::uint8_t(v);
        for (int k = 7; k >= 0; --k) bits.push_back((byte >> k) & 1);
    }
    return bits;
}

double igamc(double a, double x) {
    require(a > 0.0 && x >= 0.0, "igamc: need a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    const double lead = std::exp(-x + a * std::log(x) - std::lgamma(a));
    if (x < a + 1.0) {
        // lower series, then complement
        double term = 1.0 / a;
        double sum = term;
        for (int k = 1; k < 10000; ++k) {
            term *= x / (a + k);
            sum += term;
            if (term < sum * 1e-17) break;
        }
        return 1.0 - lead * sum;
    }
    // upper continued fraction, modified Lentz
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return lead * h;
}

double frequency_test(const BitSequence& bits) {
    require_len(bits, 100, "frequency");
    const auto n = double(bits.size());
    long long s = 0;
    for (bool b : bits) s += b ? 1 : -1;
    return std::erfc(std::fabs(double(s)) / std::sqrt(n) / std::sqrt(2.0));
}

double block_frequency_test(const BitSequence& bits, std::size_t block_len) {
    require(block_len >= 2, "block_frequency: block length must be >= 2");
    require_len(bits, std::max<std::size_t>(100, block_len), "block_frequency");
    const std::size_t blocks = bits.size() / block_len;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < blocks; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < block_len; ++j)
            ones += bits[i * block_len + j];
        const double pi = double(ones) / double(block_len);
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * double(block_len);
    return igamc(double(blocks) / 2.0, chi2 / 2.0);
}

double runs_test(const BitSequence& bits) {
    require_len(bits, 100, "runs");
    const auto n = double(bits.size());
    std::size_t ones = 0;
    for (bool b : bits) ones += b;
    const double pi = double(ones) / n;
    // prerequisite: the frequency statistic must already be plausible
    if (std::fabs(pi - 0.5) >= 2.0 / std::sqrt(n)) return 0.0;
    std::size_t v = 1;
    for (std::size_t i = 1; i < bits.size(); ++i) v += bits[i] != bits[i - 1];
    const double num = std::fabs(double(v) - 2.0 * n * pi * (1.0 - pi));
    const double den = 2.0 * std::sqrt(2.0 * n) * pi * (1.0 - pi);
    return std::erfc(num / den);
}

double longest_run_test(const BitSequence& bits) {
    require_len(bits, 128, "longest_run");
    const std::size_t n = bits.size();
    // block size, class boundaries and their asymptotic probabilities are
    // fixed by the sequence length
    std::size_t block_len, lo;
    std::vector<double> pi;
    if (n < 6272) {
        block_len = 8;
        lo = 1;
        pi = {0.21484375, 0.3671875, 0.23046875, 0.1875};
    } else if (n < 750000) {
        block_len = 128;
        lo = 4;
        pi = {0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124};
    } else {
        block_len = 10000;
        lo = 10;
        pi = {0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727};
    }
    const std::size_t classes = pi.size();
    const std::size_t blocks = n / block_len;
    std::vector<std::size_t> nu(classes, 0);
    for (std::size_t i = 0; i < blocks; ++i) {
        std::size_t longest = 0, run = 0;
        for (std::size_t j = 0; j < block_len; ++j) {
            run = bits[i * block_len + j] ? run + 1 : 0;
            longest = std::max(longest, run);
        }
        const std::size_t cls =
            longest <= lo ? 0 : std::min(longest - lo, classes - 1);
        ++nu[cls];
    }
    double chi2 = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double expect = double(blocks) * pi[c];
        chi2 += (double(nu[c]) - expect) * (double(nu[c]) - expect) / expect;
    }
    return igamc(double(classes - 1) / 2.0, chi2 / 2.0);
}

namespace {

double cusum_p(std::size_t n, std::size_t z) {
    const double zf = double(z), nf = double(n);
    const double sq = std::sqrt(nf);
    double sum1 = 0.0;
    const auto k1_lo = (long long)std::floor((-nf / zf + 1.0) / 4.0);
    const auto k1_hi = (long long)std::floor((nf / zf - 1.0) / 4.0);
    for (long long k = k1_lo; k <= k1_hi; ++k)
        sum1 += phi_normal((4.0 * double(k) + 1.0) * zf / sq) -
                phi_normal((4.0 * double(k) - 1.0) * zf / sq);
    double sum2 = 0.0;
    const auto k2_lo = (long long)std::floor((-nf / zf - 3.0) / 4.0);
    for (long long k = k2_lo; k <= k1_hi; ++k)
        sum2 += phi_normal((4.0 * double(k) + 3.0) * zf / sq) -
                phi_normal((4.0 * double(k) + 1.0) * zf / sq);
    return std::clamp(1.0 - sum1 + sum2, 0.0, 1.0);
}

} // namespace

std::pair<double, double> cumulative_sums_test(const BitSequence& bits) {
    require_len(bits, 100, "cumulative_sums");
    const std::size_t n = bits.size();
    long long s = 0, peak_f = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s += bits[i] ? 1 : -1;
        peak_f = std::max(peak_f, std::llabs(s));
    }
    s = 0;
    long long peak_b = 0;
    for (std::size_t i = n; i-- > 0;) {
        s += bits[i] ? 1 : -1;
        peak_b = std::max(peak_b, std::llabs(s));
    }
    return {cusum_p(n, std::size_t(peak_f)), cusum_p(n, std::size_t(peak_b))};
}

double spectral_test(const BitSequence& bits) {
    require_len(bits, 100, "spectral");
    const std::size_t n = bits.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = bits[i] ? 1.0 : -1.0;
    const auto spec = rfft(x);
    const double t = std::sqrt(double(n) * std::log(1.0 / 0.05));
    std::size_t below = 0;
    for (std::size_t j = 0; j < n / 2; ++j)
        below += std::abs(spec[j]) < t;
    const double n0 = 0.95 * double(n) / 2.0;
    const double d =
        (double(below) - n0) / std::sqrt(double(n) * 0.95 * 0.05 / 4.0);
    return std::erfc(std::fabs(d) / std::sqrt(2.0));
}

namespace {

// sum of squared pattern counts over all n circular windows of length m,
// scaled into the serial-test psi-squared statistic; m == 0 contributes 0
double psi_sq(const BitSequence& bits, std::size_t m) {
    if (m == 0) return 0.0;
    const std::size_t n = bits.size();
    const std::size_t mask = (std::size_t(1) << m) - 1;
    std::vector<std::uint32_t> counts(mask + 1, 0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i + 1 < m; ++i) idx = (idx << 1) | bits[i];
    for (std::size_t i = 0; i < n; ++i) {
        idx = ((idx << 1) | bits[(i + m - 1) % n]) & mask;
        ++counts[idx];
    }
    double sq = 0.0;
    for (std::uint32_t c : counts) sq += double(c) * double(c);
    return sq * double(mask + 1) / double(n) - double(n);
}

} // namespace

std::pair<double, double> serial_test(const BitSequence& bits, std::size_t m) {
    require(m >= 2, "serial: pattern length must be >= 2");
    require_len(bits, std::size_t(1) << (m + 1), "serial");
    const double psi_m = psi_sq(bits, m);
    const double psi_m1 = psi_sq(bits, m - 1);
    const double psi_m2 = psi_sq(bits, m - 2);
    const double del1 = psi_m - psi_m1;
    const double del2 = psi_m - 2.0 * psi_m1 + psi_m2;
    const double p1 = igamc(std::pow(2.0, double(m) - 2.0), del1 / 2.0);
    const double p2 = igamc(std::pow(2.0, double(m) - 3.0), del2 / 2.0);
    return {p1, p2};
}

double approximate_entropy_test(const BitSequence& bits, std::size_t m) {
    require(m >= 1, "approximate_entropy: pattern length must be >= 1");
    require_len(bits, std::size_t(1) << (m + 2), "approximate_entropy");
    const std::size_t n = bits.size();
    auto phi = [&](std::size_t len) {
        const std::size_t mask = (std::size_t(1) << len) - 1;
        std::vector<std::uint32_t> counts(mask + 1, 0);
        std::size_t idx = 0;
        for (std::size_t i = 0; i + 1 < len; ++i) idx = (idx << 1) | bits[i];
        for (std::size_t i = 0; i < n; ++i) {
            idx = ((idx << 1) | bits[(i + len - 1) % n]) & mask;
            ++counts[idx];
        }
        double acc = 0.0;
        for (std::uint32_t c : counts)
            if (c > 0) {
                const double f = double(c) / double(n);
                acc += f * std::log(f);
            }
        return acc;
    };
    const double apen = phi(m) - phi(m + 1);
    const double chi2 = 2.0 * double(n) * (std::log(2.0) - apen);
    return igamc(std::pow(2.0, double(m) - 1.0), chi2 / 2.0);
}

const std::vector<std::string>& battery_test_names() {
    static const std::vector<std::string> names = {
        "frequency",       "block_frequency", "runs",
        "longest_run",     "cumulative_sums", "spectral",
        "serial",          "approximate_entropy",
    };
    return names;
}

std::vector<double> run_test(const std::string& name, const BitSequence& bits,
                             const BatteryParams& params) {
    if (name == "frequency") return {frequency_test(bits)};
    if (name == "block_frequency")
        return {block_frequency_test(bits, params.block_len)};
    if (name == "runs") return {runs_test(bits)};
    if (name == "longest_run") return {longest_run_test(bits)};
    if (name == "cumulative_sums") {
        auto [f, b] = cumulative_sums_test(bits);
        return {f, b};
    }
    if (name == "spectral") return {spectral_test(bits)};
    if (name == "serial") {
        auto [p1, p2] = serial_test(bits, params.serial_m);
        return {p1, p2};
    }
    if (name == "approximate_entropy")
        return {approximate_entropy_test(bits, params.apen_m)};
    throw ContractError("run_test: unknown test name '" + name + "'");
}

namespace {

double uniformity_p(const std::vector<double>& ps) {
    std::size_t bins[10] = {};
    for (double p : ps) {
        auto b = std::size_t(p * 10.0);
        ++bins[std::min<std::size_t>(b, 9)];
    }
    const double expect = double(ps.size()) / 10.0;
    double chi2 = 0.0;
    for (std::size_t b : bins)
        chi2 += (double(b) - expect) * (double(b) - expect) / expect;
    return igamc(4.5, chi2 / 2.0);
}

} // namespace

BatteryResult run_battery(const BitSequence& bits, std::size_t n_sequences,
                          std::size_t seq_len, const BatteryParams& params) {
    require(n_sequences > 0 && seq_len > 0,
            "run_battery: need at least one sequence of positive length");
    require(bits.size() >= n_sequences * seq_len,
            "run_battery: " + std::to_string(n_sequences) + " x " +
                std::to_string(seq_len) + " bits requested but only " +
                std::to_string(bits.size()) + " supplied");

    BatteryResult out;
    out.n_sequences = n_sequences;
    out.seq_len = seq_len;
    out.alpha = params.alpha;
    const double half_band =
        3.0 * std::sqrt(params.alpha * (1.0 - params.alpha) /
                        double(n_sequences));
    out.proportion_lo = (1.0 - params.alpha) - half_band;
    out.proportion_hi = (1.0 - params.alpha) + half_band;

    // p_streams[test][emission] is one p-value per sequence, in order
    const auto& names = battery_test_names();
    std::vector<std::vector<std::vector<double>>> p_streams(names.size());
    for (std::size_t s = 0; s < n_sequences; ++s) {
        BitSequence seq(bits.begin() + long(s * seq_len),
                        bits.begin() + long((s + 1) * seq_len));
        for (std::size_t t = 0; t < names.size(); ++t) {
            const auto ps = run_test(names[t], seq, params);
            if (s == 0) p_streams[t].resize(ps.size());
            for (std::size_t e = 0; e < ps.size(); ++e)
                p_streams[t][e].push_back(ps[e]);
        }
    }

    for (std::size_t t = 0; t < names.size(); ++t) {
        TestResult row;
        row.name = names[t];
        bool first = true;
        for (const auto& stream : p_streams[t]) {
            std::size_t hits = 0;
            for (double p : stream) hits += p >= params.alpha;
            const double prop = double(hits) / double(n_sequences);
            const double uni = uniformity_p(stream);
            const bool prop_ok =
                prop >= out.proportion_lo && prop <= out.proportion_hi;
            const bool uni_ok = uni > 1e-4;
            const bool ok = prop_ok && uni_ok;
            // report the worst-scoring emission stream of a multi-value test
            const bool worse =
                std::make_tuple(ok, prop, uni) <
                std::make_tuple(row.pass, row.proportion, row.uniformity_p);
            if (first || worse) {
                row.p_values = stream;
                row.proportion = prop;
                row.uniformity_p = uni;
                row.proportion_pass = prop_ok;
                row.uniformity_pass = uni_ok;
                row.pass = ok;
                first = false;
            }
        }
        out.total_passed += row.pass;
        out.per_test.push_back(std::move(row));
    }
    return out;
}

} // namespace rngml::sts
