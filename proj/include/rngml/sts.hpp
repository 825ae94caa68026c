#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml::sts {

// Bit material under test. std::vector<bool> is bit-packed, which keeps a
// hundred 100-kbit sequences comfortably in memory.
using BitSequence = std::vector<bool>;

// MSB-first unpacking of an 8-bit stream.
BitSequence bytes_to_bits(const SampleStream& s);

// Regularized upper incomplete gamma Q(a, x), series/continued-fraction
// split at x = a + 1. Good to at least ten significant digits over the
// argument ranges the tests produce.
double igamc(double a, double x);

// ---- individual tests ------------------------------------------------------
// Each returns a p-value in [0, 1] (a pair where the test is two-sided in
// structure). Sequences shorter than a test's supported minimum raise a
// contract error naming that minimum.

double frequency_test(const BitSequence& bits);
double block_frequency_test(const BitSequence& bits, std::size_t block_len);
double runs_test(const BitSequence& bits);
double longest_run_test(const BitSequence& bits);
// forward and backward maximal-excursion p-values
std::pair<double, double> cumulative_sums_test(const BitSequence& bits);
double spectral_test(const BitSequence& bits);
// first and second generalized serial p-values for pattern length m
std::pair<double, double> serial_test(const BitSequence& bits, std::size_t m);
double approximate_entropy_test(const BitSequence& bits, std::size_t m);

// Per-test knobs, recorded in reports so a run is reproducible.
struct BatteryParams {
    std::size_t block_len = 128; // block frequency
    std::size_t serial_m = 5;
    std::size_t apen_m = 7;
    double alpha = 0.01;
};

// run one named test ("frequency", "block_frequency", "runs", "longest_run",
// "cumulative_sums", "spectral", "serial", "approximate_entropy")
std::vector<double> run_test(const std::string& name, const BitSequence& bits,
                             const BatteryParams& params = {});

const std::vector<std::string>& battery_test_names();

// One battery row. Tests that emit several p-values per sequence are
// scored per emission stream and the worst-scoring stream is reported.
struct TestResult {
    std::string name;
    std::vector<double> p_values; // reported stream, in sequence order
    double uniformity_p = 0.0;    // chi-square over ten p-value bins
    double proportion = 0.0;      // fraction of sequences with p >= alpha
    bool uniformity_pass = false;
    bool proportion_pass = false;
    bool pass = false;
};

struct BatteryResult {
    std::vector<TestResult> per_test;
    std::size_t total_passed = 0;
    std::size_t n_sequences = 0;
    std::size_t seq_len = 0;
    double alpha = 0.01;
    double proportion_lo = 0.0;
    double proportion_hi = 0.0;
};

// Slice `bits` into n_sequences consecutive runs of seq_len bits and apply
// all eight tests to each. Sequences are processed and reduced in order,
// so results are deterministic.
BatteryResult run_battery(const BitSequence& bits, std::size_t n_sequences,
                          std::size_t seq_len, const BatteryParams& params = {});

} // namespace rngml::sts
