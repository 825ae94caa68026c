#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml {

// Empirical symbol distribution over a dense integer alphabet.
struct Histogram {
    std::int64_t lo = 0;            // symbol value of counts[0]
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    double probability(std::int64_t symbol) const;
};

// Count every sample against the stream's full declared range, so
// never-seen symbols appear with count zero.
Histogram histogram(const SampleStream& s);

// Best single-guess probability: the mode of the distribution, ties
// resolved toward the smaller symbol.
struct Guess {
    double p_g = 0.0;
    std::int64_t mode_symbol = 0;
};
Guess guessing_probability(const Histogram& h);

// worst-case entropy of one draw
double min_entropy(double p_g);

// How far a predictor's hit rate sits above the best static guess, in
// units of the larger of (spread across test sets, binomial deviation of
// a static guesser on one test set).
double advantage_sigma(double p_ml_mean, double p_ml_sd, double p_g,
                       std::uint64_t windows_per_set);

// Welch-averaged one-sided power spectral density. Hann window, 50%
// overlap, mean removed once up front. Frequencies are fractions of the
// sample rate: bin k sits at k / segment.
struct Psd {
    std::vector<double> power;  // segment/2 + 1 bins
    double bin_width = 0.0;     // 1 / segment
};
Psd welch_psd(const std::vector<double>& x, std::size_t segment = 4096);

// normalized autocorrelation r(0..max_lag) with r(0) = 1, FFT-based
std::vector<double> autocorrelation(const std::vector<double>& x,
                                    std::size_t max_lag);

// the +-1/sqrt(n) whiteness band used when judging autocorrelations
double autocorr_band(std::size_t n);

// Pearson correlation at lag zero between two equal-length series
double cross_correlation(const std::vector<double>& x,
                         const std::vector<double>& y);

// Worst-case single-bin probability of a clipped, truncated ADC reading
// of a Gaussian signal, maximized over a grid of classical offsets
// e in [-5 sd_e, +5 sd_e]. sd_m is the total measured deviation, sd_e the
// classical (predictable) part; the quantum part is sqrt(sd_m^2 - sd_e^2).
// Quantizer: signed `bits` codes clipped at +-fullscale, then keep the top
// `keep_bits`. Returns bits of conditional min-entropy.
double conditional_min_entropy(double sd_m, double sd_e, int bits,
                               double fullscale, int keep_bits,
                               int grid_points = 2001);

std::vector<double> stream_to_doubles(const SampleStream& s);

// analysis CSV emitters (symbol,count,probability / lag,r / freq,power_db)
void write_histogram_csv(const Histogram& h, const std::string& path);
void write_autocorr_csv(const std::vector<double>& r, const std::string& path);
void write_psd_csv(const Psd& p, const std::string& path);

} // namespace rngml
