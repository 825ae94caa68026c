#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml {

// Simulation of a balanced homodyne measurement chain: two photodetector
// traces are synthesized at an oversampled internal rate, combined,
// optionally demodulated and filtered, then decimated and quantized to the
// output rate. Every produced stream is tagged with the Stage it was tapped
// from so downstream analysis can tell raw detector data from processed arms.

enum class ToneKind {
    common_mode,     // identical in both detectors (pickup, RF leakage)
    detector1_only,  // local to detector 1
    detector2_only,  // local to detector 2
};

struct ToneSpec {
    double freq = 0.0;       // fraction of the internal rate, in (0, 0.5)
    double amplitude = 0.0;  // >= 0, same units as the noise deviations
    double phase = 0.0;      // radians
    ToneKind kind = ToneKind::common_mode;
};

std::string to_string(ToneKind k);
ToneKind tone_kind_from_string(const std::string& s);

struct ChainConfig {
    std::size_t n_samples = 0;   // output samples per stage stream
    std::size_t oversample = 8;  // internal rate / output rate, integer >= 2
    bool lo_on = false;          // local oscillator; run_chain overrides per scenario
    double quantum_sd = 0.0;     // sd of the vacuum-quadrature signal, LO on only
    double electronic_sd = 1.0;  // per-detector electronic noise sd
    double lo_sd = 0.0;          // classical intensity noise riding on the LO
    std::vector<ToneSpec> tones;
    double cmrr_epsilon = 0.0;   // fraction of each common tone surviving subtraction
    std::array<double, 2> demod_freqs = {0.3125, 0.1875};  // fractions of internal rate
    double lpf_cutoff = 1.0;     // fraction of the output Nyquist, in (0, 1]
    std::size_t lpf_taps = 801;  // odd tap count for the demodulation low-pass
    int adc_bits = 16;           // 8 or 16
    double adc_fullscale = 160.0;
    std::uint64_t seed = 1;
};

// throws ContractError on out-of-range fields
void validate_config(const ChainConfig& cfg);

struct DetectorTraces {
    std::vector<double> det1;  // internal rate, n_samples * oversample long
    std::vector<double> det2;
};

// Detector model: each trace carries the common tones scaled by its
// imbalance (+-cmrr_epsilon/2, so the balanced difference keeps exactly
// cmrr_epsilon of each common tone), its own local tones, independent
// electronic noise, and - with the LO on - the shared intensity noise plus
// the antisymmetric quadrature signal, both split 1/sqrt(2) per detector.
DetectorTraces synth_detector_traces(const ChainConfig& cfg);

enum class CombineOp { difference, sum };

// elementwise a-b or a+b; length mismatch is a contract violation
std::vector<double> combine(const std::vector<double>& a,
                            const std::vector<double>& b, CombineOp op);

// out[t] = 2 * trace[t] * cos(2 pi freq t), freq a fraction of the trace
// rate in (0, 0.5); the factor 2 keeps a matched tone at unit gain
std::vector<double> demodulate(const std::vector<double>& trace, double freq);

// Hamming windowed-sinc low-pass. cutoff is a fraction of the trace rate in
// (0, 0.5); taps must be odd. Output has the same length as the input
// (edges see zero padding) and the filter is normalized to unit DC gain.
std::vector<double> fir_lowpass(const std::vector<double>& trace,
                                double cutoff, std::size_t taps);

// Keep every factor-th sample (starting at index 0). With antialias set, a
// low-pass at 1/(2*factor) of the input rate is applied first; without it,
// energy above the new Nyquist folds back (f -> 1 - f on the new axis).
// factor == 1 returns the trace unchanged.
std::vector<double> decimate(const std::vector<double>& trace,
                             std::size_t factor, bool antialias);

// Mid-tread quantizer: code = clamp(round-half-away-from-zero(
// value / fullscale * (2^(bits-1) - 1)), -2^(bits-1), 2^(bits-1) - 1).
// bits is 8 or 16. The count of clipped samples (|value| >= fullscale) is
// recorded in the result's extra["clipped"].
SampleStream quantize(const std::vector<double>& trace, int bits,
                      double fullscale);

// Full chain: synthesizes one pair of detector traces (lo_on forced from
// the scenario) and taps eight streams, each decimated to the output rate,
// quantized at 16 bits and truncated to the top 13:
//   det1/det2     raw traces, antialiased decimation
//   diff/sum      balanced difference and sum, antialiased decimation
//   demod1/demod2 diff (sum) arm demodulated at demod_freqs[0] (1), then
//                 decimated WITHOUT antialiasing - out-of-band products fold
//   lpf1/lpf2     demodulated, low-passed at lpf_cutoff, then decimated
std::map<Stage, SampleStream> run_chain(const ChainConfig& cfg,
                                        Scenario scenario);

} // namespace rngml
