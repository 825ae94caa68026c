#include "rngml/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <utility>

#include "rngml/errors.hpp"
#include "rngml/fft.hpp"
#include "rngml/rng.hpp"

namespace rngml {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

// cos(2 pi f t + phase) with the argument reduced before the multiply by
// 2 pi, so multi-million-sample tones keep full precision
double tone_sample(double freq, std::size_t t, double phase) {
    return std::cos(kTwoPi * std::fmod(freq * static_cast<double>(t), 1.0) +
                    phase);
}

// antialiasing filter for an integer-factor rate reduction; sized so the
// transition band is a small fraction of the kept band and decimated noise
// stays white to well under the statistical test bands
std::size_t antialias_taps(std::size_t factor) {
    return 616 * factor + 1;
}

} // namespace

std::string to_string(ToneKind k) {
    switch (k) {
        case ToneKind::common_mode: return "common_mode";
        case ToneKind::detector1_only: return "detector1_only";
        case ToneKind::detector2_only: return "detector2_only";
    }
    std::abort();
}

ToneKind tone_kind_from_string(const std::string& s) {
    if (s == "common_mode") return ToneKind::common_mode;
    if (s == "detector1_only") return ToneKind::detector1_only;
    if (s == "detector2_only") return ToneKind::detector2_only;
    throw ParseError("unknown tone kind: " + s);
}

void validate_config(const ChainConfig& cfg) {
    require(cfg.n_samples > 0, "chain: n_samples must be positive");
    require(cfg.oversample >= 2, "chain: oversample must be an integer >= 2");
    require(cfg.quantum_sd >= 0.0, "chain: quantum_sd must be >= 0");
    require(cfg.electronic_sd >= 0.0, "chain: electronic_sd must be >= 0");
    require(cfg.lo_sd >= 0.0, "chain: lo_sd must be >= 0");
    for (const auto& tone : cfg.tones) {
        require(tone.freq > 0.0 && tone.freq < 0.5,
                "chain: tone freq must be in (0, 0.5) of the internal rate");
        require(tone.amplitude >= 0.0, "chain: tone amplitude must be >= 0");
    }
    require(cfg.cmrr_epsilon >= 0.0 && cfg.cmrr_epsilon <= 1.0,
            "chain: cmrr_epsilon must be in [0, 1]");
    for (double f : cfg.demod_freqs)
        require(f > 0.0 && f < 0.5,
                "chain: demod freq must be in (0, 0.5) of the internal rate");
    require(cfg.lpf_cutoff > 0.0 && cfg.lpf_cutoff <= 1.0,
            "chain: lpf_cutoff must be in (0, 1] of the output Nyquist");
    require(cfg.lpf_taps >= 3 && cfg.lpf_taps % 2 == 1,
            "chain: lpf_taps must be odd and >= 3");
    require(cfg.adc_bits == 8 || cfg.adc_bits == 16,
            "chain: adc_bits must be 8 or 16");
    require(cfg.adc_fullscale > 0.0, "chain: adc_fullscale must be positive");
}

DetectorTraces synth_detector_traces(const ChainConfig& cfg) {
    validate_config(cfg);
    const std::size_t n = cfg.n_samples * cfg.oversample;

    // fixed derivation order keeps every noise stream tied to the top-level
    // seed no matter which sources are active
    Rng master(cfg.seed);
    Rng rng_e1 = master.child(1);
    Rng rng_e2 = master.child(2);
    Rng rng_lo = master.child(3);
    Rng rng_q = master.child(4);

    // deterministic tone sums per destination
    std::vector<double> common(n, 0.0), local1(n, 0.0), local2(n, 0.0);
    for (const auto& tone : cfg.tones) {
        std::vector<double>* dst = &common;
        if (tone.kind == ToneKind::detector1_only) dst = &local1;
        if (tone.kind == ToneKind::detector2_only) dst = &local2;
        for (std::size_t t = 0; t < n; ++t)
            (*dst)[t] += tone.amplitude * tone_sample(tone.freq, t, tone.phase);
    }

    const double imb1 = 1.0 + cfg.cmrr_epsilon / 2.0;
    const double imb2 = 1.0 - cfg.cmrr_epsilon / 2.0;

    DetectorTraces out;
    out.det1.resize(n);
    out.det2.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double d1 = common[t] * imb1 + local1[t] +
                    cfg.electronic_sd * rng_e1.next_normal();
        double d2 = common[t] * imb2 + local2[t] +
                    cfg.electronic_sd * rng_e2.next_normal();
        if (cfg.lo_on) {
            const double lo = cfg.lo_sd * rng_lo.next_normal();
            const double q = cfg.quantum_sd * rng_q.next_normal();
            d1 += (lo + q) * kInvSqrt2;
            d2 += (lo - q) * kInvSqrt2;
        }
        out.det1[t] = d1;
        out.det2[t] = d2;
    }
    return out;
}

std::vector<double> combine(const std::vector<double>& a,
                            const std::vector<double>& b, CombineOp op) {
    require(a.size() == b.size(), "combine: traces must have equal length");
    std::vector<double> out(a.size());
    if (op == CombineOp::difference) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    }
    return out;
}

std::vector<double> demodulate(const std::vector<double>& trace, double freq) {
    require(freq > 0.0 && freq < 0.5,
            "demodulate: freq must be in (0, 0.5) of the trace rate");
    std::vector<double> out(trace.size());
    for (std::size_t t = 0; t < trace.size(); ++t)
        out[t] = 2.0 * trace[t] * tone_sample(freq, t, 0.0);
    return out;
}

std::vector<double> fir_lowpass(const std::vector<double>& trace,
                                double cutoff, std::size_t taps) {
    require(cutoff > 0.0 && cutoff < 0.5,
            "fir_lowpass: cutoff must be in (0, 0.5) of the trace rate");
    require(taps >= 3 && taps % 2 == 1, "fir_lowpass: taps must be odd >= 3");
    if (trace.empty()) return {};

    const std::size_t mid = (taps - 1) / 2;
    std::vector<double> h(taps);
    for (std::size_t k = 0; k < taps; ++k) {
        const double x = static_cast<double>(k) - static_cast<double>(mid);
        const double sinc =
            x == 0.0 ? 2.0 * cutoff : std::sin(kTwoPi * cutoff * x) /
                                          (std::numbers::pi * x);
        const double window =
            0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(k) /
                                   static_cast<double>(taps - 1));
        h[k] = sinc * window;
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;

    // same-length output: the full convolution shifted by the group delay,
    // so edges see implicit zero padding
    std::vector<double> full = fft_convolve(trace, h);
    return {full.begin() + static_cast<std::ptrdiff_t>(mid),
            full.begin() + static_cast<std::ptrdiff_t>(mid + trace.size())};
}

std::vector<double> decimate(const std::vector<double>& trace,
                             std::size_t factor, bool antialias) {
    require(factor >= 1, "decimate: factor must be >= 1");
    if (factor == 1) return trace;
    const std::vector<double>* src = &trace;
    std::vector<double> filtered;
    if (antialias) {
        filtered = fir_lowpass(trace, 1.0 / (2.0 * static_cast<double>(factor)),
                               antialias_taps(factor));
        src = &filtered;
    }
    std::vector<double> out;
    out.reserve((trace.size() + factor - 1) / factor);
    for (std::size_t i = 0; i < src->size(); i += factor)
        out.push_back((*src)[i]);
    return out;
}

SampleStream quantize(const std::vector<double>& trace, int bits,
                      double fullscale) {
    require(bits == 8 || bits == 16, "quantize: bits must be 8 or 16");
    require(fullscale > 0.0, "quantize: fullscale must be positive");
    const long long top = (1LL << (bits - 1)) - 1;
    const long long bottom = -(1LL << (bits - 1));
    const double scale = static_cast<double>(top) / fullscale;

    SampleStream s;
    s.bit_depth = bits;
    s.values.resize(trace.size());
    std::uint64_t clipped = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double v = trace[i];
        if (v >= fullscale || v <= -fullscale) ++clipped;
        const long long code =
            std::clamp(std::llround(v * scale), bottom, top);
        s.values[i] = static_cast<std::int16_t>(code);
    }
    s.extra["clipped"] = std::to_string(clipped);
    // quantizer geometry, needed later to convert codes back to input units
    // and to bound the per-code probability of a known-noise input
    char fs[32];
    std::snprintf(fs, sizeof fs, "%.17g", fullscale);
    s.extra["fullscale"] = fs;
    s.extra["adc_bits"] = std::to_string(bits);
    return s;
}

std::map<Stage, SampleStream> run_chain(const ChainConfig& cfg,
                                        Scenario scenario) {
    require(scenario != Scenario::none,
            "run_chain: scenario must be classical or quantum_classical");
    ChainConfig c = cfg;
    c.lo_on = scenario == Scenario::quantum_classical;
    validate_config(c);

    const std::size_t R = c.oversample;
    // demod low-pass cutoff, translated from the output Nyquist axis to a
    // fraction of the internal rate
    const double lpf_internal = c.lpf_cutoff / (2.0 * static_cast<double>(R));

    std::map<Stage, SampleStream> out;
    auto finish = [&](std::vector<double>&& samples, Stage stage) {
        SampleStream s = quantize(samples, c.adc_bits, c.adc_fullscale);
        if (c.adc_bits == 16) s = truncate_to_msb(s, 13);
        s.stage = stage;
        s.scenario = scenario;
        s.seed = c.seed;
        s.rate_ratio = RateRatio{1, 1};
        s.extra["oversample"] = std::to_string(R);
        out[stage] = std::move(s);
    };

    DetectorTraces traces = synth_detector_traces(c);
    std::vector<double> diff =
        combine(traces.det1, traces.det2, CombineOp::difference);
    std::vector<double> sum = combine(traces.det1, traces.det2, CombineOp::sum);

    finish(decimate(traces.det1, R, true), Stage::det1);
    std::vector<double>().swap(traces.det1);
    finish(decimate(traces.det2, R, true), Stage::det2);
    std::vector<double>().swap(traces.det2);

    // two processed taps per arm: folded (decimated raw) and low-passed
    auto process_arm = [&](std::vector<double>& arm, double freq,
                           Stage folded_stage, Stage filtered_stage,
                           Stage raw_stage) {
        std::vector<double> dem = demodulate(arm, freq);
        finish(decimate(dem, R, false), folded_stage);
        finish(decimate(fir_lowpass(dem, lpf_internal, c.lpf_taps), R, true),
               filtered_stage);
        std::vector<double>().swap(dem);
        finish(decimate(arm, R, true), raw_stage);
        std::vector<double>().swap(arm);
        out[folded_stage].extra["demod_freq"] = std::to_string(freq);
        out[filtered_stage].extra["demod_freq"] = std::to_string(freq);
    };
    process_arm(diff, c.demod_freqs[0], Stage::demod1, Stage::lpf1,
                Stage::diff);
    process_arm(sum, c.demod_freqs[1], Stage::demod2, Stage::lpf2, Stage::sum);

    return out;
}

} // namespace rngml
