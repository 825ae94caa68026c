#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rngml {

// Where in the measurement chain a stream was taken.
enum class Stage {
    det1,   // detector 1 trace
    det2,   // detector 2 trace
    diff,   // balanced difference
    sum,    // detector sum
    demod1, // difference arm after demodulation, no low-pass
    demod2, // sum arm after demodulation, no low-pass
    lpf1,   // difference arm, demodulated and low-passed
    lpf2,   // sum arm, demodulated and low-passed
    lcg,    // congruential generator bytes
    hashed, // extractor output
};

enum class Scenario {
    classical,         // local oscillator off: electronic noise only
    quantum_classical, // local oscillator on: vacuum noise plus electronics
    none,              // not produced by the simulator (lcg, hashed, ...)
};

std::string to_string(Stage s);
std::string to_string(Scenario s);
Stage stage_from_string(const std::string& s);
Scenario scenario_from_string(const std::string& s);

struct RateRatio {
    std::int64_t num = 1;
    std::int64_t den = 1;
    bool operator==(const RateRatio&) const = default;
};

// A finite recording of integer samples plus the metadata needed to
// interpret it. Payload values are signed unless unsigned_range is set
// (byte-oriented sources use 0..255).
struct SampleStream {
    std::vector<std::int16_t> values;
    int bit_depth = 16;
    bool unsigned_range = false;
    Stage stage = Stage::lcg;
    Scenario scenario = Scenario::none;
    std::uint64_t seed = 0;
    RateRatio rate_ratio;
    // optional free-form header entries (e.g. extractor parameters);
    // preserved verbatim across store/load
    std::map<std::string, std::string> extra;

    std::int64_t min_value() const;
    std::int64_t max_value() const;
};

// Serialize to a small text header (one "key value" pair per line, blank
// line terminator) followed by the samples as little-endian int16 words.
void store_stream(const SampleStream& s, const std::string& path);
SampleStream load_stream(const std::string& path);

// In-memory variants, used by tests and by the digest below.
std::string stream_header_bytes(const SampleStream& s);

// FNV-1a 64 over the exact header bytes; recorded in run manifests so a
// rerun can be checked for drift without hashing whole payloads.
std::uint64_t header_digest(const SampleStream& s);

// Keep the top `bits` of each sample (arithmetic shift), the usual trick
// for dropping ADC noise bits. Result has bit_depth = bits.
SampleStream truncate_to_msb(const SampleStream& s, int bits);

} // namespace rngml
