#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml {

// Seeded universal hashing over GF(2). The matrix is out x in Toeplitz:
// constant along diagonals, fully determined by a seed of
// in + out - 1 bits (first column seed[0..out), first row seed[out-1..)).
struct ExtractorConfig {
    std::size_t in_block_bits = 1024;
    std::size_t out_block_bits = 0;
    std::vector<bool> seed_bits; // length in_block_bits + out_block_bits - 1
    double safety_factor = 0.5;
};

// secure output fraction: safety * h_min_cond / bits_per_sample
double extraction_ratio(double h_min_cond_bits, double bits_per_sample,
                        double safety);

// Sizes the output block from the conditional min-entropy, rounding down,
// and draws the matrix seed deterministically from the given generator seed.
ExtractorConfig make_extractor_config(std::size_t in_block_bits,
                                      double h_min_cond_bits,
                                      int bits_per_sample, double safety,
                                      std::uint64_t seed);

// hex round-trip for the matrix seed (MSB-first nibbles, recorded in
// stream headers)
std::string seed_to_hex(const std::vector<bool>& bits);
std::vector<bool> seed_from_hex(const std::string& hex, std::size_t n_bits);

// y = T x over GF(2); input length must equal in_block_bits
std::vector<bool> toeplitz_extract(const std::vector<bool>& input,
                                   const ExtractorConfig& cfg);

// Serialize samples to bits (bit_depth bits each, MSB first), hash every
// full in-block, concatenate, and repack MSB-first as 8-bit samples;
// trailing partial block and partial byte are dropped. The config must not
// claim more output than the extraction ratio allows for h_min_cond_bits.
SampleStream extract_stream(const SampleStream& s, const ExtractorConfig& cfg,
                            double h_min_cond_bits);

} // namespace rngml
