#include "rngml/extractor.hpp"

#include <bit>
#include <cmath>

#include "rngml/errors.hpp"
#include "rngml/rng.hpp"

namespace rngml {

double extraction_ratio(double h_min_cond_bits, double bits_per_sample,
                        double safety) {
    require(h_min_cond_bits > 0.0 && h_min_cond_bits <= bits_per_sample,
            "extraction_ratio: need 0 < h_min_cond <= bits_per_sample");
    require(safety > 0.0 && safety <= 1.0,
            "extraction_ratio: safety factor must be in (0, 1]");
    return safety * h_min_cond_bits / bits_per_sample;
}

ExtractorConfig make_extractor_config(std::size_t in_block_bits,
                                      double h_min_cond_bits,
                                      int bits_per_sample, double safety,
                                      std::uint64_t seed) {
    require(in_block_bits > 0, "make_extractor_config: in_block_bits must be > 0");
    ExtractorConfig cfg;
    cfg.in_block_bits = in_block_bits;
    cfg.safety_factor = safety;
    const double ratio =
        extraction_ratio(h_min_cond_bits, double(bits_per_sample), safety);
    cfg.out_block_bits = std::size_t(double(in_block_bits) * ratio);
    require(cfg.out_block_bits > 0,
            "make_extractor_config: extraction ratio rounds the output block "
            "to zero bits; use a larger input block");
    Rng rng(seed);
    cfg.seed_bits.resize(cfg.in_block_bits + cfg.out_block_bits - 1);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < cfg.seed_bits.size(); ++i) {
        if (i % 64 == 0) word = rng.next_u64();
        cfg.seed_bits[i] = (word >> (i % 64)) & 1;
    }
    return cfg;
}

std::string seed_to_hex(const std::vector<bool>& bits) {
    static const char digits[] = "0123456789abcdef";
    std::string hex;
    hex.reserve((bits.size() + 3) / 4);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        unsigned nib = 0;
        for (std::size_t k = 0; k < 4 && i + k < bits.size(); ++k)
            nib |= unsigned(bits[i + k]) << (3 - k);
        hex.push_back(digits[nib]);
    }
    return hex;
}

std::vector<bool> seed_from_hex(const std::string& hex, std::size_t n_bits) {
    require(hex.size() == (n_bits + 3) / 4,
            "seed_from_hex: hex string length does not match the bit count");
    std::vector<bool> bits(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) {
        const char c = hex[i / 4];
        unsigned nib;
        if (c >= '0' && c <= '9') nib = unsigned(c - '0');
        else if (c >= 'a' && c <= 'f') nib = unsigned(c - 'a') + 10;
        else if (c >= 'A' && c <= 'F') nib = unsigned(c - 'A') + 10;
        else throw ParseError("seed_from_hex: invalid hex digit");
        bits[i] = (nib >> (3 - i % 4)) & 1;
    }
    return bits;
}

namespace {

void validate_config(const ExtractorConfig& cfg) {
    require(cfg.in_block_bits > 0 && cfg.out_block_bits > 0,
            "extractor: block sizes must be positive");
    require(cfg.out_block_bits <= cfg.in_block_bits,
            "extractor: output block cannot exceed the input block");
    require(cfg.seed_bits.size() ==
                cfg.in_block_bits + cfg.out_block_bits - 1,
            "extractor: seed must hold exactly in + out - 1 bits, got " +
                std::to_string(cfg.seed_bits.size()));
}

// rows of T packed LSB-first into 64-bit words for popcount parity
struct PackedRows {
    std::vector<std::uint64_t> words;
    std::size_t per_row = 0;
};

PackedRows pack_rows(const ExtractorConfig& cfg) {
    const std::size_t in = cfg.in_block_bits, out = cfg.out_block_bits;
    // diagonal value stream: entry t holds T[i][j] for j - i = t - (out-1);
    // the main diagonal and everything below come from the first-column
    // bits seed[0..out), the upper diagonals from seed[out..)
    std::vector<bool> diag(in + out - 1);
    for (std::size_t t = 0; t < diag.size(); ++t)
        diag[t] = t <= out - 1 ? cfg.seed_bits[out - 1 - t] : cfg.seed_bits[t];
    PackedRows rows;
    rows.per_row = (in + 63) / 64;
    rows.words.assign(out * rows.per_row, 0);
    for (std::size_t i = 0; i < out; ++i) {
        const std::size_t base = out - 1 - i;
        for (std::size_t j = 0; j < in; ++j)
            if (diag[base + j])
                rows.words[i * rows.per_row + j / 64] |= std::uint64_t(1)
                                                         << (j % 64);
    }
    return rows;
}

void hash_block(const PackedRows& rows, const std::uint64_t* x,
                std::size_t out, std::vector<bool>& sink) {
    for (std::size_t i = 0; i < out; ++i) {
        const std::uint64_t* row = &rows.words[i * rows.per_row];
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < rows.per_row; ++w) acc ^= row[w] & x[w];
        sink.push_back(std::popcount(acc) & 1);
    }
}

} // namespace

std::vector<bool> toeplitz_extract(const std::vector<bool>& input,
                                   const ExtractorConfig& cfg) {
    validate_config(cfg);
    require(input.size() == cfg.in_block_bits,
            "toeplitz_extract: input holds " + std::to_string(input.size()) +
                " bits but the block size is " +
                std::to_string(cfg.in_block_bits));
    const PackedRows rows = pack_rows(cfg);
    std::vector<std::uint64_t> x(rows.per_row, 0);
    for (std::size_t j = 0; j < input.size(); ++j)
        if (input[j]) x[j / 64] |= std::uint64_t(1) << (j % 64);
    std::vector<bool> y;
    y.reserve(cfg.out_block_bits);
    hash_block(rows, x.data(), cfg.out_block_bits, y);
    return y;
}

SampleStream extract_stream(const SampleStream& s, const ExtractorConfig& cfg,
                            double h_min_cond_bits) {
    validate_config(cfg);
    require(!s.values.empty(), "extract_stream: input stream is empty");
    const double ratio = extraction_ratio(h_min_cond_bits, double(s.bit_depth),
                                          cfg.safety_factor);
    require(double(cfg.out_block_bits) <= double(cfg.in_block_bits) * ratio,
            "extract_stream: output block is larger than the extraction "
            "ratio permits");

    const PackedRows rows = pack_rows(cfg);
    const std::size_t depth = std::size_t(s.bit_depth);
    const std::size_t total_bits = s.values.size() * depth;
    const std::size_t blocks = total_bits / cfg.in_block_bits;

    std::vector<bool> out_bits;
    out_bits.reserve(blocks * cfg.out_block_bits);
    std::vector<std::uint64_t> x(rows.per_row, 0);
    std::size_t fill = 0;
    const std::uint64_t mask = (std::uint64_t(1) << depth) - 1;
    for (std::int16_t v : s.values) {
        const std::uint64_t bits = std::uint64_t(v) & mask;
        for (std::size_t k = depth; k-- > 0;) {
            if ((bits >> k) & 1) x[fill / 64] |= std::uint64_t(1) << (fill % 64);
            if (++fill == cfg.in_block_bits) {
                // bits past the last full block only ever part-fill x
                hash_block(rows, x.data(), cfg.out_block_bits, out_bits);
                std::fill(x.begin(), x.end(), 0);
                fill = 0;
            }
        }
    }

    SampleStream out;
    out.bit_depth = 8;
    out.unsigned_range = true;
    out.stage = Stage::hashed;
    out.scenario = s.scenario;
    out.seed = s.seed;
    out.rate_ratio = s.rate_ratio;
    out.extra = s.extra;
    out.extra["extract_in_bits"] = std::to_string(cfg.in_block_bits);
    out.extra["extract_out_bits"] = std::to_string(cfg.out_block_bits);
    out.extra["extract_seed"] = seed_to_hex(cfg.seed_bits);
    out.extra["extract_method"] = "toeplitz";
    const std::size_t bytes = out_bits.size() / 8;
    out.values.reserve(bytes);
    for (std::size_t b = 0; b < bytes; ++b) {
        unsigned byte = 0;
        for (std::size_t k = 0; k < 8; ++k)
            byte = (byte << 1) | unsigned(out_bits[b * 8 + k]);
        out.values.push_back(std::int16_t(byte));
    }
    return out;
}

} // namespace rngml
