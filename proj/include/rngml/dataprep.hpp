#pragma once

#include <cstdint>
#include <vector>

#include "rngml/stream.hpp"

namespace rngml {

// Alphabet learned from training data: distinct sample values in ascending
// order, mapped to dense ids 0..n-1. Values never seen in training map to
// id -1 (encoded as an all-zero one-hot row on input, an automatic miss as
// a label).
class SymbolTable {
public:
    static SymbolTable from_values(const std::int16_t* begin, std::size_t count);

    std::int32_t encode(std::int16_t value) const;
    std::int16_t decode(std::int32_t id) const;
    std::size_t size() const { return symbols_.size(); }
    const std::vector<std::int16_t>& symbols() const { return symbols_; }

private:
    std::vector<std::int16_t> symbols_;
    std::vector<std::int32_t> lookup_;
    std::int32_t lookup_lo_ = 0;
};

// number of windows of length `window` with the following sample as the
// label, at the given stride, inside a region of `length` samples
std::size_t window_count(std::size_t length, std::size_t window,
                         std::size_t stride);

// A contiguous region encoded against a fixed alphabet, viewed as
// overlapping prediction windows. Window k spans ids[k s .. k s + N) and
// its label is ids[k s + N].
struct Dataset {
    std::vector<std::int32_t> ids;
    std::size_t window = 0;
    std::size_t stride = 0;
    std::size_t count = 0;
    std::size_t alphabet = 0;

    const std::int32_t* window_ids(std::size_t k) const;
    std::int32_t label(std::size_t k) const;
};

Dataset make_dataset(const SymbolTable& table, const std::int16_t* begin,
                     std::size_t length, std::size_t window, std::size_t stride);

// dense one-hot of one window, row-major [window x alphabet]
std::vector<double> onehot_window(const Dataset& d, std::size_t k);

// Time-ordered split for an attack run: one training region (with a
// contiguous validation tail of the training windows) followed by disjoint
// test regions. The alphabet comes from the training region only.
struct AttackData {
    SymbolTable table;
    Dataset train;              // leading (1 - val_fraction) of train windows
    Dataset val;                // trailing val_fraction of train windows
    std::vector<Dataset> tests;
};

AttackData split_attack_data(const SampleStream& s, std::size_t window,
                             std::size_t stride, std::size_t train_symbols,
                             std::size_t test_symbols, std::size_t n_testsets,
                             double val_fraction = 0.2);

} // namespace rngml
