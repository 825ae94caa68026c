#include "rngml/dataprep.hpp"

#include <algorithm>
#include <set>

#include "rngml/errors.hpp"

namespace rngml {

SymbolTable SymbolTable::from_values(const std::int16_t* begin,
                                     std::size_t count) {
    require(count > 0, "symbol table: empty training region");
    SymbolTable t;
    std::set<std::int16_t> distinct(begin, begin + count);
    t.symbols_.assign(distinct.begin(), distinct.end());
    const std::int32_t lo = t.symbols_.front();
    const std::int32_t hi = t.symbols_.back();
    t.lookup_lo_ = lo;
    t.lookup_.assign(std::size_t(hi - lo + 1), -1);
    for (std::size_t i = 0; i < t.symbols_.size(); ++i)
        t.lookup_[std::size_t(std::int32_t(t.symbols_[i]) - lo)] =
            std::int32_t(i);
    return t;
}

std::int32_t SymbolTable::encode(std::int16_t value) const {
    const std::int32_t idx = std::int32_t(value) - lookup_lo_;
    if (idx < 0 || idx >= std::int32_t(lookup_.size())) return -1;
    return lookup_[std::size_t(idx)];
}

std::int16_t SymbolTable::decode(std::int32_t id) const {
    require(id >= 0 && id < std::int32_t(symbols_.size()),
            "symbol table: id out of range");
    return symbols_[std::size_t(id)];
}

std::size_t window_count(std::size_t length, std::size_t window,
                         std::size_t stride) {
    require(window >= 1, "window_count: window must be at least 1");
    require(stride >= 1, "window_count: stride must be at least 1");
    require(length >= window + 1,
            "window_count: region too short for one window plus label");
    return (length - 1 - window) / stride + 1;
}

const std::int32_t* Dataset::window_ids(std::size_t k) const {
    require(k < count, "dataset: window index out of range");
    return ids.data() + k * stride;
}

std::int32_t Dataset::label(std::size_t k) const {
    require(k < count, "dataset: window index out of range");
    return ids[k * stride + window];
}

Dataset make_dataset(const SymbolTable& table, const std::int16_t* begin,
                     std::size_t length, std::size_t window,
                     std::size_t stride) {
    Dataset d;
    d.window = window;
    d.stride = stride;
    d.count = window_count(length, window, stride);
    d.alphabet = table.size();
    d.ids.resize(length);
    for (std::size_t i = 0; i < length; ++i) d.ids[i] = table.encode(begin[i]);
    return d;
}

std::vector<double> onehot_window(const Dataset& d, std::size_t k) {
    const std::int32_t* w = d.window_ids(k);
    std::vector<double> out(d.window * d.alphabet, 0.0);
    for (std::size_t t = 0; t < d.window; ++t)
        if (w[t] >= 0) out[t * d.alphabet + std::size_t(w[t])] = 1.0;
    return out;
}

AttackData split_attack_data(const SampleStream& s, std::size_t window,
                             std::size_t stride, std::size_t train_symbols,
                             std::size_t test_symbols, std::size_t n_testsets,
                             double val_fraction) {
    require(val_fraction > 0.0 && val_fraction < 1.0,
            "split: validation fraction must be in (0, 1)");
    const std::size_t need = train_symbols + n_testsets * test_symbols;
    require(s.values.size() >= need,
            "split: stream has " + std::to_string(s.values.size()) +
                " samples, need " + std::to_string(need));

    AttackData out;
    const std::int16_t* base = s.values.data();
    out.table = SymbolTable::from_values(base, train_symbols);

    const std::size_t total_windows = window_count(train_symbols, window, stride);
    const std::size_t n_val =
        std::size_t(double(total_windows) * val_fraction);
    require(n_val >= 1 && n_val < total_windows,
            "split: not enough training windows for a validation tail");
    const std::size_t n_used = total_windows - n_val;

    out.train = make_dataset(out.table, base, train_symbols, window, stride);
    out.train.count = n_used;

    // the validation tail re-reads the same region starting at the first
    // held-out window; the window arithmetic lines up exactly
    const std::size_t val_off = n_used * stride;
    out.val = make_dataset(out.table, base + val_off, train_symbols - val_off,
                           window, stride);
    require(out.val.count == n_val, "split: validation window count mismatch");

    for (std::size_t i = 0; i < n_testsets; ++i) {
        const std::size_t off = train_symbols + i * test_symbols;
        out.tests.push_back(
            make_dataset(out.table, base + off, test_symbols, window, stride));
    }
    return out;
}

} // namespace rngml
