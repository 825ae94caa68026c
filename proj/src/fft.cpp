#include "rngml/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>

#include "rngml/errors.hpp"

namespace rngml {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace {

// One cached forward/backward plan pair per transform size. FFTW plan
// creation is not thread-safe, so all planning happens under a lock; the
// execute-with-new-arrays entry points are safe afterwards.
struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
    double* real_buf = nullptr;
    fftw_complex* cplx_buf = nullptr;
};

std::mutex plan_mutex;

PlanPair& plan_for(std::size_t n) {
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    PlanPair p;
    p.real_buf = fftw_alloc_real(n);
    p.cplx_buf = fftw_alloc_complex(n / 2 + 1);
    p.fwd = fftw_plan_dft_r2c_1d(int(n), p.real_buf, p.cplx_buf, FFTW_ESTIMATE);
    p.bwd = fftw_plan_dft_c2r_1d(int(n), p.cplx_buf, p.real_buf, FFTW_ESTIMATE);
    require(p.fwd && p.bwd, "fft: planner failed");
    return cache.emplace(n, p).first->second;
}

} // namespace

std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
    require(!x.empty(), "fft: empty input");
    const std::size_t n = x.size();
    PlanPair& p = plan_for(n);
    std::lock_guard<std::mutex> lock(plan_mutex);
    std::memcpy(p.real_buf, x.data(), n * sizeof(double));
    fftw_execute(p.fwd);
    std::vector<std::complex<double>> out(n / 2 + 1);
    std::memcpy(out.data(), p.cplx_buf, out.size() * sizeof(fftw_complex));
    return out;
}

std::vector<double> irfft(const std::vector<std::complex<double>>& spec,
                          std::size_t n) {
    require(n >= 1 && spec.size() == n / 2 + 1,
            "fft: spectrum length must be n/2 + 1");
    PlanPair& p = plan_for(n);
    std::lock_guard<std::mutex> lock(plan_mutex);
    std::memcpy(p.cplx_buf, spec.data(), spec.size() * sizeof(fftw_complex));
    fftw_execute(p.bwd);
    std::vector<double> out(n);
    const double inv = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = p.real_buf[i] * inv;
    return out;
}

std::vector<double> convolve_direct(const std::vector<double>& x,
                                    const std::vector<double>& h) {
    require(!x.empty() && !h.empty(), "convolve: empty operand");
    std::vector<double> out(x.size() + h.size() - 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < h.size(); ++j)
            out[i + j] += x[i] * h[j];
    return out;
}

std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h) {
    require(!x.empty() && !h.empty(), "convolve: empty operand");
    const std::size_t n = x.size(), k = h.size();
    const std::size_t out_len = n + k - 1;

    // overlap-save: block B, valid samples per block B - (k - 1)
    const std::size_t block = std::max<std::size_t>(next_pow2(4 * k), 1 << 14);
    if (block >= out_len) {
        // small input: one transform is simpler
        const std::size_t m = next_pow2(out_len);
        std::vector<double> xa(m, 0.0), ha(m, 0.0);
        std::copy(x.begin(), x.end(), xa.begin());
        std::copy(h.begin(), h.end(), ha.begin());
        auto X = rfft(xa);
        auto H = rfft(ha);
        for (std::size_t i = 0; i < X.size(); ++i) X[i] *= H[i];
        auto full = irfft(X, m);
        full.resize(out_len);
        return full;
    }

    const std::size_t step = block - (k - 1);
    std::vector<double> ha(block, 0.0);
    std::copy(h.begin(), h.end(), ha.begin());
    const auto H = rfft(ha);

    // input is conceptually padded with k-1 leading zeros (history) and
    // trailing zeros to flush the tail
    std::vector<double> out(out_len);
    std::vector<double> seg(block);
    std::size_t produced = 0;
    std::int64_t start = -std::int64_t(k - 1);
    while (produced < out_len) {
        for (std::size_t i = 0; i < block; ++i) {
            const std::int64_t idx = start + std::int64_t(i);
            seg[i] = (idx >= 0 && idx < std::int64_t(n)) ? x[std::size_t(idx)] : 0.0;
        }
        auto S = rfft(seg);
        for (std::size_t i = 0; i < S.size(); ++i) S[i] *= H[i];
        auto y = irfft(S, block);
        const std::size_t take = std::min(step, out_len - produced);
        std::copy(y.begin() + std::ptrdiff_t(k - 1),
                  y.begin() + std::ptrdiff_t(k - 1 + take),
                  out.begin() + std::ptrdiff_t(produced));
        produced += take;
        start += std::int64_t(step);
    }
    return out;
}

} // namespace rngml
