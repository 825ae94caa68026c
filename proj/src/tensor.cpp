#include "rngml/tensor.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include "rngml/errors.hpp"

namespace rngml {

void Array::reshape(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    shape = s;
    data.assign(n, 0.0);
}

void Array::fill(double v) { std::fill(data.begin(), data.end(), v); }

int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("RNGML_THREADS");
        if (!env) return 1;
        const int v = std::atoi(env);
        return v >= 1 ? v : 1;
    }();
    return n;
}

namespace {

// Register-tile kernel, 4 rows by NR columns. Every output element
// accumulates its dot product in ascending-k order, one multiply-add per
// step, in the SIMD tiles and the scalar tails alike; which path an
// element takes depends only on its position, never on the thread count,
// so reruns and thread-count changes reproduce identical bits.
constexpr std::size_t MR = 4;
#if defined(__AVX512F__)
constexpr std::size_t NR = 16;
#elif defined(__AVX2__) && defined(__FMA__)
constexpr std::size_t NR = 8;
#else
constexpr std::size_t NR = 8;
#endif

void gemm_block(const double* __restrict a, const double* __restrict b,
                double* __restrict c, std::size_t m, std::size_t k,
                std::size_t n, bool accumulate, std::size_t i_begin,
                std::size_t i_end) {
    const std::size_t full_i = i_begin + ((i_end - i_begin) / MR) * MR;
    const std::size_t full_j = (n / NR) * NR;

    for (std::size_t i0 = i_begin; i0 < full_i; i0 += MR) {
        const double* a0 = a + i0 * k;
        const double* a1 = a0 + k;
        const double* a2 = a1 + k;
        const double* a3 = a2 + k;
        for (std::size_t j0 = 0; j0 < full_j; j0 += NR) {
#if defined(__AVX512F__)
            __m512d c00 = _mm512_setzero_pd(), c01 = c00, c10 = c00, c11 = c00;
            __m512d c20 = c00, c21 = c00, c30 = c00, c31 = c00;
            const double* bp = b + j0;
            for (std::size_t p = 0; p < k; ++p, bp += n) {
                const __m512d b0 = _mm512_loadu_pd(bp);
                const __m512d b1 = _mm512_loadu_pd(bp + 8);
                __m512d v;
                v = _mm512_set1_pd(a0[p]);
                c00 = _mm512_fmadd_pd(v, b0, c00);
                c01 = _mm512_fmadd_pd(v, b1, c01);
                v = _mm512_set1_pd(a1[p]);
                c10 = _mm512_fmadd_pd(v, b0, c10);
                c11 = _mm512_fmadd_pd(v, b1, c11);
                v = _mm512_set1_pd(a2[p]);
                c20 = _mm512_fmadd_pd(v, b0, c20);
                c21 = _mm512_fmadd_pd(v, b1, c21);
                v = _mm512_set1_pd(a3[p]);
                c30 = _mm512_fmadd_pd(v, b0, c30);
                c31 = _mm512_fmadd_pd(v, b1, c31);
            }
            double* cr = c + i0 * n + j0;
            if (accumulate) {
                _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c00));
                _mm512_storeu_pd(cr + 8, _mm512_add_pd(_mm512_loadu_pd(cr + 8), c01));
                cr += n;
                _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c10));
                _mm512_storeu_pd(cr + 8, _mm512_add_pd(_mm512_loadu_pd(cr + 8), c11));
                cr += n;
                _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c20));
                _mm512_storeu_pd(cr + 8, _mm512_add_pd(_mm512_loadu_pd(cr + 8), c21));
                cr += n;
                _mm512_storeu_pd(cr, _mm512_add_pd(_mm512_loadu_pd(cr), c30));
                _mm512_storeu_pd(cr + 8, _mm512_add_pd(_mm512_loadu_pd(cr + 8), c31));
            } else {
                _mm512_storeu_pd(cr, c00);
                _mm512_storeu_pd(cr + 8, c01);
                cr += n;
                _mm512_storeu_pd(cr, c10);
                _mm512_storeu_pd(cr + 8, c11);
                cr += n;
                _mm512_storeu_pd(cr, c20);
                _mm512_storeu_pd(cr + 8, c21);
                cr += n;
                _mm512_storeu_pd(cr, c30);
                _mm512_storeu_pd(cr + 8, c31);
            }
#elif defined(__AVX2__) && defined(__FMA__)
            __m256d c00 = _mm256_setzero_pd(), c01 = c00, c10 = c00, c11 = c00;
            __m256d c20 = c00, c21 = c00, c30 = c00, c31 = c00;
            const double* bp = b + j0;
            for (std::size_t p = 0; p < k; ++p, bp += n) {
                const __m256d b0 = _mm256_loadu_pd(bp);
                const __m256d b1 = _mm256_loadu_pd(bp + 4);
                __m256d v;
                v = _mm256_broadcast_sd(a0 + p);
                c00 = _mm256_fmadd_pd(v, b0, c00);
                c01 = _mm256_fmadd_pd(v, b1, c01);
                v = _mm256_broadcast_sd(a1 + p);
                c10 = _mm256_fmadd_pd(v, b0, c10);
                c11 = _mm256_fmadd_pd(v, b1, c11);
                v = _mm256_broadcast_sd(a2 + p);
                c20 = _mm256_fmadd_pd(v, b0, c20);
                c21 = _mm256_fmadd_pd(v, b1, c21);
                v = _mm256_broadcast_sd(a3 + p);
                c30 = _mm256_fmadd_pd(v, b0, c30);
                c31 = _mm256_fmadd_pd(v, b1, c31);
            }
            double* cr = c + i0 * n + j0;
            if (accumulate) {
                _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c00));
                _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c01));
                cr += n;
                _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c10));
                _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c11));
                cr += n;
                _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c20));
                _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c21));
                cr += n;
                _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c30));
                _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c31));
            } else {
                _mm256_storeu_pd(cr, c00);
                _mm256_storeu_pd(cr + 4, c01);
                cr += n;
                _mm256_storeu_pd(cr, c10);
                _mm256_storeu_pd(cr + 4, c11);
                cr += n;
                _mm256_storeu_pd(cr, c20);
                _mm256_storeu_pd(cr + 4, c21);
                cr += n;
                _mm256_storeu_pd(cr, c30);
                _mm256_storeu_pd(cr + 4, c31);
            }
#else
            double acc[MR][NR] = {};
            for (std::size_t p = 0; p < k; ++p) {
                const double* brow = b + p * n + j0;
                for (std::size_t ii = 0; ii < MR; ++ii) {
                    const double av = a[(i0 + ii) * k + p];
                    for (std::size_t jj = 0; jj < NR; ++jj)
                        acc[ii][jj] += av * brow[jj];
                }
            }
            for (std::size_t ii = 0; ii < MR; ++ii) {
                double* crow = c + (i0 + ii) * n + j0;
                if (accumulate)
                    for (std::size_t jj = 0; jj < NR; ++jj) crow[jj] += acc[ii][jj];
                else
                    for (std::size_t jj = 0; jj < NR; ++jj) crow[jj] = acc[ii][jj];
            }
#endif
        }
        // rightmost partial j strip
        for (std::size_t j = full_j; j < n; ++j) {
            double acc[MR] = {};
            for (std::size_t p = 0; p < k; ++p) {
                const double bv = b[p * n + j];
                acc[0] += a0[p] * bv;
                acc[1] += a1[p] * bv;
                acc[2] += a2[p] * bv;
                acc[3] += a3[p] * bv;
            }
            for (std::size_t ii = 0; ii < MR; ++ii) {
                double& cv = c[(i0 + ii) * n + j];
                cv = accumulate ? cv + acc[ii] : acc[ii];
            }
        }
    }
    // trailing rows
    for (std::size_t i = full_i; i < i_end; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            double& cv = c[i * n + j];
            cv = accumulate ? cv + acc : acc;
        }
    }
    (void)m;
}

} // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate, int force_threads) {
    require(m > 0 && k > 0 && n > 0, "gemm: empty dimension");
    const int threads = force_threads > 0 ? force_threads : thread_count();
    if (threads <= 1 || m < 64) {
        gemm_block(a, b, c, m, k, n, accumulate, 0, m);
        return;
    }
    // fixed row partition: thread t owns rows [t*chunk, ...), so every
    // output element is written by exactly one thread. Chunks are rounded
    // to the microkernel row tile so each element goes through the exact
    // same code path (hence identical rounding) at any thread count.
    const std::size_t nt = std::min<std::size_t>(std::size_t(threads), m);
    std::size_t chunk = (m + nt - 1) / nt;
    chunk = ((chunk + MR - 1) / MR) * MR;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(m, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(gemm_block, a, b, c, m, k, n, accumulate, lo, hi);
    }
    for (auto& th : pool) th.join();
}

void gemm_naive(const double* a, const double* b, double* c, std::size_t m,
                std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            double& cv = c[i * n + j];
            cv = accumulate ? cv + acc : acc;
        }
}

void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

} // namespace rngml
