#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace rngml {

// Flat row-major 64-bit array. Deliberately minimal: shape plus data,
// with the invariant product(shape) == data.size() enforced on creation.
struct Array {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Array() = default;
    Array(std::initializer_list<std::size_t> s) { reshape(s); }
    explicit Array(const std::vector<std::size_t>& s) { reshape(s); }

    void reshape(const std::vector<std::size_t>& s);
    std::size_t numel() const { return data.size(); }

    // 2-D helpers; contract-checked in debug-style via size arithmetic
    double& at(std::size_t i, std::size_t j) {
        return data[i * shape[1] + j];
    }
    double at(std::size_t i, std::size_t j) const {
        return data[i * shape[1] + j];
    }

    bool same_shape(const Array& o) const { return shape == o.shape; }
    void fill(double v);
};

// number of worker threads, from the RNGML_THREADS environment variable
// (default 1; everything in this tool is deterministic regardless)
int thread_count();

// C[M x N] = A[M x K] * B[K x N], optionally accumulating into C.
// Summation over k runs in ascending order for every output element, so
// results are bit-identical no matter how the loop is tiled or how many
// threads run (threads split output rows, never the k dimension).
void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate = false,
          int force_threads = 0); // 0: use thread_count()

// reference implementation used by the equivalence tests
void gemm_naive(const double* a, const double* b, double* c, std::size_t m,
                std::size_t k, std::size_t n, bool accumulate = false);

// out[j * rows + i] = in[i * cols + j]
void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols);

} // namespace rngml
