#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace rngml {

// Thin wrapper over the system FFT library. Plans are created with the
// deterministic heuristic planner (no runtime measurement), cached per
// size, and fed through aligned scratch buffers so caller memory never
// needs special alignment.

std::size_t next_pow2(std::size_t n);

// forward real-to-complex transform, returns n/2 + 1 bins
std::vector<std::complex<double>> rfft(const std::vector<double>& x);

// inverse of rfft; n is the original real length; output scaled by 1/n
std::vector<double> irfft(const std::vector<std::complex<double>>& spec,
                          std::size_t n);

// full linear convolution (length |x| + |h| - 1), overlap-save under the
// hood so multi-million-sample signals with long kernels stay cheap
std::vector<double> fft_convolve(const std::vector<double>& x,
                                 const std::vector<double>& h);

// schoolbook convolution, used as the oracle for fft_convolve and for
// very short kernels in tests
std::vector<double> convolve_direct(const std::vector<double>& x,
                                    const std::vector<double>& h);

} // namespace rngml
