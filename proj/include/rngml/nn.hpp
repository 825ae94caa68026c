#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rngml/tensor.hpp"

namespace rngml::nn {

struct Parameter {
    std::string name;
    Array value;
    Array grad;

    Parameter() = default;
    Parameter(std::string n, std::initializer_list<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(shape) {}
};

// ---- single-sample reference layers -------------------------------------
// These are the plainly-written versions: triple loops, no batching, no
// layout tricks. The production model is tested against them.

// x: [L x C_in], w: [C_out x K x C_in], b: [C_out] -> [(L-K+1) x C_out]
Array conv1d(const Array& x, const Array& w, const Array& b);
struct ConvGrads {
    Array dx, dw, db;
};
ConvGrads conv1d_backward(const Array& x, const Array& w, const Array& dy);

// non-overlapping pairwise max over time; trailing odd row dropped
struct PoolResult {
    Array y;
    std::vector<std::size_t> argmax; // flat row index into x per output cell
};
PoolResult maxpool1d(const Array& x);
Array maxpool1d_backward(const PoolResult& pooled, std::size_t in_rows,
                         const Array& dy);

Array relu(const Array& x);
Array relu_backward(const Array& x, const Array& dy);
Array sigmoid(const Array& x);
Array sigmoid_backward(const Array& y, const Array& dy); // y = sigmoid(x)
Array tanh_act(const Array& x);
Array tanh_backward(const Array& y, const Array& dy); // y = tanh(x)

// One LSTM cell step. Weights are packed [D x 4H] / [H x 4H] with gate
// order (input, forget, cell, output); forget bias lives in b[H..2H).
struct LstmStepOut {
    Array h, c;
};
LstmStepOut lstm_step(const Array& x, const Array& h_prev, const Array& c_prev,
                      const Array& wx, const Array& wh, const Array& b);

// x: [D], w: [O x D], b: [O] -> [O]
Array dense(const Array& x, const Array& w, const Array& b);
struct DenseGrads {
    Array dx, dw, db;
};
DenseGrads dense_backward(const Array& x, const Array& w, const Array& dy);

struct LstmGrads {
    Array dx, dh_prev, dc_prev, dwx, dwh, db;
};
// dh: gradient on h_t, dc: gradient flowing into c_t from the future
LstmGrads lstm_step_backward(const Array& x, const Array& h_prev,
                             const Array& c_prev, const Array& wx,
                             const Array& wh, const Array& b, const Array& dh,
                             const Array& dc);

struct SoftmaxXent {
    double loss = 0.0;
    Array probs;
};
SoftmaxXent softmax_xent(const Array& logits, std::size_t label);
Array softmax_xent_backward(const SoftmaxXent& fwd, std::size_t label);

// ---- optimizer -----------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers per parameter, in registration order.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    void step(std::vector<Parameter*>& params);
    std::uint64_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Array> m_, v_;
};

// ---- gradient checking ----------------------------------------------------

// Central-difference check of already-computed analytic gradients. The
// callable must re-run the forward pass and return the scalar loss for the
// current parameter values. When sample_per_param > 0, only that many
// deterministically chosen coordinates of each parameter are probed.
double gradient_check(const std::function<double()>& loss,
                      std::vector<Parameter*>& params, double eps = 1e-3,
                      std::size_t sample_per_param = 0,
                      std::uint64_t sample_seed = 1);

// relative error helper shared by the tests
double rel_err(double a, double b);

// ---- parameter container --------------------------------------------------

// Versioned flat container: magic, version, then (name, shape, f64 data)
// records in order. Little-endian throughout.
void save_parameters(const std::vector<Parameter>& params,
                     const std::string& path);
std::vector<Parameter> load_parameters(const std::string& path);

} // namespace rngml::nn
