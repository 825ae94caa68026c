#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rngml/dataprep.hpp"
#include "rngml/nn.hpp"
#include "rngml/stats.hpp"
#include "rngml/stream.hpp"

namespace rngml {

// Which feature stack sits in front of the LSTM. The two-conv stack needs
// window >= 15 to keep a nonzero step count; `automatic` drops to the
// single-conv stack (one width-3 conv, one pool) below that.
enum class StackKind : std::uint8_t { automatic, full, reduced };

struct ModelSpec {
    std::size_t window = 100;    // symbols seen before the prediction target
    std::size_t alphabet = 256;  // one-hot width and output class count
    StackKind stack = StackKind::automatic;
    std::size_t conv1_filters = 64;
    std::size_t conv1_kernel = 5;
    std::size_t conv2_filters = 128;
    std::size_t conv2_kernel = 3;
    std::size_t lstm_hidden = 128;
    std::size_t dense_hidden = 64;
};

// Resolved layer geometry. Pooling is pairwise max with an odd tail row
// dropped, so lengths halve (rounding down) after each conv.
struct StackPlan {
    bool two_convs = true;
    std::size_t k1 = 0, f1 = 0;       // conv reading the one-hot input
    std::size_t k2 = 0, f2 = 0;       // second conv (two_convs only)
    std::size_t len1 = 0, pooled1 = 0;
    std::size_t len2 = 0, pooled2 = 0;
    std::size_t steps = 0;            // LSTM input length
    std::size_t lstm_in = 0;          // channels per LSTM step
};

// Throws ContractError when any stage would collapse to length zero
// (e.g. window 10 through the two-conv stack: 10 -> 6 -> 3 -> 1 -> 0).
StackPlan plan_stack(const ModelSpec& spec);

// Closed-form number of trainable scalars for the resolved stack.
std::size_t parameter_count(const ModelSpec& spec);

struct Model {
    ModelSpec spec;
    StackPlan plan;
    // conv weights are [filters x kernel x channels]; LSTM weights use the
    // packed [D x 4H] / [H x 4H] layout of nn::lstm_step with gate order
    // (input, forget, cell, output); dense weights are [out x in].
    nn::Parameter conv1_w, conv1_b;
    nn::Parameter conv2_w, conv2_b;
    nn::Parameter wx, wh, lstm_b;
    nn::Parameter d1_w, d1_b;
    nn::Parameter d2_w, d2_b;

    std::vector<nn::Parameter*> parameters();
};

// Uniform Glorot init for conv/dense/input-to-hidden weights, +-1/sqrt(H)
// for the recurrent matrix, zero biases except the forget gate at 1.0.
Model build_model(const ModelSpec& spec, std::uint64_t seed);

void save_model(const Model& m, const std::string& path);
void load_model_weights(Model& m, const std::string& path);

struct TrainConfig {
    std::size_t max_epochs = 20;
    std::size_t patience = 4;   // stop after this many non-improving epochs
    std::size_t batch = 256;
    nn::AdamConfig adam;
    std::uint64_t seed = 1;     // epoch shuffle order
    bool log = false;           // one progress line per epoch on stderr
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    bool improved = false;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double best_val_accuracy = 0.0;
};

// Minimizes mean cross-entropy with Adam; after each epoch scores the
// validation split and keeps the weights of the best epoch, which are
// restored into the model before returning.
TrainResult train(Model& m, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

struct Prediction {
    std::vector<double> probs;  // alphabet-sized, sums to 1
    std::size_t argmax = 0;     // ties resolved toward the smaller id
};

Prediction predict(const Model& m, const std::int32_t* window_ids);

// Mean cross-entropy and hit rate over one dataset. Windows whose label
// never occurred in training (id -1) count as misses and are skipped by
// the loss; `scored` is the number of windows the loss averaged over.
struct DatasetScore {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t scored = 0;
};

DatasetScore score_dataset(const Model& m, const Dataset& d);

// Runs one batch over the whole dataset: returns the mean cross-entropy
// over valid labels and leaves its parameter gradients in the model's grad
// buffers. Memory scales with d.count; meant for gradient checking and
// small custom loops.
double loss_and_gradients(Model& m, const Dataset& d);

struct EvalResult {
    std::vector<double> per_testset_accuracy;
    double p_ml_mean = 0.0;
    double p_ml_sd = 0.0;  // sample sd over test sets, 0 for a single set
    double p_g = 0.0;
    double advantage_sigma = 0.0;
    std::uint64_t windows_per_set = 0;
};

// Hit rate per held-out test set against the static best guess p_g.
EvalResult evaluate(const Model& m, const std::vector<Dataset>& testsets,
                    double p_g);

// One end-to-end predictor run: time-ordered split, static-guess baseline
// from the training region's histogram, training, held-out evaluation.
struct AttackConfig {
    std::size_t window = 100;
    std::size_t stride = 1;
    std::size_t train_symbols = 0;
    std::size_t test_symbols = 0;
    std::size_t n_testsets = 5;
    double val_fraction = 0.2;
    StackKind stack = StackKind::automatic;
    TrainConfig train;
    std::uint64_t model_seed = 7;
};

struct AttackReport {
    std::size_t alphabet = 0;
    Guess guess;  // best static guess learned from the training region
    TrainResult training;
    EvalResult eval;
};

// `trained` receives the fitted model when non-null (e.g. to checkpoint it).
AttackReport run_attack(const SampleStream& s, const AttackConfig& cfg,
                        Model* trained = nullptr);

} // namespace rngml
