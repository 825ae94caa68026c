// Gate binary: one line per release criterion, exit code = number of
// failures. With no arguments every criterion runs in order; passing
// numbers (e.g. "acceptance 3 7") runs just those. Heavy criteria reuse
// nothing from the doctest suites so each one stands on its own.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <rngml/dataprep.hpp>
#include <rngml/extractor.hpp>
#include <rngml/lcg.hpp>
#include <rngml/nn.hpp>
#include <rngml/rcnn.hpp>
#include <rngml/report.hpp>
#include <rngml/rng.hpp>
#include <rngml/signal.hpp>
#include <rngml/stats.hpp>
#include <rngml/stream.hpp>
#include <rngml/sts.hpp>

using namespace rngml;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(RNGML_BIN) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : (WIFEXITED(rc) ? WEXITSTATUS(rc) : -2);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in.good()) return "<missing:" + p.string() + ">";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 1. gradient correctness ----------------------------------------------

std::vector<std::int16_t> uniform_symbols(std::uint64_t seed,
                                          std::size_t count,
                                          std::int16_t alphabet) {
    Rng rng(seed);
    std::vector<std::int16_t> v(count);
    for (std::size_t i = 0; i < count; ++i)
        v[i] = i < std::size_t(alphabet)
                   ? std::int16_t(i)
                   : std::int16_t(rng.next_below(std::uint64_t(alphabet)));
    return v;
}

Array rand_array(std::initializer_list<std::size_t> shape, Rng& rng,
                 double scale = 1.0) {
    Array a(shape);
    for (auto& v : a.data) v = scale * rng.next_normal();
    return a;
}

// scalar projection loss so a vector-valued layer can be checked with the
// central-difference helper
double dot_loss(const Array& y, const Array& coef) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i)
        s += coef.data[i] * y.data[i];
    return s;
}

Outcome criterion_gradients() {
    double worst_layer = 0.0;

    // conv
    {
        Rng rng(501);
        for (int trial = 0; trial < 4; ++trial) {
            const std::size_t L = 5 + rng.next_below(5);
            const std::size_t C = 1 + rng.next_below(3);
            const std::size_t K = 1 + rng.next_below(3);
            const std::size_t F = 1 + rng.next_below(4);
            nn::Parameter w("w", {F, K, C}), b("b", {F}), x("x", {L, C});
            for (auto* p : {&w, &b, &x})
                for (auto& v : p->value.data) v = rng.next_normal();
            const Array dy = rand_array({L - K + 1, F}, rng);
            auto loss = [&] {
                return dot_loss(nn::conv1d(x.value, w.value, b.value), dy);
            };
            const auto g = nn::conv1d_backward(x.value, w.value, dy);
            w.grad = g.dw;
            b.grad = g.db;
            x.grad = g.dx;
            std::vector<nn::Parameter*> params{&w, &b, &x};
            worst_layer =
                std::max(worst_layer, nn::gradient_check(loss, params, 5e-2));
        }
    }
    // dense
    {
        Rng rng(502);
        for (int trial = 0; trial < 4; ++trial) {
            const std::size_t D = 2 + rng.next_below(6);
            const std::size_t O = 1 + rng.next_below(6);
            nn::Parameter w("w", {O, D}), b("b", {O}), x("x", {D});
            for (auto* p : {&w, &b, &x})
                for (auto& v : p->value.data) v = rng.next_normal();
            const Array dy = rand_array({O}, rng);
            auto loss = [&] {
                return dot_loss(nn::dense(x.value, w.value, b.value), dy);
            };
            const auto g = nn::dense_backward(x.value, w.value, dy);
            w.grad = g.dw;
            b.grad = g.db;
            x.grad = g.dx;
            std::vector<nn::Parameter*> params{&w, &b, &x};
            worst_layer =
                std::max(worst_layer, nn::gradient_check(loss, params, 5e-2));
        }
    }
    // lstm step
    {
        Rng rng(503);
        for (int trial = 0; trial < 4; ++trial) {
            const std::size_t D = 2 + rng.next_below(4);
            const std::size_t H = 2 + rng.next_below(4);
            nn::Parameter wx("wx", {D, 4 * H}), wh("wh", {H, 4 * H}),
                b("b", {4 * H}), x("x", {D}), h0("h0", {H}), c0("c0", {H});
            for (auto* p : {&wx, &wh, &b, &x, &h0, &c0})
                for (auto& v : p->value.data) v = 0.7 * rng.next_normal();
            const Array dh = rand_array({H}, rng);
            const Array dc = rand_array({H}, rng);
            auto loss = [&] {
                const auto out = nn::lstm_step(x.value, h0.value, c0.value,
                                               wx.value, wh.value, b.value);
                return dot_loss(out.h, dh) + dot_loss(out.c, dc);
            };
            const auto g =
                nn::lstm_step_backward(x.value, h0.value, c0.value, wx.value,
                                       wh.value, b.value, dh, dc);
            wx.grad = g.dwx;
            wh.grad = g.dwh;
            b.grad = g.db;
            x.grad = g.dx;
            h0.grad = g.dh_prev;
            c0.grad = g.dc_prev;
            std::vector<nn::Parameter*> params{&wx, &wh, &b, &x, &h0, &c0};
            worst_layer =
                std::max(worst_layer, nn::gradient_check(loss, params, 1e-4));
        }
    }

    // whole model on a toy instance: 16 symbols, 20-wide windows
    ModelSpec spec;
    spec.window = 20;
    spec.alphabet = 16;
    spec.stack = StackKind::reduced;
    Model m = build_model(spec, 31);
    const auto values = uniform_symbols(77, 220, 16);
    const SymbolTable table =
        SymbolTable::from_values(values.data(), values.size());
    const Dataset d =
        make_dataset(table, values.data(), values.size(), spec.window, 23);
    loss_and_gradients(m, d);
    auto params = m.parameters();
    const double model_err = nn::gradient_check(
        [&] { return score_dataset(m, d).loss; }, params, 1e-5, 25, 1);

    Outcome r;
    r.ok = worst_layer < 1e-6 && model_err < 1e-4;
    r.detail = fmt("layer max rel err %.2e (<1e-6), model %.2e (<1e-4)",
                   worst_layer, model_err);
    return r;
}

// ---- 2. oracle equivalence -------------------------------------------------

// brute-force references, written from the layer contracts alone
Array oracle_conv1d(const Array& x, const Array& w, const Array& b) {
    const std::size_t L = x.shape[0], C = x.shape[1];
    const std::size_t F = w.shape[0], K = w.shape[1];
    Array y({L - K + 1, F});
    for (std::size_t t = 0; t + K <= L; ++t)
        for (std::size_t f = 0; f < F; ++f) {
            double s = b.data[f];
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t c = 0; c < C; ++c)
                    s += x.at(t + k, c) * w.data[(f * K + k) * C + c];
            y.at(t, f) = s;
        }
    return y;
}

Array oracle_dense(const Array& x, const Array& w, const Array& b) {
    const std::size_t O = w.shape[0], D = w.shape[1];
    Array y({O});
    for (std::size_t o = 0; o < O; ++o) {
        double s = b.data[o];
        for (std::size_t d = 0; d < D; ++d) s += w.at(o, d) * x.data[d];
        y.data[o] = s;
    }
    return y;
}

void oracle_lstm(const Array& x, const Array& h0, const Array& c0,
                 const Array& wx, const Array& wh, const Array& b, Array* h,
                 Array* c) {
    const std::size_t D = x.data.size(), H = h0.data.size();
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    auto gate = [&](std::size_t g, std::size_t j) {
        double s = b.data[g * H + j];
        for (std::size_t d = 0; d < D; ++d)
            s += x.data[d] * wx.at(d, g * H + j);
        for (std::size_t k = 0; k < H; ++k)
            s += h0.data[k] * wh.at(k, g * H + j);
        return s;
    };
    *h = Array({H});
    *c = Array({H});
    for (std::size_t j = 0; j < H; ++j) {
        const double i = sig(gate(0, j));
        const double f = sig(gate(1, j));
        const double g = std::tanh(gate(2, j));
        const double o = sig(gate(3, j));
        c->data[j] = f * c0.data[j] + i * g;
        h->data[j] = o * std::tanh(c->data[j]);
    }
}

std::vector<bool> oracle_toeplitz(const std::vector<bool>& x,
                                  const ExtractorConfig& cfg) {
    // M[r][c] = seed[r - c] below the diagonal, seed[out - 1 + c - r] above
    const std::size_t out = cfg.out_block_bits, in = cfg.in_block_bits;
    std::vector<bool> y(out, false);
    for (std::size_t r = 0; r < out; ++r) {
        bool acc = false;
        for (std::size_t c = 0; c < in; ++c) {
            const bool mrc = r >= c ? cfg.seed_bits[r - c]
                                    : cfg.seed_bits[out - 1 + (c - r)];
            acc = acc != (mrc && x[c]);
        }
        y[r] = acc;
    }
    return y;
}

double max_abs_diff(const Array& a, const Array& b) {
    double worst = a.data.size() == b.data.size()
                       ? 0.0
                       : std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.data.size() && i < b.data.size(); ++i)
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

Outcome criterion_oracles() {
    Rng rng(601);
    double worst = 0.0;
    std::size_t gf2_mismatch = 0;

    for (int trial = 0; trial < 100; ++trial) {
        // conv
        {
            const std::size_t K = 1 + rng.next_below(7);
            const std::size_t L = K + rng.next_below(30);
            const std::size_t C = 1 + rng.next_below(8);
            const std::size_t F = 1 + rng.next_below(8);
            const Array x = rand_array({L, C}, rng);
            const Array w = rand_array({F, K, C}, rng);
            const Array b = rand_array({F}, rng);
            worst = std::max(
                worst, max_abs_diff(nn::conv1d(x, w, b), oracle_conv1d(x, w, b)));
        }
        // dense
        {
            const std::size_t D = 1 + rng.next_below(24);
            const std::size_t O = 1 + rng.next_below(24);
            const Array x = rand_array({D}, rng);
            const Array w = rand_array({O, D}, rng);
            const Array b = rand_array({O}, rng);
            worst = std::max(
                worst, max_abs_diff(nn::dense(x, w, b), oracle_dense(x, w, b)));
        }
        // lstm step
        {
            const std::size_t D = 1 + rng.next_below(6);
            const std::size_t H = 1 + rng.next_below(8);
            const Array x = rand_array({D}, rng, 0.8);
            const Array h0 = rand_array({H}, rng, 0.8);
            const Array c0 = rand_array({H}, rng, 0.8);
            const Array wx = rand_array({D, 4 * H}, rng, 0.8);
            const Array wh = rand_array({H, 4 * H}, rng, 0.8);
            const Array b = rand_array({4 * H}, rng, 0.8);
            const auto got = nn::lstm_step(x, h0, c0, wx, wh, b);
            Array h, c;
            oracle_lstm(x, h0, c0, wx, wh, b, &h, &c);
            worst = std::max(worst, max_abs_diff(got.h, h));
            worst = std::max(worst, max_abs_diff(got.c, c));
        }
        // toeplitz over GF(2): exact
        {
            ExtractorConfig cfg;
            cfg.in_block_bits = 1 + rng.next_below(64);
            cfg.out_block_bits = 1 + rng.next_below(cfg.in_block_bits);
            cfg.seed_bits.resize(cfg.in_block_bits + cfg.out_block_bits - 1);
            std::vector<bool> x(cfg.in_block_bits);
            for (std::size_t i = 0; i < cfg.seed_bits.size(); ++i)
                cfg.seed_bits[i] = rng.next_below(2) == 1;
            for (std::size_t i = 0; i < x.size(); ++i)
                x[i] = rng.next_below(2) == 1;
            if (toeplitz_extract(x, cfg) != oracle_toeplitz(x, cfg))
                ++gf2_mismatch;
        }
    }

    // pinned instance: 8 bits in, 3 out
    {
        ExtractorConfig cfg;
        cfg.in_block_bits = 8;
        cfg.out_block_bits = 3;
        cfg.seed_bits = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1};
        const std::vector<bool> x = {1, 1, 0, 1, 0, 0, 1, 1};
        if (toeplitz_extract(x, cfg) != std::vector<bool>{0, 0, 1})
            ++gf2_mismatch;
    }

    Outcome r;
    r.ok = worst < 1e-12 && gf2_mismatch == 0;
    r.detail = fmt("100 instances/layer, max |diff| %.2e (<1e-12), "
                   "GF(2) mismatches %zu",
                   worst, gf2_mismatch);
    return r;
}

// ---- 3. congruential-generator period study --------------------------------

AttackReport lcg_attack(std::uint64_t m, std::uint64_t stream_seed) {
    // 500k training windows and 5 x 20k test windows of 10 symbols each
    const SampleStream s =
        lcg_stream({1103515245, 12345, m}, stream_seed, 1800048);
    AttackConfig cfg;
    cfg.window = 10;
    cfg.stride = 3;
    cfg.train_symbols = 1500008;
    cfg.test_symbols = 60008;
    cfg.n_testsets = 5;
    cfg.val_fraction = 0.1;
    cfg.train.max_epochs = 12;
    cfg.train.patience = 3;
    cfg.train.seed = 2;
    cfg.model_seed = 7;
    return run_attack(s, cfg, nullptr);
}

Outcome criterion_crng() {
    const AttackReport r16 = lcg_attack(1ull << 16, 1);
    const AttackReport r20 = lcg_attack(1ull << 20, 1);
    const AttackReport r24 = lcg_attack(1ull << 24, 1);

    const double p16 = r16.eval.p_ml_mean;
    const double p20 = r20.eval.p_ml_mean;
    const double p24 = r24.eval.p_ml_mean;
    const bool a = p16 >= 10.0 / 256.0;
    const bool b = p16 >= p20 && p20 >= p24;
    const bool c = std::abs(r24.eval.advantage_sigma) <= 3.0;

    Outcome r;
    r.ok = a && b && c;
    r.detail = fmt("p_ml %.4f/%.4f/%.4f for m=2^16/20/24 "
                   "(>=0.0391%s, non-increasing%s), |adv 2^24| %.2f sigma%s",
                   p16, p20, p24, a ? "" : " VIOLATED",
                   b ? "" : " VIOLATED", std::abs(r24.eval.advantage_sigma),
                   c ? "" : " VIOLATED");
    return r;
}

// ---- 4. classical-scenario leak found, then filtered out -------------------

Outcome criterion_scenario1() {
    fs::remove_all("acc_tmp/s1");
    fs::create_directories("acc_tmp");
    {
        std::ofstream cfg("acc_tmp/s1.json");
        cfg << "{\n"
               "  \"n_samples\": 110000, \"oversample\": 8,\n"
               "  \"quantum_sd\": 3.1622776601683795,\n"
               "  \"electronic_sd\": 1.0, \"lo_sd\": 6.0,\n"
               "  \"tones\": [{\"freq\": 0.4425, \"amplitude\": 8.0,\n"
               "              \"phase\": 0.3, \"kind\": \"detector1_only\"}],\n"
               "  \"cmrr_epsilon\": 0.05, \"demod_freqs\": [0.3125, 0.1875],\n"
               "  \"lpf_cutoff\": 1.0, \"lpf_taps\": 801,\n"
               "  \"adc_bits\": 16, \"adc_fullscale\": 160.0,\n"
               "  \"seed\": 424242\n}\n";
    }
    if (run_cli("simulate --config acc_tmp/s1.json --out acc_tmp/s1 "
                "--scenario classical") != 0)
        return {false, "simulate command failed"};

    const std::string attack_args =
        " --msb 8 --window 100 --stride 3 --train-size 60000"
        " --test-size 10000 --test-sets 5 --epochs 6 --patience 2"
        " --seed 101 --model-seed 11";
    if (run_cli("attack acc_tmp/s1/classical_demod1.rns --out acc_tmp/atk_c" +
                attack_args) != 0)
        return {false, "attack command failed on the demodulated stage"};
    if (run_cli("attack acc_tmp/s1/classical_lpf1.rns --out acc_tmp/atk_d" +
                attack_args) != 0)
        return {false, "attack command failed on the filtered stage"};

    const Json rep_c = load_json_file("acc_tmp/atk_c/report.json");
    const Json rep_d = load_json_file("acc_tmp/atk_d/report.json");
    const double adv_c = rep_c.at("results").at("advantage_sigma");
    const double adv_d = rep_d.at("results").at("advantage_sigma");

    Outcome r;
    r.ok = adv_c > 2.0 && std::abs(adv_d) <= 3.0;
    r.detail = fmt("demod stage advantage %.1f sigma (>2), "
                   "after filter %+.2f sigma (|.|<=3)",
                   adv_c, adv_d);
    return r;
}

// ---- 5. quantum scenario unpredictable at raw and difference stages --------

Outcome criterion_scenario2() {
    ChainConfig cfg;
    cfg.n_samples = 90000;
    cfg.quantum_sd = std::sqrt(10.0); // 10 dB above the electronic floor
    cfg.lo_sd = 6.0;
    cfg.seed = 52525;
    auto stages = run_chain(cfg, Scenario::quantum_classical);

    auto attack_stage = [&](Stage st) {
        const SampleStream bytes = truncate_to_msb(stages.at(st), 8);
        AttackConfig a;
        a.window = 100;
        a.stride = 3;
        a.train_symbols = 40000;
        a.test_symbols = 10000;
        a.n_testsets = 5;
        a.val_fraction = 0.2;
        a.train.max_epochs = 4;
        a.train.patience = 2;
        a.train.seed = 3;
        a.model_seed = 9;
        return run_attack(bytes, a, nullptr);
    };
    const AttackReport det = attack_stage(Stage::det1);
    const AttackReport dif = attack_stage(Stage::diff);

    Outcome r;
    r.ok = std::abs(det.eval.advantage_sigma) <= 3.0 &&
           std::abs(dif.eval.advantage_sigma) <= 3.0;
    r.detail = fmt("detector %+.2f sigma, difference %+.2f sigma (|.|<=3); "
                   "p_ml %.4f/%.4f vs p_g %.4f/%.4f",
                   det.eval.advantage_sigma, dif.eval.advantage_sigma,
                   det.eval.p_ml_mean, dif.eval.p_ml_mean, det.eval.p_g,
                   dif.eval.p_g);
    return r;
}

// ---- 6. min-entropy spot values ---------------------------------------------

Outcome criterion_min_entropy() {
    const double h1 = min_entropy(0.0137);
    const double h2 = min_entropy(1.0 / 256.0);
    Outcome r;
    r.ok = std::abs(h1 - 6.19) <= 0.01 && h2 == 8.0;
    r.detail = fmt("max bin 0.0137 -> %.4f bits (6.19 +- 0.01), "
                   "uniform 2^8 -> %.17g bits",
                   h1, h2);
    return r;
}

// ---- 7 & 8 share the extracted stream ---------------------------------------

const SampleStream& hashed_stream() {
    static std::optional<SampleStream> cached;
    if (!cached) {
        ChainConfig cfg;
        cfg.n_samples = 3100000;
        cfg.quantum_sd = std::sqrt(10.0);
        cfg.lo_sd = 6.0;
        cfg.seed = 778;
        auto stages = run_chain(cfg, Scenario::quantum_classical);
        SampleStream diff = std::move(stages.at(Stage::diff));
        stages.clear();

        // calibration from the configured noise levels: the difference arm
        // carries 2*(e^2+q^2) before decimation spreads it over the
        // oversampling factor; electronic-only leaves 2*e^2
        const double sd_m = std::sqrt(
            2.0 * (cfg.electronic_sd * cfg.electronic_sd +
                   cfg.quantum_sd * cfg.quantum_sd) /
            double(cfg.oversample));
        const double sd_e = std::sqrt(2.0 * cfg.electronic_sd *
                                      cfg.electronic_sd /
                                      double(cfg.oversample));
        const double h = conditional_min_entropy(sd_m, sd_e, cfg.adc_bits,
                                                 cfg.adc_fullscale,
                                                 diff.bit_depth);
        const ExtractorConfig ec =
            make_extractor_config(1024, h, diff.bit_depth, 0.5, 999);
        cached = extract_stream(diff, ec, h);
    }
    return *cached;
}

Outcome criterion_battery() {
    std::map<int, std::size_t> passed;
    std::size_t fail16 = 0;
    for (int bits : {16, 20, 28}) {
        const SampleStream s =
            lcg_stream({1103515245, 12345, 1ull << bits}, 1, 1250000);
        const sts::BatteryResult r =
            sts::run_battery(sts::bytes_to_bits(s), 100, 100000, {});
        passed[bits] = r.total_passed;
        if (bits == 16) fail16 = r.per_test.size() - r.total_passed;
    }
    const sts::BatteryResult hx =
        sts::run_battery(sts::bytes_to_bits(hashed_stream()), 100, 100000, {});

    Outcome r;
    r.ok = fail16 >= 2 && passed[16] <= passed[20] &&
           passed[20] <= passed[28] && hx.total_passed == 8;
    r.detail = fmt("m=2^16 fails %zu/8 (>=2), passed %zu<=%zu<=%zu, "
                   "extracted stream %zu/8",
                   fail16, passed[16], passed[20], passed[28],
                   hx.total_passed);
    return r;
}

Outcome criterion_extracted_unpredictable() {
    AttackConfig cfg;
    cfg.window = 10;
    cfg.stride = 3;
    cfg.train_symbols = 300008; // 100k training windows
    cfg.test_symbols = 60008;   // 20k windows per test set
    cfg.n_testsets = 5;
    cfg.val_fraction = 0.1;
    cfg.train.max_epochs = 6;
    cfg.train.patience = 2;
    cfg.train.seed = 4;
    cfg.model_seed = 13;
    const AttackReport rep = run_attack(hashed_stream(), cfg, nullptr);

    const double p_g = 1.0 / 256.0;
    const double total =
        double(rep.eval.windows_per_set) * double(cfg.n_testsets);
    const double binom_sd = std::sqrt(p_g * (1.0 - p_g) / total);
    const double dev = std::abs(rep.eval.p_ml_mean - p_g);

    Outcome r;
    r.ok = dev <= 3.0 * binom_sd;
    r.detail = fmt("|p_ml - 1/256| = %.2e <= 3 binomial sigma = %.2e "
                   "(p_ml %.5f)",
                   dev, 3.0 * binom_sd, rep.eval.p_ml_mean);
    return r;
}

// ---- 9. correlation self-consistency ----------------------------------------

Outcome criterion_correlations() {
    Rng rng(42);
    std::vector<double> x(5000000), y(5000000);
    for (auto& v : x) v = rng.next_normal();
    Rng rng2(43);
    for (auto& v : y) v = rng2.next_normal();

    const auto r = autocorrelation(x, 1000);
    std::size_t bad = 0;
    for (std::size_t lag = 1; lag <= 1000; ++lag)
        if (std::abs(r[lag]) > 3.0 * 4.5e-4) ++bad;

    const double cross = cross_correlation(x, y);
    const double dup = cross_correlation(x, x);
    const double cross_band = 3.0 / std::sqrt(double(x.size()));

    Outcome out;
    out.ok = bad <= 10 && std::abs(cross) < cross_band && dup == 1.0;
    out.detail = fmt("%zu/1000 lags outside +-3x4.5e-4 (<=10), "
                     "independent r %.1e (<%.1e), duplicated r %.17g",
                     bad, cross, cross_band, dup);
    return out;
}

// ---- 10. byte-identical reruns ----------------------------------------------

Outcome criterion_determinism() {
    fs::remove_all("acc_tmp/det");
    fs::create_directories("acc_tmp/det");
    {
        std::ofstream cfg("acc_tmp/det/cfg.json");
        cfg << "{\"n_samples\": 4096, \"oversample\": 4, \"lpf_taps\": 201,\n"
               " \"quantum_sd\": 3.1622776601683795, \"seed\": 7}\n";
    }
    std::vector<std::string> mismatches;
    auto expect_same = [&](const std::string& what, const fs::path& a,
                           const fs::path& b) {
        if (slurp(a) != slurp(b)) mismatches.push_back(what);
    };

    const std::string sim = "simulate --config acc_tmp/det/cfg.json --out ";
    if (run_cli(sim + "acc_tmp/det/sim1") != 0 ||
        run_cli(sim + "acc_tmp/det/sim2") != 0)
        return {false, "simulate rerun failed"};
    expect_same("manifest", "acc_tmp/det/sim1/manifest.json",
                "acc_tmp/det/sim2/manifest.json");
    for (const char* f :
         {"quantum_classical_diff.rns", "classical_lpf1.rns",
          "quantum_classical_det2.rns", "classical_demod1.rns"})
        expect_same(f, fs::path("acc_tmp/det/sim1") / f,
                    fs::path("acc_tmp/det/sim2") / f);

    const std::string gen = "lcg --a 69069 --c 1 --m 4294967296 --seed 3"
                            " --count 60000 --out ";
    if (run_cli(gen + "acc_tmp/det/a.rns") != 0 ||
        run_cli(gen + "acc_tmp/det/b.rns") != 0)
        return {false, "generator rerun failed"};
    expect_same("lcg stream", "acc_tmp/det/a.rns", "acc_tmp/det/b.rns");

    const std::string atk = "attack acc_tmp/det/a.rns --window 10 --stride 3"
                            " --train-size 30000 --test-size 3000"
                            " --test-sets 2 --epochs 1 --seed 5"
                            " --model-seed 7 --out ";
    if (run_cli(atk + "acc_tmp/det/atk1") != 0 ||
        run_cli(atk + "acc_tmp/det/atk2") != 0)
        return {false, "attack rerun failed"};
    expect_same("attack report", "acc_tmp/det/atk1/report.json",
                "acc_tmp/det/atk2/report.json");
    expect_same("attack psd", "acc_tmp/det/atk1/psd.csv",
                "acc_tmp/det/atk2/psd.csv");

    const std::string sts_cmd = "sts acc_tmp/det/a.rns --sequences 4"
                                " --seq-len 100000 --out ";
    if (run_cli(sts_cmd + "acc_tmp/det/sts1") != 0 ||
        run_cli(sts_cmd + "acc_tmp/det/sts2") != 0)
        return {false, "battery rerun failed"};
    expect_same("battery report", "acc_tmp/det/sts1/report.json",
                "acc_tmp/det/sts2/report.json");

    const std::string ext =
        "extract acc_tmp/det/sim1/quantum_classical_diff.rns"
        " --sd-m 2.345 --sd-e 0.707 --seed 11 --out ";
    if (run_cli(ext + "acc_tmp/det/ext1") != 0 ||
        run_cli(ext + "acc_tmp/det/ext2") != 0)
        return {false, "extractor rerun failed"};
    expect_same("hashed stream", "acc_tmp/det/ext1/hashed.rns",
                "acc_tmp/det/ext2/hashed.rns");
    expect_same("extract report", "acc_tmp/det/ext1/report.json",
                "acc_tmp/det/ext2/report.json");

    Outcome r;
    r.ok = mismatches.empty();
    if (r.ok) {
        r.detail = "simulate, lcg, attack, sts, extract reruns byte-identical";
    } else {
        r.detail = "mismatch:";
        for (const auto& m : mismatches) r.detail += " " + m;
    }
    return r;
}

} // namespace

int main(int argc, char** argv) {
    struct Entry {
        int num;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "gradient correctness", criterion_gradients},
        {2, "oracle equivalence", criterion_oracles},
        {3, "congruential period study", criterion_crng},
        {4, "classical scenario: leak at demod, none after filter",
         criterion_scenario1},
        {5, "quantum scenario: raw and difference unpredictable",
         criterion_scenario2},
        {6, "min-entropy spot values", criterion_min_entropy},
        {7, "battery: weak generator fails, extracted passes",
         criterion_battery},
        {8, "extracted stream unpredictable for trained model",
         criterion_extracted_unpredictable},
        {9, "correlation self-consistency", criterion_correlations},
        {10, "byte-identical reruns", criterion_determinism},
    };

    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    int failures = 0;
    for (const Entry& e : entries) {
        if (!wanted.empty() &&
            std::find(wanted.begin(), wanted.end(), e.num) == wanted.end())
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = e.run();
        } catch (const std::exception& ex) {
            out.ok = false;
            out.detail = std::string("exception: ") + ex.what();
        }
        const double secs = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        std::printf("[%s] %2d. %s (%.1f s)\n      %s\n",
                    out.ok ? "PASS" : "FAIL", e.num, e.name, secs,
                    out.detail.c_str());
        std::fflush(stdout);
        if (!out.ok) ++failures;
    }
    std::printf("acceptance: %d criterion(s) failed\n", failures);
    return failures;
}
