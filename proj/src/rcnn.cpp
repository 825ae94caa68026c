#include "rngml/rcnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <utility>

#include "rngml/errors.hpp"
#include "rngml/rng.hpp"

namespace rngml {

StackPlan plan_stack(const ModelSpec& spec) {
    require(spec.window >= 2, "model: window must hold at least two symbols");
    require(spec.alphabet >= 2, "model: alphabet must have at least two symbols");
    require(spec.conv1_filters >= 1 && spec.conv2_filters >= 1 &&
                spec.conv1_kernel >= 1 && spec.conv2_kernel >= 1,
            "model: conv sizes must be positive");
    require(spec.lstm_hidden >= 1 && spec.dense_hidden >= 1,
            "model: hidden sizes must be positive");

    StackPlan p;
    p.two_convs = spec.stack == StackKind::full ||
                  (spec.stack == StackKind::automatic && spec.window >= 15);
    p.f1 = spec.conv1_filters;
    p.k1 = p.two_convs ? spec.conv1_kernel : 3;
    require(spec.window >= p.k1, "model: window shorter than the conv kernel");
    p.len1 = spec.window - p.k1 + 1;
    p.pooled1 = p.len1 / 2;
    require(p.pooled1 >= 1, "model: conv/pool stack leaves no sequence steps");
    if (p.two_convs) {
        p.k2 = spec.conv2_kernel;
        p.f2 = spec.conv2_filters;
        require(p.pooled1 >= p.k2,
                "model: pooled sequence shorter than the second conv kernel");
        p.len2 = p.pooled1 - p.k2 + 1;
        p.pooled2 = p.len2 / 2;
        require(p.pooled2 >= 1, "model: conv/pool stack leaves no sequence steps");
        p.steps = p.pooled2;
        p.lstm_in = p.f2;
    } else {
        p.steps = p.pooled1;
        p.lstm_in = p.f1;
    }
    return p;
}

std::size_t parameter_count(const ModelSpec& spec) {
    const StackPlan p = plan_stack(spec);
    const std::size_t n = spec.alphabet;
    const std::size_t H = spec.lstm_hidden;
    const std::size_t DH = spec.dense_hidden;
    std::size_t total = p.f1 * p.k1 * n + p.f1;
    if (p.two_convs) total += p.f2 * p.k2 * p.f1 + p.f2;
    total += p.lstm_in * 4 * H + H * 4 * H + 4 * H;
    total += DH * H + DH + n * DH + n;
    return total;
}

std::vector<nn::Parameter*> Model::parameters() {
    std::vector<nn::Parameter*> p{&conv1_w, &conv1_b};
    if (plan.two_convs) {
        p.push_back(&conv2_w);
        p.push_back(&conv2_b);
    }
    for (auto* q : {&wx, &wh, &lstm_b, &d1_w, &d1_b, &d2_w, &d2_b}) p.push_back(q);
    return p;
}

Model build_model(const ModelSpec& spec, std::uint64_t seed) {
    Model m;
    m.spec = spec;
    m.plan = plan_stack(spec);
    const StackPlan& pl = m.plan;
    const std::size_t n = spec.alphabet;
    const std::size_t H = spec.lstm_hidden;
    const std::size_t D = pl.lstm_in;
    const std::size_t DH = spec.dense_hidden;

    m.conv1_w = nn::Parameter("conv1_w", {pl.f1, pl.k1, n});
    m.conv1_b = nn::Parameter("conv1_b", {pl.f1});
    if (pl.two_convs) {
        m.conv2_w = nn::Parameter("conv2_w", {pl.f2, pl.k2, pl.f1});
        m.conv2_b = nn::Parameter("conv2_b", {pl.f2});
    }
    m.wx = nn::Parameter("lstm_wx", {D, 4 * H});
    m.wh = nn::Parameter("lstm_wh", {H, 4 * H});
    m.lstm_b = nn::Parameter("lstm_b", {4 * H});
    m.d1_w = nn::Parameter("dense1_w", {DH, H});
    m.d1_b = nn::Parameter("dense1_b", {DH});
    m.d2_w = nn::Parameter("dense2_w", {n, DH});
    m.d2_b = nn::Parameter("dense2_b", {n});

    Rng rng(seed);
    auto uniform_fill = [&](Array& a, double limit) {
        for (auto& v : a.data) v = (rng.next_double() * 2.0 - 1.0) * limit;
    };
    auto glorot = [&](Array& a, std::size_t fan_in, std::size_t fan_out) {
        uniform_fill(a, std::sqrt(6.0 / double(fan_in + fan_out)));
    };
    glorot(m.conv1_w.value, pl.k1 * n, pl.k1 * pl.f1);
    if (pl.two_convs) glorot(m.conv2_w.value, pl.k2 * pl.f1, pl.k2 * pl.f2);
    glorot(m.wx.value, D, 4 * H);
    uniform_fill(m.wh.value, 1.0 / std::sqrt(double(H)));
    glorot(m.d1_w.value, H, DH);
    glorot(m.d2_w.value, DH, n);
    // forget gate starts open so early gradients reach back through time
    for (std::size_t j = H; j < 2 * H; ++j) m.lstm_b.value.data[j] = 1.0;
    return m;
}

void save_model(const Model& m, const std::string& path) {
    std::vector<nn::Parameter> ps;
    for (const auto* p :
         {&m.conv1_w, &m.conv1_b, &m.conv2_w, &m.conv2_b, &m.wx, &m.wh,
          &m.lstm_b, &m.d1_w, &m.d1_b, &m.d2_w, &m.d2_b}) {
        if (!m.plan.two_convs && (p == &m.conv2_w || p == &m.conv2_b)) continue;
        ps.push_back(*p);
    }
    nn::save_parameters(ps, path);
}

void load_model_weights(Model& m, const std::string& path) {
    const std::vector<nn::Parameter> loaded = nn::load_parameters(path);
    auto params = m.parameters();
    require(loaded.size() == params.size(),
            "checkpoint: parameter count does not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(loaded[i].name == params[i]->name,
                "checkpoint: unexpected parameter " + loaded[i].name);
        require(loaded[i].value.shape == params[i]->value.shape,
                "checkpoint: shape mismatch for " + loaded[i].name);
        params[i]->value = loaded[i].value;
    }
}

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// All per-batch buffers, allocated once for a fixed batch capacity.
// Sequence-major [steps, batch, channels] layouts feed the LSTM so the
// per-step slices handed to gemm stay contiguous.
struct Workspace {
    std::size_t cap = 0;
    std::size_t B = 0;
    std::vector<const std::int32_t*> wins;
    // forward
    std::vector<double> y1;           // [B, len1, f1] conv1 output, relu'd
    std::vector<double> p1;           // [B, pooled1, f1] (two-conv stack)
    std::vector<std::uint8_t> argm;   // winner bit of the mid pool
    std::vector<double> cols;         // [B*len2, k2*f1] second-conv patches
    std::vector<double> y2;           // [B*len2, f2] conv2 output, relu'd
    std::vector<std::uint8_t> argf;   // winner bit of the pool before the LSTM
    std::vector<double> xs;           // [steps, B, D] LSTM input
    std::vector<double> gates;        // [steps, B, 4H] activated (i,f,g,o)
    std::vector<double> hs;           // [steps+1, B, H], hs[0] = 0
    std::vector<double> cs;           // [steps+1, B, H], cs[0] = 0
    std::vector<double> tanc;         // [steps, B, H] tanh of the cell state
    std::vector<double> s1;           // [B, DH] first dense, sigmoid'd
    std::vector<double> probs;        // [B, n]
    // packed weights (refreshed whenever the model changes)
    std::vector<double> w1t;          // [k1, n, f1]
    std::vector<double> w2t;          // [k2*f1, f2]
    std::vector<double> wxT, whT;     // [4H, D], [4H, H]
    std::vector<double> d1wT, d2wT;   // [H, DH], [DH, n]
    // backward
    std::vector<double> dlogits, ds1, dh, dc;
    std::vector<double> dgates, dxs, dy2, dcols, dp1, dy1;
    std::vector<double> dw1t;         // grad in the gather layout, folded back
    std::vector<double> tbuf;         // shared transpose scratch
};

void ensure(Workspace& ws, const Model& m, std::size_t cap) {
    const StackPlan& pl = m.plan;
    const std::size_t n = m.spec.alphabet;
    const std::size_t H = m.spec.lstm_hidden;
    const std::size_t D = pl.lstm_in;
    const std::size_t T = pl.steps;
    const std::size_t DH = m.spec.dense_hidden;
    ws.cap = cap;
    ws.wins.assign(cap, nullptr);
    ws.y1.assign(cap * pl.len1 * pl.f1, 0.0);
    ws.dy1.assign(cap * pl.len1 * pl.f1, 0.0);
    std::size_t tmax = std::max({cap * n, cap * DH, T * cap * D, T * cap * H});
    if (pl.two_convs) {
        const std::size_t K = pl.k2 * pl.f1;
        ws.p1.assign(cap * pl.pooled1 * pl.f1, 0.0);
        ws.dp1.assign(cap * pl.pooled1 * pl.f1, 0.0);
        ws.argm.assign(cap * pl.pooled1 * pl.f1, 0);
        ws.cols.assign(cap * pl.len2 * K, 0.0);
        ws.dcols.assign(cap * pl.len2 * K, 0.0);
        ws.y2.assign(cap * pl.len2 * pl.f2, 0.0);
        ws.dy2.assign(cap * pl.len2 * pl.f2, 0.0);
        ws.w2t.assign(K * pl.f2, 0.0);
        tmax = std::max(tmax, cap * pl.len2 * pl.f2);
    }
    ws.argf.assign(T * cap * D, 0);
    ws.xs.assign(T * cap * D, 0.0);
    ws.dxs.assign(T * cap * D, 0.0);
    ws.gates.assign(T * cap * 4 * H, 0.0);
    ws.dgates.assign(T * cap * 4 * H, 0.0);
    ws.hs.assign((T + 1) * cap * H, 0.0);
    ws.cs.assign((T + 1) * cap * H, 0.0);
    ws.tanc.assign(T * cap * H, 0.0);
    ws.s1.assign(cap * DH, 0.0);
    ws.ds1.assign(cap * DH, 0.0);
    ws.probs.assign(cap * n, 0.0);
    ws.dlogits.assign(cap * n, 0.0);
    ws.dh.assign(cap * H, 0.0);
    ws.dc.assign(cap * H, 0.0);
    ws.w1t.assign(pl.k1 * n * pl.f1, 0.0);
    ws.dw1t.assign(pl.k1 * n * pl.f1, 0.0);
    ws.wxT.assign(4 * H * D, 0.0);
    ws.whT.assign(4 * H * H, 0.0);
    ws.d1wT.assign(H * DH, 0.0);
    ws.d2wT.assign(DH * n, 0.0);
    ws.tbuf.assign(tmax, 0.0);
}

void pack_weights(Workspace& ws, const Model& m) {
    const StackPlan& pl = m.plan;
    const std::size_t n = m.spec.alphabet;
    const std::size_t H = m.spec.lstm_hidden;
    const std::size_t D = pl.lstm_in;
    const std::size_t DH = m.spec.dense_hidden;
    const double* w1 = m.conv1_w.value.data.data();
    for (std::size_t f = 0; f < pl.f1; ++f)
        for (std::size_t dt = 0; dt < pl.k1; ++dt) {
            const double* src = w1 + (f * pl.k1 + dt) * n;
            for (std::size_t c = 0; c < n; ++c)
                ws.w1t[(dt * n + c) * pl.f1 + f] = src[c];
        }
    if (pl.two_convs) {
        const double* w2 = m.conv2_w.value.data.data();
        for (std::size_t f = 0; f < pl.f2; ++f)
            for (std::size_t q = 0; q < pl.k2 * pl.f1; ++q)
                ws.w2t[q * pl.f2 + f] = w2[f * pl.k2 * pl.f1 + q];
    }
    transpose(m.wx.value.data.data(), ws.wxT.data(), D, 4 * H);
    transpose(m.wh.value.data.data(), ws.whT.data(), H, 4 * H);
    transpose(m.d1_w.value.data.data(), ws.d1wT.data(), DH, H);
    transpose(m.d2_w.value.data.data(), ws.d2wT.data(), n, DH);
}

// pairwise max over rows 2t/2t+1 of a [rows x width] block; ties keep the
// earlier row, matching the reference pooling layer
void pool_pair(const double* block, std::size_t width, std::size_t out_t,
               double* dst, std::uint8_t* winner) {
    const double* r0 = block + 2 * out_t * width;
    const double* r1 = r0 + width;
    for (std::size_t f = 0; f < width; ++f) {
        const bool second = r1[f] > r0[f];
        dst[f] = second ? r1[f] : r0[f];
        winner[f] = second ? 1 : 0;
    }
}

void forward(Workspace& ws, const Model& m, const std::int32_t* const* wins,
             std::size_t B) {
    const StackPlan& pl = m.plan;
    const std::size_t n = m.spec.alphabet;
    const std::size_t F1 = pl.f1, K1 = pl.k1, L1 = pl.len1, P1 = pl.pooled1;
    const std::size_t H = m.spec.lstm_hidden, D = pl.lstm_in, T = pl.steps;
    const std::size_t DH = m.spec.dense_hidden;
    ws.B = B;
    std::copy(wins, wins + B, ws.wins.begin());

    // conv1 as a gather: input rows are one-hot, so each tap adds the weight
    // slice selected by the symbol id; unseen ids (all-zero rows) add nothing
    const double* b1 = m.conv1_b.value.data.data();
    for (std::size_t b = 0; b < B; ++b) {
        const std::int32_t* w = wins[b];
        for (std::size_t t = 0; t < L1; ++t) {
            double* y = &ws.y1[(b * L1 + t) * F1];
            std::copy(b1, b1 + F1, y);
            for (std::size_t dt = 0; dt < K1; ++dt) {
                const std::int32_t id = w[t + dt];
                if (id < 0) continue;
                const double* src = &ws.w1t[(dt * n + std::size_t(id)) * F1];
                for (std::size_t f = 0; f < F1; ++f) y[f] += src[f];
            }
            for (std::size_t f = 0; f < F1; ++f)
                if (y[f] < 0.0) y[f] = 0.0;
        }
    }

    if (pl.two_convs) {
        const std::size_t L2 = pl.len2, F2 = pl.f2, K = pl.k2 * F1;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t tp = 0; tp < P1; ++tp)
                pool_pair(&ws.y1[b * L1 * F1], F1, tp,
                          &ws.p1[(b * P1 + tp) * F1],
                          &ws.argm[(b * P1 + tp) * F1]);
        // each second-conv patch is a contiguous slice of the pooled map
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t2 = 0; t2 < L2; ++t2)
                std::copy_n(&ws.p1[(b * P1 + t2) * F1], K,
                            &ws.cols[(b * L2 + t2) * K]);
        gemm(ws.cols.data(), ws.w2t.data(), ws.y2.data(), B * L2, K, F2);
        const double* b2 = m.conv2_b.value.data.data();
        for (std::size_t r = 0; r < B * L2; ++r) {
            double* y = &ws.y2[r * F2];
            for (std::size_t f = 0; f < F2; ++f) {
                y[f] += b2[f];
                if (y[f] < 0.0) y[f] = 0.0;
            }
        }
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                pool_pair(&ws.y2[b * L2 * F2], F2, t,
                          &ws.xs[(t * B + b) * F2], &ws.argf[(t * B + b) * F2]);
    } else {
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t)
                pool_pair(&ws.y1[b * L1 * F1], F1, t,
                          &ws.xs[(t * B + b) * F1], &ws.argf[(t * B + b) * F1]);
    }

    // LSTM: the input contribution of every step in one gemm, the recurrent
    // part step by step
    gemm(ws.xs.data(), m.wx.value.data.data(), ws.gates.data(), T * B, D, 4 * H);
    const double* lb = m.lstm_b.value.data.data();
    for (std::size_t r = 0; r < T * B; ++r) {
        double* g = &ws.gates[r * 4 * H];
        for (std::size_t j = 0; j < 4 * H; ++j) g[j] += lb[j];
    }
    std::fill_n(ws.hs.begin(), B * H, 0.0);
    std::fill_n(ws.cs.begin(), B * H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double* g = &ws.gates[t * B * 4 * H];
        gemm(&ws.hs[t * B * H], m.wh.value.data.data(), g, B, H, 4 * H, true);
        const double* cprev = &ws.cs[t * B * H];
        double* cnext = &ws.cs[(t + 1) * B * H];
        double* hnext = &ws.hs[(t + 1) * B * H];
        double* tc = &ws.tanc[t * B * H];
        for (std::size_t b = 0; b < B; ++b) {
            double* row = g + b * 4 * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double gi = sigm(row[j]);
                const double gf = sigm(row[H + j]);
                const double gz = std::tanh(row[2 * H + j]);
                const double go = sigm(row[3 * H + j]);
                row[j] = gi;
                row[H + j] = gf;
                row[2 * H + j] = gz;
                row[3 * H + j] = go;
                const double c = gf * cprev[b * H + j] + gi * gz;
                cnext[b * H + j] = c;
                const double th = std::tanh(c);
                tc[b * H + j] = th;
                hnext[b * H + j] = go * th;
            }
        }
    }

    // dense head on the final hidden state
    gemm(&ws.hs[T * B * H], ws.d1wT.data(), ws.s1.data(), B, H, DH);
    const double* d1b = m.d1_b.value.data.data();
    for (std::size_t b = 0; b < B; ++b) {
        double* row = &ws.s1[b * DH];
        for (std::size_t j = 0; j < DH; ++j) row[j] = sigm(row[j] + d1b[j]);
    }
    gemm(ws.s1.data(), ws.d2wT.data(), ws.probs.data(), B, DH, n);
    const double* d2b = m.d2_b.value.data.data();
    for (std::size_t b = 0; b < B; ++b) {
        double* row = &ws.probs[b * n];
        double mx = row[0] + d2b[0];
        for (std::size_t j = 0; j < n; ++j) {
            row[j] += d2b[j];
            if (row[j] > mx) mx = row[j];
        }
        double se = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            se += row[j];
        }
        const double inv = 1.0 / se;
        for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
    }
}

struct BatchLoss {
    double sum = 0.0;
    std::size_t valid = 0;
};

BatchLoss batch_loss(const Workspace& ws, const Model& m,
                     const std::int32_t* labels, std::size_t B) {
    const std::size_t n = m.spec.alphabet;
    BatchLoss r;
    for (std::size_t b = 0; b < B; ++b) {
        if (labels[b] < 0) continue;
        const double p = ws.probs[b * n + std::size_t(labels[b])];
        r.sum += -std::log(p < 1e-300 ? 1e-300 : p);
        ++r.valid;
    }
    return r;
}

void add_colsum(const double* rows, std::size_t nrows, std::size_t ncols,
                double* out) {
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* row = rows + r * ncols;
        for (std::size_t c = 0; c < ncols; ++c) out[c] += row[c];
    }
}

// Accumulates parameter gradients of the mean cross-entropy over the batch's
// valid labels into the model's grad buffers (zeroed by the caller).
BatchLoss backward(Workspace& ws, Model& m, const std::int32_t* labels,
                   std::size_t B) {
    const StackPlan& pl = m.plan;
    const std::size_t n = m.spec.alphabet;
    const std::size_t F1 = pl.f1, K1 = pl.k1, L1 = pl.len1, P1 = pl.pooled1;
    const std::size_t H = m.spec.lstm_hidden, D = pl.lstm_in, T = pl.steps;
    const std::size_t DH = m.spec.dense_hidden;

    const BatchLoss bl = batch_loss(ws, m, labels, B);
    const double inv = bl.valid ? 1.0 / double(bl.valid) : 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double* dst = &ws.dlogits[b * n];
        if (labels[b] < 0) {
            std::fill_n(dst, n, 0.0);
            continue;
        }
        const double* p = &ws.probs[b * n];
        for (std::size_t j = 0; j < n; ++j) dst[j] = p[j] * inv;
        dst[std::size_t(labels[b])] -= inv;
    }

    // output dense
    transpose(ws.dlogits.data(), ws.tbuf.data(), B, n);
    gemm(ws.tbuf.data(), ws.s1.data(), m.d2_w.grad.data.data(), n, B, DH, true);
    add_colsum(ws.dlogits.data(), B, n, m.d2_b.grad.data.data());
    gemm(ws.dlogits.data(), m.d2_w.value.data.data(), ws.ds1.data(), B, n, DH);
    for (std::size_t r = 0; r < B * DH; ++r)
        ws.ds1[r] *= ws.s1[r] * (1.0 - ws.s1[r]);

    // hidden dense
    transpose(ws.ds1.data(), ws.tbuf.data(), B, DH);
    gemm(ws.tbuf.data(), &ws.hs[T * B * H], m.d1_w.grad.data.data(), DH, B, H,
         true);
    add_colsum(ws.ds1.data(), B, DH, m.d1_b.grad.data.data());
    gemm(ws.ds1.data(), m.d1_w.value.data.data(), ws.dh.data(), B, DH, H);

    // LSTM, reverse in time
    std::fill_n(ws.dc.begin(), B * H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        const double* g = &ws.gates[t * B * 4 * H];
        const double* tc = &ws.tanc[t * B * H];
        const double* cprev = &ws.cs[t * B * H];
        double* dg = &ws.dgates[t * B * 4 * H];
        for (std::size_t b = 0; b < B; ++b) {
            const double* row = g + b * 4 * H;
            double* drow = dg + b * 4 * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double gi = row[j];
                const double gf = row[H + j];
                const double gz = row[2 * H + j];
                const double go = row[3 * H + j];
                const double th = tc[b * H + j];
                const double dhv = ws.dh[b * H + j];
                const double dcv = ws.dc[b * H + j] + dhv * go * (1.0 - th * th);
                drow[j] = dcv * gz * gi * (1.0 - gi);
                drow[H + j] = dcv * cprev[b * H + j] * gf * (1.0 - gf);
                drow[2 * H + j] = dcv * gi * (1.0 - gz * gz);
                drow[3 * H + j] = dhv * th * go * (1.0 - go);
                ws.dc[b * H + j] = dcv * gf;
            }
        }
        gemm(dg, ws.whT.data(), ws.dh.data(), B, 4 * H, H);
    }
    transpose(ws.xs.data(), ws.tbuf.data(), T * B, D);
    gemm(ws.tbuf.data(), ws.dgates.data(), m.wx.grad.data.data(), D, T * B,
         4 * H, true);
    transpose(ws.hs.data(), ws.tbuf.data(), T * B, H);  // h_{t-1} stack
    gemm(ws.tbuf.data(), ws.dgates.data(), m.wh.grad.data.data(), H, T * B,
         4 * H, true);
    add_colsum(ws.dgates.data(), T * B, 4 * H, m.lstm_b.grad.data.data());
    gemm(ws.dgates.data(), ws.wxT.data(), ws.dxs.data(), T * B, 4 * H, D);

    // back through the pooling and the second conv
    if (pl.two_convs) {
        const std::size_t L2 = pl.len2, F2 = pl.f2, K = pl.k2 * F1;
        std::fill_n(ws.dy2.begin(), B * L2 * F2, 0.0);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t b = 0; b < B; ++b) {
                const double* src = &ws.dxs[(t * B + b) * F2];
                const std::uint8_t* am = &ws.argf[(t * B + b) * F2];
                for (std::size_t f = 0; f < F2; ++f)
                    ws.dy2[(b * L2 + 2 * t + am[f]) * F2 + f] = src[f];
            }
        for (std::size_t r = 0; r < B * L2 * F2; ++r)
            if (ws.y2[r] <= 0.0) ws.dy2[r] = 0.0;
        add_colsum(ws.dy2.data(), B * L2, F2, m.conv2_b.grad.data.data());
        transpose(ws.dy2.data(), ws.tbuf.data(), B * L2, F2);
        gemm(ws.tbuf.data(), ws.cols.data(), m.conv2_w.grad.data.data(), F2,
             B * L2, K, true);
        gemm(ws.dy2.data(), m.conv2_w.value.data.data(), ws.dcols.data(),
             B * L2, F2, K);
        std::fill_n(ws.dp1.begin(), B * P1 * F1, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t2 = 0; t2 < L2; ++t2) {
                double* dst = &ws.dp1[(b * P1 + t2) * F1];
                const double* src = &ws.dcols[(b * L2 + t2) * K];
                for (std::size_t q = 0; q < K; ++q) dst[q] += src[q];
            }
        std::fill_n(ws.dy1.begin(), B * L1 * F1, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t tp = 0; tp < P1; ++tp) {
                const double* src = &ws.dp1[(b * P1 + tp) * F1];
                const std::uint8_t* am = &ws.argm[(b * P1 + tp) * F1];
                for (std::size_t f = 0; f < F1; ++f)
                    ws.dy1[(b * L1 + 2 * tp + am[f]) * F1 + f] = src[f];
            }
    } else {
        std::fill_n(ws.dy1.begin(), B * L1 * F1, 0.0);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t b = 0; b < B; ++b) {
                const double* src = &ws.dxs[(t * B + b) * F1];
                const std::uint8_t* am = &ws.argf[(t * B + b) * F1];
                for (std::size_t f = 0; f < F1; ++f)
                    ws.dy1[(b * L1 + 2 * t + am[f]) * F1 + f] = src[f];
            }
    }
    for (std::size_t r = 0; r < B * L1 * F1; ++r)
        if (ws.y1[r] <= 0.0) ws.dy1[r] = 0.0;

    // conv1 gather backward: scatter each output row into the weight slices
    // its taps selected
    std::fill(ws.dw1t.begin(), ws.dw1t.end(), 0.0);
    double* db1 = m.conv1_b.grad.data.data();
    for (std::size_t b = 0; b < B; ++b) {
        const std::int32_t* w = ws.wins[b];
        for (std::size_t t = 0; t < L1; ++t) {
            const double* dy = &ws.dy1[(b * L1 + t) * F1];
            for (std::size_t f = 0; f < F1; ++f) db1[f] += dy[f];
            for (std::size_t dt = 0; dt < K1; ++dt) {
                const std::int32_t id = w[t + dt];
                if (id < 0) continue;
                double* dst = &ws.dw1t[(dt * n + std::size_t(id)) * F1];
                for (std::size_t f = 0; f < F1; ++f) dst[f] += dy[f];
            }
        }
    }
    double* w1g = m.conv1_w.grad.data.data();
    for (std::size_t f = 0; f < F1; ++f)
        for (std::size_t dt = 0; dt < K1; ++dt)
            for (std::size_t c = 0; c < n; ++c)
                w1g[(f * K1 + dt) * n + c] += ws.dw1t[(dt * n + c) * F1 + f];
    return bl;
}

DatasetScore score_with(Workspace& ws, const Model& m, const Dataset& d) {
    require(d.count > 0, "score: empty dataset");
    require(d.window == m.spec.window, "score: window length does not match");
    require(d.alphabet == m.spec.alphabet, "score: alphabet does not match");
    const std::size_t n = m.spec.alphabet;
    std::vector<const std::int32_t*> wins(ws.cap);
    std::vector<std::int32_t> labels(ws.cap);
    pack_weights(ws, m);
    double loss_sum = 0.0;
    std::size_t valid = 0, hits = 0;
    for (std::size_t start = 0; start < d.count; start += ws.cap) {
        const std::size_t B = std::min(ws.cap, d.count - start);
        for (std::size_t b = 0; b < B; ++b) {
            wins[b] = d.window_ids(start + b);
            labels[b] = d.label(start + b);
        }
        forward(ws, m, wins.data(), B);
        for (std::size_t b = 0; b < B; ++b) {
            const double* row = &ws.probs[b * n];
            std::size_t arg = 0;
            for (std::size_t j = 1; j < n; ++j)
                if (row[j] > row[arg]) arg = j;
            if (labels[b] >= 0) {
                const double p = row[std::size_t(labels[b])];
                loss_sum += -std::log(p < 1e-300 ? 1e-300 : p);
                ++valid;
                if (arg == std::size_t(labels[b])) ++hits;
            }
        }
    }
    DatasetScore s;
    s.loss = valid ? loss_sum / double(valid) : 0.0;
    s.accuracy = double(hits) / double(d.count);
    s.scored = valid;
    return s;
}

} // namespace

TrainResult train(Model& m, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
    require(train_set.count > 0 && val_set.count > 0, "train: empty split");
    require(train_set.window == m.spec.window &&
                val_set.window == m.spec.window,
            "train: window length does not match the model");
    require(train_set.alphabet == m.spec.alphabet &&
                val_set.alphabet == m.spec.alphabet,
            "train: alphabet size does not match the model");
    require(cfg.batch > 0, "train: batch size must be positive");
    require(cfg.max_epochs > 0, "train: epoch budget must be positive");
    require(cfg.patience > 0, "train: patience must be positive");

    Workspace ws;
    ensure(ws, m, std::min(cfg.batch, std::max(train_set.count, val_set.count)));
    auto params = m.parameters();
    nn::Adam opt(cfg.adam);
    Rng shuffle(cfg.seed);
    std::vector<std::size_t> order(train_set.count);
    std::iota(order.begin(), order.end(), 0);
    std::vector<const std::int32_t*> wins(ws.cap);
    std::vector<std::int32_t> labels(ws.cap);

    TrainResult out;
    double best = std::numeric_limits<double>::infinity();
    std::vector<Array> best_weights;
    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = train_set.count - 1; i > 0; --i) {
            const std::size_t j = shuffle.next_below(i + 1);
            std::swap(order[i], order[j]);
        }
        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        for (std::size_t start = 0; start < train_set.count; start += ws.cap) {
            const std::size_t B = std::min(ws.cap, train_set.count - start);
            for (std::size_t b = 0; b < B; ++b) {
                wins[b] = train_set.window_ids(order[start + b]);
                labels[b] = train_set.label(order[start + b]);
            }
            for (auto* p : params) p->grad.fill(0.0);
            pack_weights(ws, m);
            forward(ws, m, wins.data(), B);
            const BatchLoss bl = backward(ws, m, labels.data(), B);
            loss_sum += bl.sum;
            loss_n += bl.valid;
            opt.step(params);
        }
        const DatasetScore vs = score_with(ws, m, val_set);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_n ? loss_sum / double(loss_n) : 0.0;
        rec.val_loss = vs.loss;
        rec.val_accuracy = vs.accuracy;
        rec.improved = vs.loss < best;
        if (rec.improved) {
            best = vs.loss;
            out.best_epoch = epoch;
            out.best_val_loss = vs.loss;
            out.best_val_accuracy = vs.accuracy;
            best_weights.clear();
            for (auto* p : params) best_weights.push_back(p->value);
            stale = 0;
        } else {
            ++stale;
        }
        out.history.push_back(rec);
        if (cfg.log)
            std::fprintf(stderr,
                         "epoch %zu: train %.4f  val %.4f  val_acc %.4f%s\n",
                         rec.epoch, rec.train_loss, rec.val_loss,
                         rec.val_accuracy, rec.improved ? "  *" : "");
        if (stale >= cfg.patience) break;
    }
    if (!best_weights.empty())
        for (std::size_t i = 0; i < params.size(); ++i)
            params[i]->value = best_weights[i];
    return out;
}

Prediction predict(const Model& m, const std::int32_t* window_ids) {
    Workspace ws;
    ensure(ws, m, 1);
    pack_weights(ws, m);
    const std::int32_t* wins[1] = {window_ids};
    forward(ws, m, wins, 1);
    Prediction p;
    p.probs.assign(ws.probs.begin(), ws.probs.begin() + m.spec.alphabet);
    p.argmax = 0;
    for (std::size_t j = 1; j < p.probs.size(); ++j)
        if (p.probs[j] > p.probs[p.argmax]) p.argmax = j;
    return p;
}

DatasetScore score_dataset(const Model& m, const Dataset& d) {
    Workspace ws;
    ensure(ws, m, std::min<std::size_t>(256, d.count));
    return score_with(ws, m, d);
}

double loss_and_gradients(Model& m, const Dataset& d) {
    require(d.count > 0, "loss: empty dataset");
    require(d.window == m.spec.window && d.alphabet == m.spec.alphabet,
            "loss: dataset does not match the model");
    Workspace ws;
    ensure(ws, m, d.count);
    std::vector<const std::int32_t*> wins(d.count);
    std::vector<std::int32_t> labels(d.count);
    for (std::size_t k = 0; k < d.count; ++k) {
        wins[k] = d.window_ids(k);
        labels[k] = d.label(k);
    }
    for (auto* p : m.parameters()) p->grad.fill(0.0);
    pack_weights(ws, m);
    forward(ws, m, wins.data(), d.count);
    const BatchLoss bl = backward(ws, m, labels.data(), d.count);
    return bl.valid ? bl.sum / double(bl.valid) : 0.0;
}

EvalResult evaluate(const Model& m, const std::vector<Dataset>& testsets,
                    double p_g) {
    require(!testsets.empty(), "evaluate: no test sets");
    require(p_g > 0.0 && p_g <= 1.0,
            "evaluate: guessing probability out of range");
    EvalResult r;
    r.p_g = p_g;
    r.windows_per_set = testsets.front().count;
    Workspace ws;
    ensure(ws, m, std::min<std::size_t>(256, r.windows_per_set));
    const std::size_t n = m.spec.alphabet;
    std::vector<const std::int32_t*> wins(ws.cap);
    std::vector<std::int32_t> labels(ws.cap);
    pack_weights(ws, m);
    for (const Dataset& d : testsets) {
        require(d.count == r.windows_per_set,
                "evaluate: test sets differ in size");
        require(d.window == m.spec.window && d.alphabet == m.spec.alphabet,
                "evaluate: test set does not match the model");
        std::size_t hits = 0;
        for (std::size_t start = 0; start < d.count; start += ws.cap) {
            const std::size_t B = std::min(ws.cap, d.count - start);
            for (std::size_t b = 0; b < B; ++b) {
                wins[b] = d.window_ids(start + b);
                labels[b] = d.label(start + b);
            }
            forward(ws, m, wins.data(), B);
            for (std::size_t b = 0; b < B; ++b) {
                if (labels[b] < 0) continue;
                const double* row = &ws.probs[b * n];
                std::size_t arg = 0;
                for (std::size_t j = 1; j < n; ++j)
                    if (row[j] > row[arg]) arg = j;
                if (arg == std::size_t(labels[b])) ++hits;
            }
        }
        r.per_testset_accuracy.push_back(double(hits) / double(d.count));
    }
    const std::size_t k = r.per_testset_accuracy.size();
    double mean = 0.0;
    for (double a : r.per_testset_accuracy) mean += a;
    mean /= double(k);
    double sd = 0.0;
    if (k > 1) {
        for (double a : r.per_testset_accuracy)
            sd += (a - mean) * (a - mean);
        sd = std::sqrt(sd / double(k - 1));
    }
    r.p_ml_mean = mean;
    r.p_ml_sd = sd;
    r.advantage_sigma = advantage_sigma(mean, sd, p_g, r.windows_per_set);
    return r;
}

AttackReport run_attack(const SampleStream& s, const AttackConfig& cfg,
                        Model* trained) {
    AttackData data =
        split_attack_data(s, cfg.window, cfg.stride, cfg.train_symbols,
                          cfg.test_symbols, cfg.n_testsets, cfg.val_fraction);
    // static-guess baseline learned from the training region only
    SampleStream head = s;
    head.values.assign(s.values.begin(),
                       s.values.begin() + std::ptrdiff_t(cfg.train_symbols));
    const Guess g = guessing_probability(histogram(head));

    ModelSpec spec;
    spec.window = cfg.window;
    spec.alphabet = data.table.size();
    spec.stack = cfg.stack;
    Model model = build_model(spec, cfg.model_seed);

    AttackReport rep;
    rep.alphabet = data.table.size();
    rep.guess = g;
    rep.training = train(model, data.train, data.val, cfg.train);
    rep.eval = evaluate(model, data.tests, g.p_g);
    if (trained) *trained = std::move(model);
    return rep;
}

} // namespace rngml
