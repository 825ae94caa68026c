#include "rngml/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "rngml/errors.hpp"
#include "rngml/rng.hpp"

namespace rngml::nn {

Array conv1d(const Array& x, const Array& w, const Array& b) {
    require(x.shape.size() == 2 && w.shape.size() == 3 && b.shape.size() == 1,
            "conv1d: x must be [L x C], w [F x K x C], b [F]");
    const std::size_t L = x.shape[0], C = x.shape[1];
    const std::size_t F = w.shape[0], K = w.shape[1];
    require(w.shape[2] == C, "conv1d: channel mismatch");
    require(b.shape[0] == F, "conv1d: bias/filter mismatch");
    require(L >= K, "conv1d: input shorter than kernel");

    Array y({L - K + 1, F});
    for (std::size_t t = 0; t < L - K + 1; ++t)
        for (std::size_t f = 0; f < F; ++f) {
            double acc = b.data[f];
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t c = 0; c < C; ++c)
                    acc += x.at(t + k, c) * w.data[(f * K + k) * C + c];
            y.at(t, f) = acc;
        }
    return y;
}

ConvGrads conv1d_backward(const Array& x, const Array& w, const Array& dy) {
    const std::size_t L = x.shape[0], C = x.shape[1];
    const std::size_t F = w.shape[0], K = w.shape[1];
    require(dy.shape[0] == L - K + 1 && dy.shape[1] == F,
            "conv1d_backward: gradient shape mismatch");

    ConvGrads g;
    g.dx.reshape({L, C});
    g.dw.reshape({F, K, C});
    g.db.reshape({F});
    for (std::size_t t = 0; t < L - K + 1; ++t)
        for (std::size_t f = 0; f < F; ++f) {
            const double d = dy.at(t, f);
            g.db.data[f] += d;
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t c = 0; c < C; ++c) {
                    g.dw.data[(f * K + k) * C + c] += d * x.at(t + k, c);
                    g.dx.at(t + k, c) += d * w.data[(f * K + k) * C + c];
                }
        }
    return g;
}

PoolResult maxpool1d(const Array& x) {
    require(x.shape.size() == 2, "maxpool1d: x must be [L x C]");
    const std::size_t L = x.shape[0], C = x.shape[1];
    require(L >= 2, "maxpool1d: need at least two rows");
    PoolResult r;
    r.y.reshape({L / 2, C});
    r.argmax.resize((L / 2) * C);
    for (std::size_t t = 0; t < L / 2; ++t)
        for (std::size_t c = 0; c < C; ++c) {
            const double a = x.at(2 * t, c), b2 = x.at(2 * t + 1, c);
            // ties go to the earlier element
            if (b2 > a) {
                r.y.at(t, c) = b2;
                r.argmax[t * C + c] = (2 * t + 1) * C + c;
            } else {
                r.y.at(t, c) = a;
                r.argmax[t * C + c] = 2 * t * C + c;
            }
        }
    return r;
}

Array maxpool1d_backward(const PoolResult& pooled, std::size_t in_rows,
                         const Array& dy) {
    require(dy.same_shape(pooled.y), "maxpool1d_backward: shape mismatch");
    const std::size_t C = pooled.y.shape[1];
    Array dx({in_rows, C});
    for (std::size_t i = 0; i < pooled.argmax.size(); ++i)
        dx.data[pooled.argmax[i]] += dy.data[i];
    return dx;
}

Array relu(const Array& x) {
    Array y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Array relu_backward(const Array& x, const Array& dy) {
    require(x.same_shape(dy), "relu_backward: shape mismatch");
    Array dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (x.data[i] <= 0.0) dx.data[i] = 0.0;
    return dx;
}

Array sigmoid(const Array& x) {
    Array y = x;
    for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

Array sigmoid_backward(const Array& y, const Array& dy) {
    require(y.same_shape(dy), "sigmoid_backward: shape mismatch");
    Array dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] *= y.data[i] * (1.0 - y.data[i]);
    return dx;
}

Array tanh_act(const Array& x) {
    Array y = x;
    for (auto& v : y.data) v = std::tanh(v);
    return y;
}

Array tanh_backward(const Array& y, const Array& dy) {
    require(y.same_shape(dy), "tanh_backward: shape mismatch");
    Array dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        dx.data[i] *= 1.0 - y.data[i] * y.data[i];
    return dx;
}

LstmStepOut lstm_step(const Array& x, const Array& h_prev, const Array& c_prev,
                      const Array& wx, const Array& wh, const Array& b) {
    const std::size_t D = x.shape[0], H = h_prev.shape[0];
    require(c_prev.shape[0] == H, "lstm_step: cell/hidden size mismatch");
    require(wx.shape.size() == 2 && wx.shape[0] == D && wx.shape[1] == 4 * H,
            "lstm_step: wx must be [D x 4H]");
    require(wh.shape.size() == 2 && wh.shape[0] == H && wh.shape[1] == 4 * H,
            "lstm_step: wh must be [H x 4H]");
    require(b.shape[0] == 4 * H, "lstm_step: bias must be [4H]");

    std::vector<double> z(4 * H, 0.0);
    for (std::size_t j = 0; j < 4 * H; ++j) {
        double acc = b.data[j];
        for (std::size_t d = 0; d < D; ++d) acc += x.data[d] * wx.at(d, j);
        for (std::size_t k = 0; k < H; ++k) acc += h_prev.data[k] * wh.at(k, j);
        z[j] = acc;
    }
    LstmStepOut out;
    out.h.reshape({H});
    out.c.reshape({H});
    for (std::size_t k = 0; k < H; ++k) {
        const double ig = 1.0 / (1.0 + std::exp(-z[k]));
        const double fg = 1.0 / (1.0 + std::exp(-z[H + k]));
        const double gg = std::tanh(z[2 * H + k]);
        const double og = 1.0 / (1.0 + std::exp(-z[3 * H + k]));
        out.c.data[k] = fg * c_prev.data[k] + ig * gg;
        out.h.data[k] = og * std::tanh(out.c.data[k]);
    }
    return out;
}

Array dense(const Array& x, const Array& w, const Array& b) {
    require(x.shape.size() == 1 && w.shape.size() == 2, "dense: x [D], w [O x D]");
    const std::size_t D = x.shape[0], O = w.shape[0];
    require(w.shape[1] == D && b.shape[0] == O, "dense: shape mismatch");
    Array y({O});
    for (std::size_t o = 0; o < O; ++o) {
        double acc = b.data[o];
        for (std::size_t d = 0; d < D; ++d) acc += w.at(o, d) * x.data[d];
        y.data[o] = acc;
    }
    return y;
}

DenseGrads dense_backward(const Array& x, const Array& w, const Array& dy) {
    const std::size_t D = x.shape[0], O = w.shape[0];
    require(dy.shape[0] == O, "dense_backward: gradient shape mismatch");
    DenseGrads g;
    g.dx.reshape({D});
    g.dw.reshape({O, D});
    g.db = dy;
    for (std::size_t o = 0; o < O; ++o)
        for (std::size_t d = 0; d < D; ++d) {
            g.dw.at(o, d) = dy.data[o] * x.data[d];
            g.dx.data[d] += dy.data[o] * w.at(o, d);
        }
    return g;
}

LstmGrads lstm_step_backward(const Array& x, const Array& h_prev,
                             const Array& c_prev, const Array& wx,
                             const Array& wh, const Array& b, const Array& dh,
                             const Array& dc) {
    const std::size_t D = x.shape[0], H = h_prev.shape[0];

    // recompute the forward intermediates
    std::vector<double> z(4 * H);
    for (std::size_t j = 0; j < 4 * H; ++j) {
        double acc = b.data[j];
        for (std::size_t d = 0; d < D; ++d) acc += x.data[d] * wx.at(d, j);
        for (std::size_t k = 0; k < H; ++k) acc += h_prev.data[k] * wh.at(k, j);
        z[j] = acc;
    }
    std::vector<double> ig(H), fg(H), gg(H), og(H), c(H), ct(H);
    for (std::size_t k = 0; k < H; ++k) {
        ig[k] = 1.0 / (1.0 + std::exp(-z[k]));
        fg[k] = 1.0 / (1.0 + std::exp(-z[H + k]));
        gg[k] = std::tanh(z[2 * H + k]);
        og[k] = 1.0 / (1.0 + std::exp(-z[3 * H + k]));
        c[k] = fg[k] * c_prev.data[k] + ig[k] * gg[k];
        ct[k] = std::tanh(c[k]);
    }

    LstmGrads g;
    g.dx.reshape({D});
    g.dh_prev.reshape({H});
    g.dc_prev.reshape({H});
    g.dwx.reshape({D, 4 * H});
    g.dwh.reshape({H, 4 * H});
    g.db.reshape({4 * H});

    std::vector<double> dz(4 * H);
    for (std::size_t k = 0; k < H; ++k) {
        const double d_o = dh.data[k] * ct[k];
        const double d_c = dc.data[k] + dh.data[k] * og[k] * (1.0 - ct[k] * ct[k]);
        const double d_f = d_c * c_prev.data[k];
        const double d_i = d_c * gg[k];
        const double d_g = d_c * ig[k];
        g.dc_prev.data[k] = d_c * fg[k];
        dz[k] = d_i * ig[k] * (1.0 - ig[k]);
        dz[H + k] = d_f * fg[k] * (1.0 - fg[k]);
        dz[2 * H + k] = d_g * (1.0 - gg[k] * gg[k]);
        dz[3 * H + k] = d_o * og[k] * (1.0 - og[k]);
    }
    for (std::size_t j = 0; j < 4 * H; ++j) {
        g.db.data[j] = dz[j];
        for (std::size_t d = 0; d < D; ++d) {
            g.dwx.at(d, j) = x.data[d] * dz[j];
            g.dx.data[d] += wx.at(d, j) * dz[j];
        }
        for (std::size_t k = 0; k < H; ++k) {
            g.dwh.at(k, j) = h_prev.data[k] * dz[j];
            g.dh_prev.data[k] += wh.at(k, j) * dz[j];
        }
    }
    return g;
}

SoftmaxXent softmax_xent(const Array& logits, std::size_t label) {
    require(logits.shape.size() == 1 && label < logits.shape[0],
            "softmax_xent: label out of range");
    SoftmaxXent r;
    r.probs.reshape({logits.shape[0]});
    const double mx = *std::max_element(logits.data.begin(), logits.data.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        r.probs.data[i] = std::exp(logits.data[i] - mx);
        sum += r.probs.data[i];
    }
    for (auto& p : r.probs.data) p /= sum;
    r.loss = -std::log(r.probs.data[label]);
    return r;
}

Array softmax_xent_backward(const SoftmaxXent& fwd, std::size_t label) {
    Array d = fwd.probs;
    d.data[label] -= 1.0;
    return d;
}

void Adam::step(std::vector<Parameter*>& params) {
    if (m_.empty()) {
        for (auto* p : params) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }
    require(m_.size() == params.size(), "adam: parameter set changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        require(p.value.same_shape(p.grad), "adam: grad shape mismatch");
        auto& m = m_[pi].data;
        auto& v = v_[pi].data;
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = p.grad.data[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

double gradient_check(const std::function<double()>& loss,
                      std::vector<Parameter*>& params, double eps,
                      std::size_t sample_per_param, std::uint64_t sample_seed) {
    require(eps > 0.0, "gradient_check: eps must be positive");
    double worst = 0.0;
    Rng rng(sample_seed);
    for (auto* p : params) {
        const std::size_t n = p->value.data.size();
        std::vector<std::size_t> coords;
        if (sample_per_param == 0 || sample_per_param >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (std::size_t i = 0; i < sample_per_param; ++i)
                coords.push_back(rng.next_below(n));
        }
        for (std::size_t i : coords) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + eps;
            const double up = loss();
            p->value.data[i] = saved - eps;
            const double dn = loss();
            p->value.data[i] = saved;
            const double numeric = (up - dn) / (2.0 * eps);
            worst = std::max(worst, rel_err(numeric, p->grad.data[i]));
        }
    }
    return worst;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw ParseError(path + ": truncated container");
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw ParseError(path + ": truncated container");
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

constexpr char kMagic[8] = {'R', 'N', 'G', 'M', 'L', 'P', 'A', 'R'};

} // namespace

void save_parameters(const std::vector<Parameter>& params,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 8);
    put_u32(out, 1); // container version
    put_u32(out, std::uint32_t(params.size()));
    for (const auto& p : params) {
        put_u32(out, std::uint32_t(p.name.size()));
        out.write(p.name.data(), std::streamsize(p.name.size()));
        put_u32(out, std::uint32_t(p.value.shape.size()));
        for (auto e : p.value.shape) put_u64(out, e);
        static_assert(sizeof(double) == 8);
        out.write(reinterpret_cast<const char*>(p.value.data.data()),
                  std::streamsize(p.value.data.size() * 8));
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<Parameter> load_parameters(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw ParseError(path + ": not a parameter container");
    if (get_u32(in, path) != 1)
        throw ParseError(path + ": unsupported container version");
    const std::uint32_t count = get_u32(in, path);
    std::vector<Parameter> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        Parameter p;
        const std::uint32_t name_len = get_u32(in, path);
        p.name.resize(name_len);
        if (!in.read(p.name.data(), name_len))
            throw ParseError(path + ": truncated container");
        const std::uint32_t ndim = get_u32(in, path);
        std::vector<std::size_t> shape(ndim);
        for (auto& e : shape) e = std::size_t(get_u64(in, path));
        p.value.reshape(shape);
        p.grad.reshape(shape);
        if (!in.read(reinterpret_cast<char*>(p.value.data.data()),
                     std::streamsize(p.value.data.size() * 8)))
            throw ParseError(path + ": truncated container");
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace rngml::nn
