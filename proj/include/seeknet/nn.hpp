#pragma once

// Minimal reverse-mode gradient core: dense row-major tensors plus the layer
// set the policy network needs (5x5 conv, per-channel normalization, ReLU,
// 2x2 max-pool, 1x1 conv over beams, fully-connected). Each layer owns its
// parameters and gradient accumulators and implements an explicit backward
// pass; networks compose layers and route gradients by hand.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "seeknet/common.hpp"

namespace seeknet {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(static_cast<size_t>(count(shape)), 0.0);
    }

    static long long count(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) n *= d;
        return n;
    }
    size_t size() const { return v.size(); }
    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool shape_is(const std::vector<int>& s) const { return shape == s; }
};

// Named parameter with matching gradient accumulator.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

using ParamVisitor = std::function<void(Param&)>;

inline void xavier_init(Tensor& t, int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& x : t.v) x = rng.uniform(-a, a);
}

// ---------------------------------------------------------------------------
// Dense: y = W x + b, W is (out, in).
// ---------------------------------------------------------------------------

struct Dense {
    int in = 0, out = 0;
    Param W, b;

    Dense() = default;
    Dense(const std::string& name, int in_dim, int out_dim)
        : in(in_dim), out(out_dim), W(name + ".W", {out_dim, in_dim}), b(name + ".b", {out_dim}) {}

    void init(Rng& rng) { xavier_init(W.value, in, out, rng); }

    void forward(const double* x, double* y) const {
        for (int o = 0; o < out; ++o) {
            double acc = b.value.v[static_cast<size_t>(o)];
            const double* w = W.value.data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
    }

    // gx may be null when input gradients are not needed.
    void backward(const double* x, const double* gy, double* gx) {
        for (int o = 0; o < out; ++o) {
            const double g = gy[o];
            b.grad.v[static_cast<size_t>(o)] += g;
            double* gw = W.grad.data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i) gw[i] += g * x[i];
        }
        if (!gx) return;
        for (int i = 0; i < in; ++i) {
            double acc = 0.0;
            for (int o = 0; o < out; ++o)
                acc += W.value.v[static_cast<size_t>(o) * in + i] * gy[o];
            gx[i] = acc;
        }
    }

    void visit(const ParamVisitor& fn) {
        fn(W);
        fn(b);
    }
};

// ---------------------------------------------------------------------------
// Conv2D: square kernel, stride 1, zero padding k/2 (shape preserving).
// Input (ic, H, W) -> output (oc, H, W).
// ---------------------------------------------------------------------------

struct Conv2D {
    int ic = 0, oc = 0, k = 5, pad = 2;
    Param W, b;

    Conv2D() = default;
    Conv2D(const std::string& name, int in_ch, int out_ch, int kernel = 5)
        : ic(in_ch), oc(out_ch), k(kernel), pad(kernel / 2),
          W(name + ".W", {out_ch, in_ch, kernel, kernel}), b(name + ".b", {out_ch}) {}

    void init(Rng& rng) { xavier_init(W.value, ic * k * k, oc * k * k, rng); }

    void forward(const double* x, int h, int w, double* y) const {
        for (int o = 0; o < oc; ++o) {
            const double bias = b.value.v[static_cast<size_t>(o)];
            double* yo = y + static_cast<size_t>(o) * h * w;
            for (int i = 0; i < h * w; ++i) yo[i] = bias;
            for (int c = 0; c < ic; ++c) {
                const double* xc = x + static_cast<size_t>(c) * h * w;
                const double* ker = W.value.data() + ((static_cast<size_t>(o) * ic + c) * k) * k;
                for (int u = 0; u < k; ++u) {
                    for (int vv = 0; vv < k; ++vv) {
                        const double wk = ker[u * k + vv];
                        if (wk == 0.0) continue;
                        const int di = u - pad, dj = vv - pad;
                        const int i0 = std::max(0, -di), i1 = std::min(h, h - di);
                        const int j0 = std::max(0, -dj), j1 = std::min(w, w - dj);
                        for (int i = i0; i < i1; ++i) {
                            double* yrow = yo + static_cast<size_t>(i) * w;
                            const double* xrow = xc + static_cast<size_t>(i + di) * w + dj;
                            for (int j = j0; j < j1; ++j) yrow[j] += wk * xrow[j];
                        }
                    }
                }
            }
        }
    }

    void backward(const double* x, int h, int w, const double* gy, double* gx) {
        for (int o = 0; o < oc; ++o) {
            const double* go = gy + static_cast<size_t>(o) * h * w;
            double bsum = 0.0;
            for (int i = 0; i < h * w; ++i) bsum += go[i];
            b.grad.v[static_cast<size_t>(o)] += bsum;
            for (int c = 0; c < ic; ++c) {
                const double* xc = x + static_cast<size_t>(c) * h * w;
                double* gker = W.grad.data() + ((static_cast<size_t>(o) * ic + c) * k) * k;
                const double* ker = W.value.data() + ((static_cast<size_t>(o) * ic + c) * k) * k;
                double* gxc = gx ? gx + static_cast<size_t>(c) * h * w : nullptr;
                for (int u = 0; u < k; ++u) {
                    for (int vv = 0; vv < k; ++vv) {
                        const int di = u - pad, dj = vv - pad;
                        const int i0 = std::max(0, -di), i1 = std::min(h, h - di);
                        const int j0 = std::max(0, -dj), j1 = std::min(w, w - dj);
                        double acc = 0.0;
                        const double wk = ker[u * k + vv];
                        for (int i = i0; i < i1; ++i) {
                            const double* grow = go + static_cast<size_t>(i) * w;
                            const double* xrow = xc + static_cast<size_t>(i + di) * w + dj;
                            for (int j = j0; j < j1; ++j) acc += grow[j] * xrow[j];
                        }
                        gker[u * k + vv] += acc;
                        if (gxc && wk != 0.0) {
                            for (int i = i0; i < i1; ++i) {
                                const double* grow = go + static_cast<size_t>(i) * w;
                                double* gxrow = gxc + static_cast<size_t>(i + di) * w + dj;
                                for (int j = j0; j < j1; ++j) gxrow[j] += wk * grow[j];
                            }
                        }
                    }
                }
            }
        }
    }

    void visit(const ParamVisitor& fn) {
        fn(W);
        fn(b);
    }
};

// ---------------------------------------------------------------------------
// Per-channel normalization over spatial positions with learned affine.
// y = gamma * (x - mu) / sqrt(var + eps) + beta, statistics per channel.
// ---------------------------------------------------------------------------

struct ChannelNorm {
    int ch = 0;
    double eps = 1e-5;
    Param gamma, beta;

    ChannelNorm() = default;
    ChannelNorm(const std::string& name, int channels)
        : ch(channels), gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}) {
        std::fill(gamma.value.v.begin(), gamma.value.v.end(), 1.0);
    }

    struct Cache {
        std::vector<double> xhat;
        std::vector<double> istd;  // per channel
    };

    void forward(const double* x, int spatial, double* y, Cache* cache) const {
        if (cache) {
            cache->xhat.resize(static_cast<size_t>(ch) * spatial);
            cache->istd.resize(static_cast<size_t>(ch));
        }
        for (int c = 0; c < ch; ++c) {
            const double* xc = x + static_cast<size_t>(c) * spatial;
            double* yc = y + static_cast<size_t>(c) * spatial;
            double mu = 0.0;
            for (int i = 0; i < spatial; ++i) mu += xc[i];
            mu /= spatial;
            double var = 0.0;
            for (int i = 0; i < spatial; ++i) {
                const double d = xc[i] - mu;
                var += d * d;
            }
            var /= spatial;
            const double istd = 1.0 / std::sqrt(var + eps);
            const double g = gamma.value.v[static_cast<size_t>(c)];
            const double bb = beta.value.v[static_cast<size_t>(c)];
            for (int i = 0; i < spatial; ++i) {
                const double xh = (xc[i] - mu) * istd;
                if (cache) cache->xhat[static_cast<size_t>(c) * spatial + i] = xh;
                yc[i] = g * xh + bb;
            }
            if (cache) cache->istd[static_cast<size_t>(c)] = istd;
        }
    }

    void backward(const Cache& cache, int spatial, const double* gy, double* gx) {
        for (int c = 0; c < ch; ++c) {
            const double* gyc = gy + static_cast<size_t>(c) * spatial;
            const double* xh = cache.xhat.data() + static_cast<size_t>(c) * spatial;
            double* gxc = gx + static_cast<size_t>(c) * spatial;
            double sum_g = 0.0, sum_gx = 0.0;
            for (int i = 0; i < spatial; ++i) {
                sum_g += gyc[i];
                sum_gx += gyc[i] * xh[i];
            }
            gamma.grad.v[static_cast<size_t>(c)] += sum_gx;
            beta.grad.v[static_cast<size_t>(c)] += sum_g;
            const double g = gamma.value.v[static_cast<size_t>(c)];
            const double istd = cache.istd[static_cast<size_t>(c)];
            const double mean_g = sum_g / spatial;
            const double mean_gx = sum_gx / spatial;
            for (int i = 0; i < spatial; ++i)
                gxc[i] = g * istd * (gyc[i] - mean_g - xh[i] * mean_gx);
        }
    }

    void visit(const ParamVisitor& fn) {
        fn(gamma);
        fn(beta);
    }
};

// ---------------------------------------------------------------------------
// Stateless pieces
// ---------------------------------------------------------------------------

inline void relu_forward(const double* x, size_t n, double* y) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void relu_backward(const double* x, size_t n, const double* gy, double* gx) {
    for (size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

// 2x2 max-pool with stride 2, floor semantics on odd extents.
struct MaxPool2 {
    struct Cache {
        std::vector<int> argmax;  // flat input index per output element
    };

    static void forward(const double* x, int ch, int h, int w, double* y, Cache* cache) {
        const int oh = h / 2, ow = w / 2;
        if (cache) cache->argmax.resize(static_cast<size_t>(ch) * oh * ow);
        for (int c = 0; c < ch; ++c) {
            const double* xc = x + static_cast<size_t>(c) * h * w;
            double* yc = y + static_cast<size_t>(c) * oh * ow;
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    int best_idx = (2 * i) * w + 2 * j;
                    double best = xc[best_idx];
                    const int cand[3] = {(2 * i) * w + 2 * j + 1, (2 * i + 1) * w + 2 * j,
                                         (2 * i + 1) * w + 2 * j + 1};
                    for (int idx : cand) {
                        if (xc[idx] > best) {
                            best = xc[idx];
                            best_idx = idx;
                        }
                    }
                    yc[static_cast<size_t>(i) * ow + j] = best;
                    if (cache)
                        cache->argmax[(static_cast<size_t>(c) * oh + i) * ow + j] =
                            c * h * w + best_idx;
                }
            }
        }
    }

    static void backward(const Cache& cache, const double* gy, size_t out_n, double* gx) {
        for (size_t i = 0; i < out_n; ++i) gx[static_cast<size_t>(cache.argmax[i])] += gy[i];
    }
};

// 1x1 convolution over a 1-D signal: channel mixing at every position.
// Input (ic, L) -> output (oc, L).
struct Conv1x1 {
    int ic = 0, oc = 0;
    Param W, b;

    Conv1x1() = default;
    Conv1x1(const std::string& name, int in_ch, int out_ch)
        : ic(in_ch), oc(out_ch), W(name + ".W", {out_ch, in_ch}), b(name + ".b", {out_ch}) {}

    void init(Rng& rng) { xavier_init(W.value, ic, oc, rng); }

    void forward(const double* x, int len, double* y) const {
        for (int o = 0; o < oc; ++o) {
            double* yo = y + static_cast<size_t>(o) * len;
            const double bias = b.value.v[static_cast<size_t>(o)];
            for (int i = 0; i < len; ++i) yo[i] = bias;
            for (int c = 0; c < ic; ++c) {
                const double wk = W.value.v[static_cast<size_t>(o) * ic + c];
                const double* xc = x + static_cast<size_t>(c) * len;
                for (int i = 0; i < len; ++i) yo[i] += wk * xc[i];
            }
        }
    }

    void backward(const double* x, int len, const double* gy, double* gx) {
        for (int o = 0; o < oc; ++o) {
            const double* go = gy + static_cast<size_t>(o) * len;
            double bsum = 0.0;
            for (int i = 0; i < len; ++i) bsum += go[i];
            b.grad.v[static_cast<size_t>(o)] += bsum;
            for (int c = 0; c < ic; ++c) {
                const double* xc = x + static_cast<size_t>(c) * len;
                double acc = 0.0;
                for (int i = 0; i < len; ++i) acc += go[i] * xc[i];
                W.grad.v[static_cast<size_t>(o) * ic + c] += acc;
            }
        }
        if (!gx) return;
        for (int c = 0; c < ic; ++c) {
            double* gxc = gx + static_cast<size_t>(c) * len;
            for (int i = 0; i < len; ++i) gxc[i] = 0.0;
            for (int o = 0; o < oc; ++o) {
                const double wk = W.value.v[static_cast<size_t>(o) * ic + c];
                const double* go = gy + static_cast<size_t>(o) * len;
                for (int i = 0; i < len; ++i) gxc[i] += wk * go[i];
            }
        }
    }

    void visit(const ParamVisitor& fn) {
        fn(W);
        fn(b);
    }
};

// ---------------------------------------------------------------------------
// Softmax utilities (used by the policy head and the trainer).
// ---------------------------------------------------------------------------

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double z : logits) mx = std::max(mx, z);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
}

inline double entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace seeknet
