#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "hgr/error.hpp"
#include "hgr/rng.hpp"
#include "hgr/tensor.hpp"

namespace hgr {

enum class Activation { linear, relu, tanh };

// Fully connected transform y = act(W x + b).
struct FcParams {
    Tensor w;  // out x in
    Tensor b;  // out
    Activation act = Activation::linear;

    std::size_t in_dim() const { return w.cols(); }
    std::size_t out_dim() const { return w.rows(); }
    bool empty() const { return w.empty(); }
};

// Weights uniform in (-1/sqrt(in), +1/sqrt(in)), biases zero. Classifier
// heads are created with zero = true so an untrained head yields uniform
// class probabilities.
inline FcParams fc_init(std::size_t in, std::size_t out, Activation act, Rng& rng,
                        bool zero = false) {
    if (in == 0 || out == 0) throw InputError("fc_init: dimensions must be positive");
    FcParams p;
    p.w = Tensor::mat(out, in);
    p.b = Tensor::vec(out);
    p.act = act;
    if (!zero) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] = rng.uniform(-bound, bound);
    }
    return p;
}

inline FcParams fc_zeros(std::size_t in, std::size_t out, Activation act = Activation::linear) {
    FcParams p;
    p.w = Tensor::mat(out, in);
    p.b = Tensor::vec(out);
    p.act = act;
    return p;
}

struct FcCache {
    Tensor x;    // input
    Tensor pre;  // pre-activation W x + b
};

inline Tensor fc_forward(const FcParams& p, const Tensor& x, FcCache* cache = nullptr) {
    if (x.size() != p.in_dim()) {
        throw DimensionError("fc_forward: input " + shape_str(x) + " does not match weights " +
                             shape_str(p.w));
    }
    Tensor pre = matvec(p.w, x);
    add_inplace(pre, p.b);
    Tensor y;
    switch (p.act) {
        case Activation::linear:
            y = pre;
            break;
        case Activation::relu: {
            y = Tensor::vec(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) y[i] = pre[i] > 0.0 ? pre[i] : 0.0;
            break;
        }
        case Activation::tanh:
            y = tanh_act(pre);
            break;
    }
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
    }
    return y;
}

// Accumulates dL/dW and dL/db into grads; optionally accumulates dL/dx.
inline void fc_backward(const FcParams& p, const FcCache& cache, const Tensor& dy,
                        FcParams& grads, Tensor* dx) {
    Tensor dpre = Tensor::vec(dy.size());
    switch (p.act) {
        case Activation::linear:
            dpre = dy;
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < dy.size(); ++i)
                dpre[i] = cache.pre[i] > 0.0 ? dy[i] : 0.0;
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const double y = std::tanh(cache.pre[i]);
                dpre[i] = dy[i] * (1.0 - y * y);
            }
            break;
    }
    add_inplace(grads.b, dpre);
    if (dx) {
        matvec_backward(p.w, cache.x, dpre, grads.w, *dx);
    } else {
        Tensor sink = zeros_like(cache.x);
        matvec_backward(p.w, cache.x, dpre, grads.w, sink);
    }
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy.
// ---------------------------------------------------------------------------

struct SoftmaxXent {
    double loss = 0.0;
    Tensor probs;
};

// Max-subtracted softmax; the loss is evaluated as log1p of the odds against
// the true class so a confident correct prediction keeps full precision.
inline SoftmaxXent softmax_xent(const Tensor& logits, std::size_t label) {
    if (logits.size() == 0) throw InputError("softmax_xent: empty logits");
    if (label >= logits.size()) {
        throw InputError("softmax_xent: label " + std::to_string(label) + " out of range [0, " +
                         std::to_string(logits.size()) + ")");
    }
    ensure_finite(logits, "softmax_xent");
    double m = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);

    SoftmaxXent out;
    out.probs = Tensor::vec(logits.size());
    double sum_others = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.probs[i] = std::exp(logits[i] - m);
        if (i != label) sum_others += out.probs[i];
    }
    const double e_label = out.probs[label];
    const double total = e_label + sum_others;
    for (std::size_t i = 0; i < logits.size(); ++i) out.probs[i] /= total;

    const double odds = sum_others / e_label;
    out.loss = std::isfinite(odds) ? std::log1p(odds)
                                   : std::log(total) - (logits[label] - m);
    return out;
}

// dL/dlogits = probs - onehot(label).
inline Tensor softmax_xent_backward(const SoftmaxXent& fwd, std::size_t label) {
    Tensor d = fwd.probs;
    d[label] -= 1.0;
    return d;
}

// ---------------------------------------------------------------------------
// Concatenation and cross-person pooling.
// ---------------------------------------------------------------------------

inline Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor c = Tensor::vec(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) c[a.size() + i] = b[i];
    return c;
}

// Splits the gradient of a concatenated vector back onto its two operands.
inline void concat_backward(const Tensor& dc, std::size_t a_len, Tensor& da, Tensor& db) {
    for (std::size_t i = 0; i < a_len; ++i) da[i] += dc[i];
    for (std::size_t i = a_len; i < dc.size(); ++i) db[i - a_len] += dc[i];
}

enum class PoolMode { max, sum, average };

inline const char* pool_mode_name(PoolMode m) {
    switch (m) {
        case PoolMode::max: return "max";
        case PoolMode::sum: return "sum";
        case PoolMode::average: return "average";
    }
    return "?";
}

struct PoolCache {
    PoolMode mode = PoolMode::max;
    std::size_t count = 0;                // number of pooled vectors
    std::vector<std::size_t> argmax;      // per coordinate, max mode only
};

// Elementwise max / sum / mean over K same-length vectors. Sum and average
// add each coordinate's K values in sorted order, which makes the result
// bitwise invariant under permutation of the inputs; max ties route the
// gradient to the lowest input index.
inline Tensor pool_persons(const std::vector<Tensor>& feats, PoolMode mode,
                           PoolCache* cache = nullptr) {
    if (feats.empty()) throw InputError("pool_persons: empty scene (K = 0)");
    const std::size_t d = feats[0].size();
    for (const Tensor& f : feats) {
        if (f.size() != d) {
            throw DimensionError("pool_persons: ragged inputs " + shape_str(feats[0]) + " vs " +
                                 shape_str(f));
        }
    }
    const std::size_t k = feats.size();
    Tensor z = Tensor::vec(d);
    if (cache) {
        cache->mode = mode;
        cache->count = k;
        cache->argmax.clear();
    }
    if (mode == PoolMode::max) {
        std::vector<std::size_t> arg(d, 0);
        for (std::size_t j = 0; j < d; ++j) {
            double best = feats[0][j];
            for (std::size_t i = 1; i < k; ++i) {
                if (feats[i][j] > best) {
                    best = feats[i][j];
                    arg[j] = i;
                }
            }
            z[j] = best;
        }
        if (cache) cache->argmax = std::move(arg);
    } else {
        std::vector<double> column(k);
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t i = 0; i < k; ++i) column[i] = feats[i][j];
            std::sort(column.begin(), column.end());
            double acc = 0.0;
            for (double v : column) acc += v;
            z[j] = mode == PoolMode::sum ? acc : acc / static_cast<double>(k);
        }
    }
    ensure_finite(z, "pool_persons");
    return z;
}

// Accumulates the pooled gradient back onto the K input gradients.
inline void pool_backward(const Tensor& dz, const PoolCache& cache, std::vector<Tensor>& dfeats) {
    if (dfeats.size() != cache.count) {
        throw DimensionError("pool_backward: gradient count does not match pooled count");
    }
    switch (cache.mode) {
        case PoolMode::max:
            for (std::size_t j = 0; j < dz.size(); ++j) dfeats[cache.argmax[j]][j] += dz[j];
            break;
        case PoolMode::sum:
            for (Tensor& df : dfeats)
                for (std::size_t j = 0; j < dz.size(); ++j) df[j] += dz[j];
            break;
        case PoolMode::average: {
            const double inv = 1.0 / static_cast<double>(cache.count);
            for (Tensor& df : dfeats)
                for (std::size_t j = 0; j < dz.size(); ++j) df[j] += dz[j] * inv;
            break;
        }
    }
}

}  // namespace hgr
