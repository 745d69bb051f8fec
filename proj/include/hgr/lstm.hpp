#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hgr/error.hpp"
#include "hgr/rng.hpp"
#include "hgr/tensor.hpp"

namespace hgr {

// Gate parameters of one LSTM cell. Member order (i, f, o, c groups, each
// input matrix / recurrent matrix / bias) is the serialization order used by
// checkpoints.
struct LstmParams {
    Tensor w_xi, w_hi, b_i;
    Tensor w_xf, w_hf, b_f;
    Tensor w_xo, w_ho, b_o;
    Tensor w_xc, w_hc, b_c;

    std::size_t input_dim() const { return w_xi.cols(); }
    std::size_t hidden_dim() const { return w_xi.rows(); }
    bool empty() const { return w_xi.empty(); }

    std::vector<Tensor*> tensors() {
        return {&w_xi, &w_hi, &b_i, &w_xf, &w_hf, &b_f,
                &w_xo, &w_ho, &b_o, &w_xc, &w_hc, &b_c};
    }
    std::vector<const Tensor*> tensors() const {
        return {&w_xi, &w_hi, &b_i, &w_xf, &w_hf, &b_f,
                &w_xo, &w_ho, &b_o, &w_xc, &w_hc, &b_c};
    }
};

inline LstmParams lstm_zeros(std::size_t input_dim, std::size_t hidden_dim) {
    LstmParams p;
    p.w_xi = Tensor::mat(hidden_dim, input_dim);
    p.w_xf = Tensor::mat(hidden_dim, input_dim);
    p.w_xo = Tensor::mat(hidden_dim, input_dim);
    p.w_xc = Tensor::mat(hidden_dim, input_dim);
    p.w_hi = Tensor::mat(hidden_dim, hidden_dim);
    p.w_hf = Tensor::mat(hidden_dim, hidden_dim);
    p.w_ho = Tensor::mat(hidden_dim, hidden_dim);
    p.w_hc = Tensor::mat(hidden_dim, hidden_dim);
    p.b_i = Tensor::vec(hidden_dim);
    p.b_f = Tensor::vec(hidden_dim);
    p.b_o = Tensor::vec(hidden_dim);
    p.b_c = Tensor::vec(hidden_dim);
    return p;
}

// Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)); biases zero. The
// forget-gate bias can be offset (the common +1 heuristic) but defaults to
// zero, matching the plain cell equations.
inline LstmParams lstm_init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                            double forget_bias = 0.0) {
    if (input_dim == 0 || hidden_dim == 0) {
        throw InputError("lstm_init: dimensions must be positive");
    }
    LstmParams p = lstm_zeros(input_dim, hidden_dim);
    const double xb = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double hb = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (Tensor* w : {&p.w_xi, &p.w_xf, &p.w_xo, &p.w_xc}) {
        for (std::size_t i = 0; i < w->size(); ++i) (*w)[i] = rng.uniform(-xb, xb);
    }
    for (Tensor* w : {&p.w_hi, &p.w_hf, &p.w_ho, &p.w_hc}) {
        for (std::size_t i = 0; i < w->size(); ++i) (*w)[i] = rng.uniform(-hb, hb);
    }
    fill(p.b_f, forget_bias);
    return p;
}

inline LstmParams lstm_init(std::size_t input_dim, std::size_t hidden_dim, std::uint64_t seed,
                            double forget_bias = 0.0) {
    Rng rng(seed);
    return lstm_init(input_dim, hidden_dim, rng, forget_bias);
}

// Recurrent state: hidden vector h and memory cell c.
struct LstmState {
    Tensor h, c;
};

inline LstmState lstm_zero_state(std::size_t hidden_dim) {
    return {Tensor::vec(hidden_dim), Tensor::vec(hidden_dim)};
}

// One timestep of forward intermediates, retained for the reverse pass.
struct LstmStepTape {
    Tensor x, h_prev, c_prev;
    Tensor i, f, o, g;  // post-activation gates
    Tensor c, tanh_c, h;
};

using LstmTape = std::vector<LstmStepTape>;

// i = sigma(W_xi x + W_hi h + b_i)       input gate
// f = sigma(W_xf x + W_hf h + b_f)       forget gate
// o = sigma(W_xo x + W_ho h + b_o)       output gate
// g = tanh (W_xc x + W_hc h + b_c)       input modulation
// c_t = f . c_{t-1} + i . g
// h_t = o . tanh(c_t)
inline LstmState lstm_step(const LstmParams& p, const Tensor& x, const LstmState& prev,
                           LstmStepTape* tape = nullptr) {
    if (x.size() != p.input_dim()) {
        throw DimensionError("lstm_step: input " + shape_str(x) + " does not match weights " +
                             shape_str(p.w_xi));
    }
    if (prev.h.size() != p.hidden_dim() || prev.c.size() != p.hidden_dim()) {
        throw DimensionError("lstm_step: state size " + std::to_string(prev.h.size()) +
                             " does not match hidden dim " + std::to_string(p.hidden_dim()));
    }
    auto gate = [&](const Tensor& wx, const Tensor& wh, const Tensor& b) {
        Tensor a = matvec(wx, x);
        add_inplace(a, matvec(wh, prev.h));
        add_inplace(a, b);
        return a;
    };
    Tensor i = sigmoid(gate(p.w_xi, p.w_hi, p.b_i));
    Tensor f = sigmoid(gate(p.w_xf, p.w_hf, p.b_f));
    Tensor o = sigmoid(gate(p.w_xo, p.w_ho, p.b_o));
    Tensor g = tanh_act(gate(p.w_xc, p.w_hc, p.b_c));

    Tensor c = add(hadamard(f, prev.c), hadamard(i, g));
    Tensor tc = tanh_act(c);
    Tensor h = hadamard(o, tc);

    if (tape) {
        tape->x = x;
        tape->h_prev = prev.h;
        tape->c_prev = prev.c;
        tape->i = i;
        tape->f = f;
        tape->o = o;
        tape->g = g;
        tape->c = c;
        tape->tanh_c = tc;
        tape->h = h;
    }
    return {std::move(h), std::move(c)};
}

struct LstmForward {
    std::vector<LstmState> states;  // one per timestep
    LstmTape tape;
};

// Left fold of lstm_step from the given initial state (zero state when
// omitted), returning every intermediate state.
inline LstmForward lstm_forward(const LstmParams& p, const std::vector<Tensor>& xs,
                                const LstmState* init = nullptr) {
    if (xs.empty()) throw InputError("lstm_forward: empty input sequence");
    LstmForward out;
    out.states.reserve(xs.size());
    out.tape.resize(xs.size());
    LstmState state = init ? *init : lstm_zero_state(p.hidden_dim());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        state = lstm_step(p, xs[t], state, &out.tape[t]);
        out.states.push_back(state);
    }
    return out;
}

struct LstmBackward {
    LstmParams grads;        // accumulated over all timesteps
    std::vector<Tensor> dx;  // gradient w.r.t. each input
};

// Exact reverse of the unrolled cell. dh holds dL/dh_t contributions from
// the layers above at every timestep. Gradient flows through both the
// hidden-state recurrence and the additive memory-cell path.
inline LstmBackward lstm_backward(const LstmParams& p, const LstmTape& tape,
                                  const std::vector<Tensor>& dh) {
    if (tape.size() != dh.size()) {
        throw InputError("lstm_backward: tape has " + std::to_string(tape.size()) +
                         " steps but dh has " + std::to_string(dh.size()));
    }
    if (tape.empty()) throw InputError("lstm_backward: empty tape");
    const std::size_t n = p.hidden_dim();

    LstmBackward out;
    out.grads = lstm_zeros(p.input_dim(), n);
    out.dx.assign(tape.size(), Tensor::vec(p.input_dim()));

    Tensor dh_rec = Tensor::vec(n);  // recurrent gradient into h_t from t+1
    Tensor dc_rec = Tensor::vec(n);  // recurrent gradient into c_t from t+1

    for (std::size_t t = tape.size(); t-- > 0;) {
        const LstmStepTape& s = tape[t];
        if (dh[t].size() != n) {
            throw InputError("lstm_backward: dh[" + std::to_string(t) + "] has length " +
                             std::to_string(dh[t].size()) + ", expected " + std::to_string(n));
        }
        Tensor dht = add(dh[t], dh_rec);

        // h = o . tanh(c)
        Tensor do_gate = hadamard(dht, s.tanh_c);
        Tensor dc = add(dc_rec, tanh_backward(s.tanh_c, hadamard(dht, s.o)));

        // c = f . c_prev + i . g
        Tensor df_gate = hadamard(dc, s.c_prev);
        Tensor di_gate = hadamard(dc, s.g);
        Tensor dg = hadamard(dc, s.i);
        dc_rec = hadamard(dc, s.f);

        // through the gate nonlinearities to the pre-activations
        Tensor dai = sigmoid_backward(s.i, di_gate);
        Tensor daf = sigmoid_backward(s.f, df_gate);
        Tensor dao = sigmoid_backward(s.o, do_gate);
        Tensor dag = tanh_backward(s.g, dg);

        // each gate pre-activation is W_x x + W_h h_prev + b
        Tensor dhp = Tensor::vec(n);
        matvec_backward(p.w_xi, s.x, dai, out.grads.w_xi, out.dx[t]);
        matvec_backward(p.w_hi, s.h_prev, dai, out.grads.w_hi, dhp);
        add_inplace(out.grads.b_i, dai);
        matvec_backward(p.w_xf, s.x, daf, out.grads.w_xf, out.dx[t]);
        matvec_backward(p.w_hf, s.h_prev, daf, out.grads.w_hf, dhp);
        add_inplace(out.grads.b_f, daf);
        matvec_backward(p.w_xo, s.x, dao, out.grads.w_xo, out.dx[t]);
        matvec_backward(p.w_ho, s.h_prev, dao, out.grads.w_ho, dhp);
        add_inplace(out.grads.b_o, dao);
        matvec_backward(p.w_xc, s.x, dag, out.grads.w_xc, out.dx[t]);
        matvec_backward(p.w_hc, s.h_prev, dag, out.grads.w_hc, dhp);
        add_inplace(out.grads.b_c, dag);

        dh_rec = std::move(dhp);
    }
    return out;
}

}  // namespace hgr
