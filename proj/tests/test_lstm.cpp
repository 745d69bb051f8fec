#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "hgr/lstm.hpp"
#include "hgr/rng.hpp"
#include "oracles.hpp"

using namespace hgr;

namespace {

std::vector<double> to_vec(const Tensor& t) {
    return std::vector<double>(t.data(), t.data() + t.size());
}

oracle::LstmRefParams to_ref(const LstmParams& p) {
    oracle::LstmRefParams r;
    r.input = p.input_dim();
    r.hidden = p.hidden_dim();
    r.w_xi = to_vec(p.w_xi);
    r.w_hi = to_vec(p.w_hi);
    r.b_i = to_vec(p.b_i);
    r.w_xf = to_vec(p.w_xf);
    r.w_hf = to_vec(p.w_hf);
    r.b_f = to_vec(p.b_f);
    r.w_xo = to_vec(p.w_xo);
    r.w_ho = to_vec(p.w_ho);
    r.b_o = to_vec(p.b_o);
    r.w_xc = to_vec(p.w_xc);
    r.w_hc = to_vec(p.w_hc);
    r.b_c = to_vec(p.b_c);
    return r;
}

Tensor random_vec(std::size_t n, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t = Tensor::vec(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("lstm_init is deterministic and bounded", "[lstm]") {
    LstmParams a = lstm_init(4, 3, std::uint64_t{42});
    LstmParams b = lstm_init(4, 3, std::uint64_t{42});
    auto at = a.tensors();
    auto bt = b.tensors();
    for (std::size_t i = 0; i < at.size(); ++i) {
        REQUIRE(at[i]->size() == bt[i]->size());
        for (std::size_t j = 0; j < at[i]->size(); ++j) CHECK((*at[i])[j] == (*bt[i])[j]);
    }

    LstmParams c = lstm_init(4, 3, std::uint64_t{43});
    bool any_diff = false;
    auto ct = c.tensors();
    for (std::size_t i = 0; i < at.size() && !any_diff; ++i) {
        for (std::size_t j = 0; j < at[i]->size(); ++j) {
            if ((*at[i])[j] != (*ct[i])[j]) {
                any_diff = true;
                break;
            }
        }
    }
    CHECK(any_diff);

    for (const Tensor* w : {&a.w_xi, &a.w_xf, &a.w_xo, &a.w_xc}) {
        for (std::size_t j = 0; j < w->size(); ++j) CHECK(std::abs((*w)[j]) <= 0.5);
    }
    const double hb = 1.0 / std::sqrt(3.0);
    for (const Tensor* w : {&a.w_hi, &a.w_hf, &a.w_ho, &a.w_hc}) {
        for (std::size_t j = 0; j < w->size(); ++j) CHECK(std::abs((*w)[j]) <= hb);
    }
    for (const Tensor* bias : {&a.b_i, &a.b_f, &a.b_o, &a.b_c}) {
        for (std::size_t j = 0; j < bias->size(); ++j) CHECK((*bias)[j] == 0.0);
    }

    CHECK_THROWS_AS(lstm_init(0, 3, std::uint64_t{1}), InputError);
}

TEST_CASE("lstm_step with zero parameters", "[lstm]") {
    LstmParams p = lstm_zeros(3, 2);
    LstmState prev = lstm_zero_state(2);

    SECTION("from the zero state everything stays zero") {
        LstmStepTape tape;
        LstmState next = lstm_step(p, Tensor::of({1, -1, 2}), prev, &tape);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(tape.i[j] == 0.5);
            CHECK(tape.f[j] == 0.5);
            CHECK(tape.o[j] == 0.5);
            CHECK(tape.g[j] == 0.0);
            CHECK(next.c[j] == 0.0);
            CHECK(next.h[j] == 0.0);
        }
    }
    SECTION("memory decays through the half-open forget gate") {
        prev.c = Tensor::of({0.8, -1.2});
        LstmState next = lstm_step(p, Tensor::of({0, 0, 0}), prev);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(next.c[j] == Catch::Approx(0.5 * prev.c[j]).epsilon(1e-15));
            CHECK(next.h[j] ==
                  Catch::Approx(0.5 * std::tanh(0.5 * prev.c[j])).epsilon(1e-15));
        }
    }
    SECTION("dimension errors") {
        CHECK_THROWS_AS(lstm_step(p, Tensor::of({1, 2}), prev), DimensionError);
        CHECK_THROWS_AS(lstm_step(p, Tensor::of({1, 2, 3}), lstm_zero_state(3)), DimensionError);
    }
}

TEST_CASE("lstm_step matches the straight-line reference", "[lstm]") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng.below(6);
        const std::size_t n = 1 + rng.below(6);
        LstmParams p = lstm_init(d, n, rng);
        LstmState prev{random_vec(n, rng, -0.9, 0.9), random_vec(n, rng)};
        Tensor x = random_vec(d, rng);

        LstmState next = lstm_step(p, x, prev);
        oracle::LstmRefState ref_prev{to_vec(prev.h), to_vec(prev.c)};
        oracle::LstmRefState ref = oracle::lstm_step_reference(to_ref(p), to_vec(x), ref_prev);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(std::abs(next.h[j] - ref.h[j]) < 1e-12);
            CHECK(std::abs(next.c[j] - ref.c[j]) < 1e-12);
        }
    }
}

TEST_CASE("lstm_forward folds lstm_step", "[lstm]") {
    Rng rng(7);
    LstmParams p = lstm_init(3, 4, rng);

    SECTION("T = 1 equals a single step") {
        Tensor x = random_vec(3, rng);
        LstmForward fwd = lstm_forward(p, {x});
        LstmState step = lstm_step(p, x, lstm_zero_state(4));
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(fwd.states[0].h[j] == step.h[j]);
            CHECK(fwd.states[0].c[j] == step.c[j]);
        }
    }
    SECTION("zero parameters keep h at zero") {
        LstmParams z = lstm_zeros(3, 4);
        std::vector<Tensor> xs;
        for (int t = 0; t < 5; ++t) xs.push_back(random_vec(3, rng));
        LstmForward fwd = lstm_forward(z, xs);
        for (const LstmState& s : fwd.states) {
            for (std::size_t j = 0; j < 4; ++j) CHECK(s.h[j] == 0.0);
        }
    }
    SECTION("forward over a concatenation equals two chained forwards") {
        std::vector<Tensor> xs, ys, all;
        for (int t = 0; t < 3; ++t) xs.push_back(random_vec(3, rng));
        for (int t = 0; t < 4; ++t) ys.push_back(random_vec(3, rng));
        all = xs;
        all.insert(all.end(), ys.begin(), ys.end());

        LstmForward first = lstm_forward(p, xs);
        LstmForward second = lstm_forward(p, ys, &first.states.back());
        LstmForward whole = lstm_forward(p, all);
        for (std::size_t t = 0; t < ys.size(); ++t) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(whole.states[xs.size() + t].h[j] == second.states[t].h[j]);
            }
        }
    }
    SECTION("hidden state stays inside (-1, 1)") {
        std::vector<Tensor> xs;
        for (int t = 0; t < 9; ++t) xs.push_back(random_vec(3, rng, -5, 5));
        LstmForward fwd = lstm_forward(p, xs);
        for (const LstmState& s : fwd.states) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(s.h[j] > -1.0);
                CHECK(s.h[j] < 1.0);
                CHECK(std::isfinite(s.c[j]));
            }
        }
    }
    SECTION("empty sequence is an input error") {
        CHECK_THROWS_AS(lstm_forward(p, {}), InputError);
    }
}

namespace {

// Scalar readout loss over every hidden state: L = sum_t <w_t, h_t>.
double readout_loss(const LstmParams& p, const std::vector<Tensor>& xs,
                    const std::vector<Tensor>& readout) {
    LstmForward fwd = lstm_forward(p, xs);
    double loss = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        for (std::size_t j = 0; j < readout[t].size(); ++j) {
            loss += readout[t][j] * fwd.states[t].h[j];
        }
    }
    return loss;
}

void check_bptt_against_fd(std::size_t t_len, std::size_t d, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LstmParams p = lstm_init(d, n, rng);
    std::vector<Tensor> xs, readout;
    for (std::size_t t = 0; t < t_len; ++t) {
        xs.push_back(random_vec(d, rng));
        readout.push_back(random_vec(n, rng));
    }

    LstmForward fwd = lstm_forward(p, xs);
    LstmBackward bwd = lstm_backward(p, fwd.tape, readout);

    const double h = 1e-5;
    auto loss = [&]() { return readout_loss(p, xs, readout); };
    auto check_slot = [&](double& slot, double analytic) {
        const double saved = slot;
        slot = saved + h;
        const double up = loss();
        slot = saved - h;
        const double down = loss();
        slot = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(rel_err(analytic, numeric) < 1e-6);
    };

    auto params = p.tensors();
    auto grads = bwd.grads.tensors();
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        for (std::size_t j = 0; j < params[ti]->size(); ++j) {
            check_slot((*params[ti])[j], (*grads[ti])[j]);
        }
    }
    for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            check_slot(xs[t][j], bwd.dx[t][j]);
        }
    }
}

}  // namespace

TEST_CASE("lstm_backward zero output gradient gives zero parameter gradient", "[lstm]") {
    Rng rng(55);
    LstmParams p = lstm_init(3, 4, rng);
    std::vector<Tensor> xs;
    for (int t = 0; t < 4; ++t) xs.push_back(random_vec(3, rng));
    LstmForward fwd = lstm_forward(p, xs);
    std::vector<Tensor> dh(4, Tensor::vec(4));
    LstmBackward bwd = lstm_backward(p, fwd.tape, dh);
    for (const Tensor* g : bwd.grads.tensors()) {
        for (std::size_t j = 0; j < g->size(); ++j) CHECK((*g)[j] == 0.0);
    }
    CHECK_THROWS_AS(lstm_backward(p, fwd.tape, std::vector<Tensor>(3, Tensor::vec(4))),
                    InputError);
}

TEST_CASE("BPTT matches finite differences at T = 1", "[lstm]") {
    check_bptt_against_fd(1, 3, 4, 303);
}

TEST_CASE("BPTT matches finite differences at T = 9", "[lstm]") {
    check_bptt_against_fd(9, 4, 6, 904);
}

TEST_CASE("lstm forward and backward are deterministic", "[lstm]") {
    for (int run = 0; run < 2; ++run) {
        Rng rng(77);
        LstmParams p = lstm_init(5, 6, rng);
        std::vector<Tensor> xs, dh;
        for (int t = 0; t < 6; ++t) {
            xs.push_back(random_vec(5, rng));
            dh.push_back(random_vec(6, rng));
        }
        static std::vector<double> first_run;
        LstmForward fwd = lstm_forward(p, xs);
        LstmBackward bwd = lstm_backward(p, fwd.tape, dh);
        std::vector<double> snapshot;
        for (const LstmState& s : fwd.states) {
            snapshot.insert(snapshot.end(), s.h.data(), s.h.data() + s.h.size());
        }
        for (const Tensor* g : bwd.grads.tensors()) {
            snapshot.insert(snapshot.end(), g->data(), g->data() + g->size());
        }
        if (run == 0) {
            first_run = snapshot;
        } else {
            REQUIRE(snapshot.size() == first_run.size());
            for (std::size_t i = 0; i < snapshot.size(); ++i) {
                CHECK(snapshot[i] == first_run[i]);
            }
        }
    }
}
