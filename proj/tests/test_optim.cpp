#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "hgr/optim.hpp"
#include "hgr/rng.hpp"

using namespace hgr;

TEST_CASE("sgd_step reduces to plain gradient descent at zero momentum", "[optim]") {
    Tensor w = Tensor::of({1.0, 2.0});
    Tensor g = Tensor::of({0.5, -0.25});
    OptimState st = make_optim({&w}, 0.1, 0.0);
    sgd_step({&w}, {&g}, st);
    CHECK(w[0] == Catch::Approx(1.0 - 0.1 * 0.5).epsilon(1e-15));
    CHECK(w[1] == Catch::Approx(2.0 + 0.1 * 0.25).epsilon(1e-15));
}

TEST_CASE("zero gradient with zero velocity leaves parameters unchanged", "[optim]") {
    Tensor w = Tensor::of({3.0, -4.0});
    Tensor g = Tensor::vec(2);
    OptimState st = make_optim({&w}, 0.1, 0.9);
    sgd_step({&w}, {&g}, st);
    CHECK(w[0] == 3.0);
    CHECK(w[1] == -4.0);
}

TEST_CASE("two momentum steps with constant gradient displace by -2.9 g", "[optim]") {
    Tensor w = Tensor::of({0.0});
    Tensor g = Tensor::of({1.0});
    OptimState st = make_optim({&w}, 1.0, 0.9);
    sgd_step({&w}, {&g}, st);
    sgd_step({&w}, {&g}, st);
    CHECK(w[0] == Catch::Approx(-2.9).epsilon(1e-15));
}

TEST_CASE("velocity follows the geometric series under constant gradient", "[optim]") {
    const double lr = 0.01, mu = 0.7, gval = 2.0;
    Tensor w = Tensor::of({0.0});
    Tensor g = Tensor::of({gval});
    OptimState st = make_optim({&w}, lr, mu);
    for (int k = 1; k <= 12; ++k) {
        sgd_step({&w}, {&g}, st);
        const double expected = -lr * gval * (1.0 - std::pow(mu, k)) / (1.0 - mu);
        CHECK(st.velocity[0][0] == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("loss is non-increasing on a convex quadratic below the curvature bound", "[optim]") {
    Rng rng(13);
    Tensor w = Tensor::vec(6);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-3, 3);
    OptimState st = make_optim({&w}, 0.5, 0.0);
    auto loss = [&]() {
        double l = 0;
        for (std::size_t i = 0; i < w.size(); ++i) l += 0.5 * w[i] * w[i];
        return l;
    };
    double prev = loss();
    for (int step = 0; step < 50; ++step) {
        Tensor g = w;  // gradient of ||w||^2 / 2
        sgd_step({&w}, {&g}, st);
        const double cur = loss();
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("sgd_step input validation", "[optim]") {
    Tensor w = Tensor::of({1.0});
    Tensor bad_shape = Tensor::of({1.0, 2.0});
    OptimState st = make_optim({&w}, 0.1, 0.0);
    CHECK_THROWS_AS(sgd_step({&w}, {&bad_shape}, st), DimensionError);

    Tensor nan_grad = Tensor::of({std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(sgd_step({&w}, {&nan_grad}, st), DivergenceError);

    CHECK_THROWS_AS(make_optim({&w}, -1.0, 0.0), InputError);
    CHECK_THROWS_AS(make_optim({&w}, 0.1, 1.0), InputError);
}

TEST_CASE("grad_check on a quadratic toy loss", "[optim]") {
    Rng rng(99);
    Tensor w = Tensor::vec(10);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-2, 2);
    auto loss = [&]() {
        double l = 0;
        for (std::size_t i = 0; i < w.size(); ++i) l += 0.5 * w[i] * w[i];
        return l;
    };
    Tensor analytic = w;
    GradCheckReport rep = grad_check({&w}, loss, {&analytic}, 0, 1);
    CHECK(rep.max_rel_error < 1e-9);
    CHECK(rep.probes == 10);
}

TEST_CASE("grad_check flags a corrupted gradient", "[optim]") {
    Rng rng(98);
    Tensor w = Tensor::vec(5);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(1.0, 2.0);
    auto loss = [&]() {
        double l = 0;
        for (std::size_t i = 0; i < w.size(); ++i) l += 0.5 * w[i] * w[i];
        return l;
    };
    Tensor corrupted = w;
    scale_inplace(corrupted, 2.0);
    GradCheckReport rep = grad_check({&w}, loss, {&corrupted}, 0, 1);
    CHECK(rep.max_rel_error > 0.3);
}
