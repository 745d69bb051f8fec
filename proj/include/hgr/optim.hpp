#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hgr/error.hpp"
#include "hgr/rng.hpp"
#include "hgr/tensor.hpp"

namespace hgr {

// Classical (heavy-ball) momentum: v <- mu v - lr g; w <- w + v.
struct OptimState {
    double lr = 0.00001;
    double momentum = 0.9;
    std::vector<Tensor> velocity;
};

inline OptimState make_optim(const std::vector<Tensor*>& params, double lr, double momentum) {
    if (!(lr > 0.0)) throw InputError("make_optim: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw InputError("make_optim: momentum must be in [0, 1)");
    }
    OptimState st;
    st.lr = lr;
    st.momentum = momentum;
    st.velocity.reserve(params.size());
    for (const Tensor* p : params) st.velocity.push_back(zeros_like(*p));
    return st;
}

inline void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                     OptimState& st) {
    if (params.size() != grads.size() || params.size() != st.velocity.size()) {
        throw DimensionError("sgd_step: parameter, gradient and velocity counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i];
        const Tensor& g = *grads[i];
        Tensor& v = st.velocity[i];
        if (!w.same_shape(g) || !w.same_shape(v)) {
            throw DimensionError("sgd_step: shape mismatch at tensor " + std::to_string(i) +
                                 ": param " + shape_str(w) + ", grad " + shape_str(g));
        }
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw DivergenceError("sgd_step: non-finite gradient in tensor " +
                                      std::to_string(i));
            }
            v[j] = st.momentum * v[j] - st.lr * g[j];
            w[j] += v[j];
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

struct GradCheckReport {
    // raw metric: |a - n| / max(|a|, |n|, floor) over every probe
    double max_rel_error = 0.0;
    // same metric with the floor applied as an absolute criterion: probes
    // whose |a - n| <= floor count as matching. Central differences of an
    // O(1) loss carry ~1e-10 of rounding noise, so near-zero gradients can
    // never agree to floor * tolerance; this is the number to gate on.
    double max_guarded_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t probes = 0;
};

// Compares analytic gradients against central differences of loss_fn, which
// must evaluate the loss at the parameters' current values. probe_count
// coordinates per tensor are drawn from the seed; probe_count = 0 checks
// every coordinate. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckReport grad_check(const std::vector<Tensor*>& params,
                                  const std::function<double()>& loss_fn,
                                  const std::vector<const Tensor*>& analytic,
                                  std::size_t probe_count, std::uint64_t seed,
                                  double step = 1e-5, double floor = 1e-8) {
    if (params.size() != analytic.size()) {
        throw DimensionError("grad_check: parameter and gradient counts differ");
    }
    Rng rng(seed);
    GradCheckReport report;
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        Tensor& w = *params[ti];
        const Tensor& g = *analytic[ti];
        if (!w.same_shape(g)) {
            throw DimensionError("grad_check: gradient shape mismatch at tensor " +
                                 std::to_string(ti));
        }
        const std::size_t n = w.size();
        if (n == 0) continue;
        const std::size_t count = probe_count == 0 ? n : probe_count;
        for (std::size_t p = 0; p < count; ++p) {
            const std::size_t j = probe_count == 0 ? p : static_cast<std::size_t>(rng.below(n));
            const double saved = w[j];
            w[j] = saved + step;
            const double up = loss_fn();
            w[j] = saved - step;
            const double down = loss_fn();
            w[j] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw DivergenceError("grad_check: non-finite loss at perturbed point (tensor " +
                                      std::to_string(ti) + ", index " + std::to_string(j) + ")");
            }
            const double numeric = (up - down) / (2.0 * step);
            const double abs_diff = std::abs(g[j] - numeric);
            const double rel =
                abs_diff / std::max({std::abs(g[j]), std::abs(numeric), floor});
            const double guarded = abs_diff <= floor ? 0.0 : rel;
            ++report.probes;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            if (guarded > report.max_guarded_error) {
                report.max_guarded_error = guarded;
                report.worst_tensor = ti;
                report.worst_index = j;
                report.worst_analytic = g[j];
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace hgr
