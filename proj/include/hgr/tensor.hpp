#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "hgr/error.hpp"

namespace hgr {

// Dense row-major array of doubles with an explicit shape. Values are
// immutable by convention once an operation has produced them; all ops below
// are pure functions of their inputs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
        // an empty shape is the empty tensor, not a rank-0 scalar
        std::size_t n = shape_.empty() ? 0 : 1;
        for (std::size_t d : shape_) n *= d;
        data_.assign(n, 0.0);
    }

    static Tensor vec(std::size_t n) { return Tensor({n}); }

    static Tensor mat(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

    static Tensor of(std::initializer_list<double> values) {
        Tensor t({values.size()});
        std::size_t i = 0;
        for (double v : values) t.data_[i++] = v;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : (require_rank(2), 0); }
    std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : (require_rank(2), 0); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    void require_rank(std::size_t r) const {
        throw DimensionError("tensor of rank " + std::to_string(shape_.size()) +
                             " used where rank " + std::to_string(r) + " is required");
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape().size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape()[i]);
    }
    return s + "]";
}

inline void ensure_finite(const Tensor& t, const char* op) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i])) {
            throw DivergenceError(std::string(op) + " produced a non-finite value at index " +
                                  std::to_string(i));
        }
    }
}

inline void check_same_length(const Tensor& a, const Tensor& b, const char* op) {
    if (a.size() != b.size() || a.rank() != 1 || b.rank() != 1) {
        throw DimensionError(std::string(op) + ": length mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
    }
}

// ---------------------------------------------------------------------------
// Forward operations. Each has an exact reverse-mode counterpart below.
// ---------------------------------------------------------------------------

// y = W x for a rows x cols matrix and a cols vector.
inline Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.rank() != 2 || x.rank() != 1 || w.cols() != x.size()) {
        throw DimensionError("matvec: incompatible shapes " + shape_str(w) + " and " +
                             shape_str(x));
    }
    Tensor y = Tensor::vec(w.rows());
    const double* wp = w.data();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        const double* row = wp + i * w.cols();
        for (std::size_t j = 0; j < w.cols(); ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    ensure_finite(y, "matvec");
    return y;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_length(a, b, "hadamard");
    Tensor c = Tensor::vec(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
    ensure_finite(c, "hadamard");
    return c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_length(a, b, "add");
    Tensor c = Tensor::vec(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    ensure_finite(c, "add");
    return c;
}

// Numerically stable logistic sigmoid, branch chosen by the sign of the
// input so exp never overflows.
inline double sigmoid_scalar(double v) {
    if (v >= 0.0) {
        double z = std::exp(-v);
        return 1.0 / (1.0 + z);
    }
    double z = std::exp(v);
    return z / (1.0 + z);
}

inline Tensor sigmoid(const Tensor& v) {
    Tensor y = Tensor::vec(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = sigmoid_scalar(v[i]);
    return y;
}

inline Tensor tanh_act(const Tensor& v) {
    Tensor y = Tensor::vec(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) y[i] = std::tanh(v[i]);
    return y;
}

// ---------------------------------------------------------------------------
// Reverse contracts. Parameter gradients accumulate into the provided
// tensors so BPTT can sum across timesteps; initialize them to zero to get
// the plain gradient.
// ---------------------------------------------------------------------------

// Given dL/dy: dL/dW += dy (x) x  (outer product), dL/dx += W^T dy.
inline void matvec_backward(const Tensor& w, const Tensor& x, const Tensor& dy, Tensor& dw,
                            Tensor& dx) {
    if (!dw.same_shape(w) || !dx.same_shape(x) || dy.size() != w.rows()) {
        throw DimensionError("matvec_backward: gradient shapes do not match operands");
    }
    double* dwp = dw.data();
    const double* wp = w.data();
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double g = dy[i];
        double* drow = dwp + i * w.cols();
        const double* row = wp + i * w.cols();
        for (std::size_t j = 0; j < w.cols(); ++j) {
            drow[j] += g * x[j];
            dx[j] += row[j] * g;
        }
    }
}

inline void hadamard_backward(const Tensor& a, const Tensor& b, const Tensor& dc, Tensor& da,
                              Tensor& db) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        da[i] += dc[i] * b[i];
        db[i] += dc[i] * a[i];
    }
}

// dv = dy . y . (1 - y), expressed through the forward output.
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& dy) {
    Tensor dv = Tensor::vec(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dv[i] = dy[i] * y[i] * (1.0 - y[i]);
    return dv;
}

// dv = dy . (1 - y^2).
inline Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
    Tensor dv = Tensor::vec(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dv[i] = dy[i] * (1.0 - y[i] * y[i]);
    return dv;
}

// ---------------------------------------------------------------------------
// Small in-place helpers used by the training code.
// ---------------------------------------------------------------------------

inline void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("add_inplace: shape mismatch " + shape_str(a) + " vs " +
                             shape_str(b));
    }
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

inline void scale_inplace(Tensor& a, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

inline void fill(Tensor& a, double v) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = v;
}

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

}  // namespace hgr
