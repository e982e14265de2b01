#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "crashsev/errors.hpp"

namespace crashsev {

// Dense row-major 2-D array of doubles. The unit of all numeric computation.
// `grad` is an optional same-shape buffer, empty until a backward pass (or a
// caller) allocates it.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<double> grad;  // empty or rows*cols

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c, 0.0); }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> data) {
        Tensor t;
        t.rows = data.size();
        t.cols = t.rows ? data.begin()->size() : 0;
        t.values.reserve(t.rows * t.cols);
        for (const auto& row : data) {
            if (row.size() != t.cols) throw ShapeError("ragged initializer for Tensor");
            t.values.insert(t.values.end(), row.begin(), row.end());
        }
        return t;
    }

    static Tensor row_vector(std::vector<double> v) {
        Tensor t;
        t.rows = 1;
        t.cols = v.size();
        t.values = std::move(v);
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    std::size_t size() const { return rows * cols; }

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    double* row_ptr(std::size_t r) { return values.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return values.data() + r * cols; }

    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void ensure_grad() {
        if (grad.size() != size()) grad.assign(size(), 0.0);
    }
    bool has_grad() const { return grad.size() == size() && size() > 0; }

    std::vector<double> row(std::size_t r) const {
        return std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                   values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    }
};

inline bool approx_equal(const Tensor& a, const Tensor& b, double tol) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (std::abs(a.values[i] - b.values[i]) > tol) return false;
    return true;
}

}  // namespace crashsev
