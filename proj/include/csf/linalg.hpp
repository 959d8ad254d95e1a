#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "csf/common.hpp"

namespace csf {

/// Dense row-major double matrix used by the classical filtering numerics.
/// Neural-network tensors live in csf::ad; this type is deliberately plain.
class Matrix {
   public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const {
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }
    double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::vector<double> col_mean() const {
        std::vector<double> m(cols_, 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) m[c] += (*this)(r, c);
        for (auto& v : m) v /= rows_ > 0 ? rows_ : 1;
        return m;
    }

    /// Per-column biased (divide-by-N) variance.
    std::vector<double> col_var() const {
        std::vector<double> mu = col_mean();
        std::vector<double> v(cols_, 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) {
                const double d = (*this)(r, c) - mu[c];
                v[c] += d * d;
            }
        for (auto& x : v) x /= rows_ > 0 ? rows_ : 1;
        return v;
    }

   private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Solves A x = b for symmetric positive definite A (in place Cholesky).
/// Returns false if the factorization breaks down.
inline bool cholesky_solve(Matrix a, std::vector<double> b, std::vector<double>& x) {
    const int n = a.rows();
    if (a.cols() != n || static_cast<int>(b.size()) != n) throw ShapeError("cholesky_solve: shape");
    // Factor A = L L^T.
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / ljj;
        }
    }
    // Forward then backward substitution.
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= a(i, k) * b[k];
        b[i] = s / a(i, i);
    }
    x.assign(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= a(k, i) * x[k];
        x[i] = s / a(i, i);
    }
    return true;
}

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v)
        if (x > m) m = x;
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace csf
