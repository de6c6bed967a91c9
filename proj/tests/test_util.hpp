#pragma once

#include "sapt/forecast.hpp"
#include "sapt/scapm.hpp"
#include "sapt/simulate.hpp"

#include <algorithm>
#include <numeric>

#include <random>
#include <string>
#include <vector>

namespace sapt::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sd);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
    }
    return m;
}

inline Matrix centered(Matrix m) {
    m.rowwise() -= m.colwise().mean();
    return m;
}

/// (1/T) sum_{t=k+1}^T a_t b_{t-k}' by explicit loops.
inline Matrix loop_lag_cov(const Matrix& a, const Matrix& b, int k) {
    const Eigen::Index T = a.rows();
    Matrix out = Matrix::Zero(a.cols(), b.cols());
    for (Eigen::Index p = 0; p < a.cols(); ++p) {
        for (Eigen::Index q = 0; q < b.cols(); ++q) {
            double s = 0.0;
            for (Eigen::Index t = k; t < T; ++t) s += a(t, p) * b(t - k, q);
            out(p, q) = s / static_cast<double>(T);
        }
    }
    return out;
}

/// Solves A x = b by Gaussian elimination with full pivoting, written out by hand.
inline Vector full_pivot_solve(Matrix A, Vector b) {
    const Eigen::Index n = A.rows();
    std::vector<Eigen::Index> col(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) col[static_cast<size_t>(i)] = i;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index pr = k, pc = k;
        double best = 0.0;
        for (Eigen::Index i = k; i < n; ++i) {
            for (Eigen::Index j = k; j < n; ++j) {
                if (std::abs(A(i, j)) > best) {
                    best = std::abs(A(i, j));
                    pr = i;
                    pc = j;
                }
            }
        }
        A.row(k).swap(A.row(pr));
        std::swap(b(k), b(pr));
        A.col(k).swap(A.col(pc));
        std::swap(col[static_cast<size_t>(k)], col[static_cast<size_t>(pc)]);
        for (Eigen::Index i = k + 1; i < n; ++i) {
            const double m = A(i, k) / A(k, k);
            for (Eigen::Index j = k; j < n; ++j) A(i, j) -= m * A(k, j);
            b(i) -= m * b(k);
        }
    }
    Vector z(n);
    for (Eigen::Index i = n - 1; i >= 0; --i) {
        double s = b(i);
        for (Eigen::Index j = i + 1; j < n; ++j) s -= A(i, j) * z(j);
        z(i) = s / A(i, i);
    }
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(col[static_cast<size_t>(i)]) = z(i);
    return x;
}

/// (X'X + lambda I)^{-1} X'Y through the hand-coded eliminator.
inline Vector normal_equations(const Matrix& X, const Vector& Y, double lambda) {
    const Matrix A = X.transpose() * X + lambda * Matrix::Identity(X.cols(), X.cols());
    return full_pivot_solve(A, X.transpose() * Y);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Collected warnings (installed by the test main).
std::vector<std::string>& captured_warnings();

}  // namespace sapt::test
