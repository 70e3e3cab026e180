#pragma once

#include <cmath>

#include "frobsia/common.hpp"

namespace frobsia {

/// Dense row-major matrix, just large enough for the pointwise solves and
/// rank diagnostics this project needs (dimensions stay well under 100).
struct Matrix {
    std::size_t rows = 0, cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// LU factorization with partial pivoting.
class LuFactor {
public:
    explicit LuFactor(Matrix m) : lu_(std::move(m)), piv_(lu_.rows) {
        if (lu_.rows != lu_.cols) throw solve_error("LU requires a square matrix");
        const std::size_t n = lu_.rows;
        for (std::size_t i = 0; i < n; ++i) piv_[i] = i;
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t pivot = col;
            double best = std::abs(lu_.at(col, col));
            for (std::size_t r = col + 1; r < n; ++r) {
                double v = std::abs(lu_.at(r, col));
                if (v > best) {
                    best = v;
                    pivot = r;
                }
            }
            if (best == 0.0) throw solve_error("singular matrix in LU factorization");
            if (pivot != col) {
                for (std::size_t c = 0; c < n; ++c) std::swap(lu_.at(col, c), lu_.at(pivot, c));
                std::swap(piv_[col], piv_[pivot]);
            }
            for (std::size_t r = col + 1; r < n; ++r) {
                double f = lu_.at(r, col) / lu_.at(col, col);
                lu_.at(r, col) = f;
                for (std::size_t c = col + 1; c < n; ++c) lu_.at(r, c) -= f * lu_.at(col, c);
            }
        }
    }

    Vec solve(const Vec& rhs) const {
        const std::size_t n = lu_.rows;
        Vec y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = rhs[piv_[i]];
            for (std::size_t j = 0; j < i; ++j) acc -= lu_.at(i, j) * y[j];
            y[i] = acc;
        }
        for (std::size_t ii = n; ii-- > 0;) {
            double acc = y[ii];
            for (std::size_t j = ii + 1; j < n; ++j) acc -= lu_.at(ii, j) * y[j];
            y[ii] = acc / lu_.at(ii, ii);
        }
        return y;
    }

private:
    Matrix lu_;
    std::vector<std::size_t> piv_;
};

/// Singular values (descending) via one-sided Jacobi on the columns.
inline Vec singular_values(Matrix a) {
    if (a.rows < a.cols) {
        Matrix t(a.cols, a.rows);
        for (std::size_t i = 0; i < a.rows; ++i)
            for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
        a = std::move(t);
    }
    const std::size_t m = a.rows, n = a.cols;
    const double eps = 1e-15;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    app += a.at(i, p) * a.at(i, p);
                    aqq += a.at(i, q) * a.at(i, q);
                    apq += a.at(i, p) * a.at(i, q);
                }
                if (std::abs(apq) <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;
                double zeta = (aqq - app) / (2.0 * apq);
                double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    double vp = a.at(i, p), vq = a.at(i, q);
                    a.at(i, p) = c * vp - s * vq;
                    a.at(i, q) = s * vp + c * vq;
                }
            }
        if (!rotated) break;
    }
    Vec sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += a.at(i, j) * a.at(i, j);
        sv[j] = std::sqrt(acc);
    }
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

/// Numerical rank with a relative singular-value threshold.
inline int numerical_rank(const Vec& sv, double rel_threshold = 1e-8) {
    if (sv.empty()) return 0;
    double cut = rel_threshold * sv.front();
    int r = 0;
    for (double s : sv)
        if (s > cut) ++r;
    return r;
}

} // namespace frobsia
