#pragma once

#include <cmath>
#include <functional>

#include "frobsia/common.hpp"

namespace frobsia {

/// Right-hand side of a state transported along a straight segment in R^n:
/// given the current ambient point x and state y, returns dy/ds where
/// x(s) = x0 + s*(x1 - x0), s in [0,1]. The segment direction is passed so
/// closed one-form integrands can contract with it directly.
using SegmentRhs = std::function<Vec(const Vec& x, const Vec& y, const Vec& dx_ds)>;

struct OdeOptions {
    double rel_tol = 1e-12;
    double abs_tol = 1e-14;
    long max_steps = 1000000;
};

namespace detail {
// Dormand-Prince 5(4) tableau.
inline constexpr double dp_c[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double dp_a[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
inline constexpr double dp_b5[7] = {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84, 0.0};
inline constexpr double dp_b4[7] = {5179.0 / 57600,  0.0,          7571.0 / 16695, 393.0 / 640,
                                    -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};
} // namespace detail

/// Transports `state` along the straight segment x0 -> x1 with adaptive
/// Dormand-Prince 5(4). Throws integration_error if the step controller
/// stalls or exceeds the step budget.
inline void integrate_segment(Vec& state, const Vec& x0, const Vec& x1, const SegmentRhs& rhs,
                              const OdeOptions& opt = {}) {
    const std::size_t n = state.size();
    Vec dir(x0.size());
    double seg_len = 0.0;
    for (std::size_t c = 0; c < x0.size(); ++c) {
        dir[c] = x1[c] - x0[c];
        seg_len += dir[c] * dir[c];
    }
    if (seg_len == 0.0) return;

    Vec x(x0.size());
    auto position = [&](double s) {
        for (std::size_t c = 0; c < x0.size(); ++c) x[c] = x0[c] + s * dir[c];
        return x;
    };

    double s = 0.0;
    double h = 0.1;
    Vec k[7];
    Vec ytmp(n), y5(n);
    long steps = 0;
    while (s < 1.0) {
        if (++steps > opt.max_steps) throw integration_error("step budget exhausted on a path segment");
        if (s + h > 1.0) h = 1.0 - s;
        for (int stage = 0; stage < 7; ++stage) {
            ytmp = state;
            for (int prev = 0; prev < stage; ++prev) {
                double a = detail::dp_a[stage][prev] * h;
                if (a == 0.0) continue;
                for (std::size_t i = 0; i < n; ++i) ytmp[i] += a * k[prev][i];
            }
            k[stage] = rhs(position(s + detail::dp_c[stage] * h), ytmp, dir);
        }
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double v5 = 0.0, v4 = 0.0;
            for (int stage = 0; stage < 7; ++stage) {
                v5 += detail::dp_b5[stage] * k[stage][i];
                v4 += detail::dp_b4[stage] * k[stage][i];
            }
            y5[i] = state[i] + h * v5;
            double scale = opt.abs_tol + opt.rel_tol * std::max(std::abs(state[i]), std::abs(y5[i]));
            double e = h * (v5 - v4) / scale;
            err = std::max(err, std::abs(e));
        }
        if (!std::isfinite(err)) throw integration_error("non-finite state during path integration");
        if (err <= 1.0) {
            s += h;
            state = y5;
        }
        double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::min(5.0, std::max(0.2, grow));
        if (h < 1e-14) throw integration_error("step size underflow during path integration");
    }
}

/// Transports `state` along a polyline (list of vertices, first = start).
inline void integrate_polyline(Vec& state, const std::vector<Vec>& vertices, const SegmentRhs& rhs,
                               const OdeOptions& opt = {}) {
    for (std::size_t seg = 0; seg + 1 < vertices.size(); ++seg)
        integrate_segment(state, vertices[seg], vertices[seg + 1], rhs, opt);
}

/// One classical RK4 step across an entire short segment, for tight loops
/// (transport along trajectory steps) where the segment is already tiny.
inline void rk4_segment(Vec& state, const Vec& x0, const Vec& x1, const SegmentRhs& rhs) {
    const std::size_t n = state.size();
    Vec dir(x0.size());
    for (std::size_t c = 0; c < x0.size(); ++c) dir[c] = x1[c] - x0[c];
    Vec xm(x0.size()), k1, k2, k3, k4, ytmp(n);
    for (std::size_t c = 0; c < x0.size(); ++c) xm[c] = 0.5 * (x0[c] + x1[c]);
    k1 = rhs(x0, state, dir);
    ytmp = state;
    for (std::size_t i = 0; i < n; ++i) ytmp[i] += 0.5 * k1[i];
    k2 = rhs(xm, ytmp, dir);
    ytmp = state;
    for (std::size_t i = 0; i < n; ++i) ytmp[i] += 0.5 * k2[i];
    k3 = rhs(xm, ytmp, dir);
    ytmp = state;
    for (std::size_t i = 0; i < n; ++i) ytmp[i] += k3[i];
    k4 = rhs(x1, ytmp, dir);
    for (std::size_t i = 0; i < n; ++i) state[i] += (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) / 6.0;
}

/// Axis-aligned polyline from a to b: change one coordinate at a time.
inline std::vector<Vec> axis_polyline(const Vec& a, const Vec& b) {
    std::vector<Vec> verts{a};
    Vec cur = a;
    for (std::size_t c = 0; c < a.size(); ++c) {
        if (cur[c] == b[c]) continue;
        cur[c] = b[c];
        verts.push_back(cur);
    }
    if (verts.size() == 1) verts.push_back(b);
    return verts;
}

/// Single straight segment from a to b; the alternate route for
/// path-independence diagnostics.
inline std::vector<Vec> diagonal_polyline(const Vec& a, const Vec& b) { return {a, b}; }

} // namespace frobsia
