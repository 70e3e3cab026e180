#pragma once

#include "frobsia/ode.hpp"
#include "frobsia/report.hpp"
#include "frobsia/structures.hpp"

namespace frobsia {

// ---------------------------------------------------------------------------
// Pointwise residuals
// ---------------------------------------------------------------------------

namespace detail {

struct PointWorst {
    double value = 0.0;
    std::string component;
};

/// Runs `per_point` over the samples in parallel and reduces the worst
/// residual in index order, so reports do not depend on the thread count.
template <class F>
AxiomReport reduce_over_points(std::string axiom, const std::vector<Vec>& pts, double tol, F&& per_point) {
    std::vector<PointWorst> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { worst[i] = per_point(pts[i]); });
    ResidualTracker tracker;
    for (std::size_t i = 0; i < pts.size(); ++i) tracker.update(worst[i].value, pts[i], worst[i].component);
    return tracker.finish(std::move(axiom), tol, pts);
}

} // namespace detail

/// Associativity residual: max over points and index quadruples of
/// |sum_a P_ija P_akl - sum_a P_jka P_ail|.
inline AxiomReport check_wdvv(const ProductStructure& p, const std::vector<Vec>& pts, double tol) {
    int n = p.dim();
    return detail::reduce_over_points("wdvv", pts, tol, [&](const Vec& x) {
        PointTensor pv = p.P().eval_stack(x, 0)[0];
        detail::PointWorst w;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double lhs = 0.0, rhs = 0.0;
                        for (int a = 0; a < n; ++a) {
                            lhs += pv.at({i, j, a}) * pv.at({a, k, l});
                            rhs += pv.at({j, k, a}) * pv.at({a, i, l});
                        }
                        double r = std::abs(lhs - rhs);
                        if (r > w.value) w = {r, index_label({i, j, k, l})};
                    }
        return w;
    });
}

/// Levi-Civita compatibility residual: max |d_l P_ijk - sum_a P_lia P_ajk|.
inline AxiomReport check_nabla_compat(const ProductStructure& p, const std::vector<Vec>& pts, double tol) {
    int n = p.dim();
    return detail::reduce_over_points("nabla_compat", pts, tol, [&](const Vec& x) {
        auto stack = p.P().eval_stack(x, 1);
        const PointTensor& pv = stack[0];
        const PointTensor& dp = stack[1];
        detail::PointWorst w;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = j; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double rhs = 0.0;
                        for (int a = 0; a < n; ++a) rhs += pv.at({l, i, a}) * pv.at({a, j, k});
                        double r = std::abs(dp.at({i, j, k, l}) - rhs);
                        if (r > w.value) w = {r, index_label({i, j, k, l})};
                    }
        return w;
    });
}

/// Closedness of the product trace: antisymmetric residual |d_i tau_j - d_j tau_i|
/// plus the symmetric residual |d_j tau_i - scrP_ij| (scrP_ij = sum_ab P_iab P_jab),
/// which vanishes whenever the connection compatibility holds.
inline AxiomReport check_trace_closed(const ProductStructure& p, const std::vector<Vec>& pts, double tol) {
    int n = p.dim();
    struct TraceWorst {
        detail::PointWorst anti, sym;
    };
    std::vector<TraceWorst> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t pi) {
        const Vec& x = pts[pi];
        auto stack = p.P().eval_stack(x, 1);
        const PointTensor& pv = stack[0];
        const PointTensor& dp = stack[1];
        // dtau[i][j] = d_j tau_i
        PointTensor dtau(n, 2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int a = 0; a < n; ++a) acc += dp.at({a, a, i, j});
                dtau.at({i, j}) = acc;
            }
        TraceWorst w;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double anti = std::abs(dtau.at({i, j}) - dtau.at({j, i}));
                if (anti > w.anti.value) w.anti = {anti, index_label({i, j})};
                double scr = 0.0;
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) scr += pv.at({i, a, b}) * pv.at({j, a, b});
                double sym = std::abs(dtau.at({i, j}) - scr);
                if (sym > w.sym.value) w.sym = {sym, index_label({i, j})};
            }
        worst[pi] = w;
    });
    ResidualTracker anti, sym;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        anti.update(worst[i].anti.value, pts[i], worst[i].anti.component);
        sym.update(worst[i].sym.value, pts[i], worst[i].sym.component);
    }
    AxiomReport r = anti.finish("trace_closed", tol, pts);
    r.extras.emplace_back("dtau_antisymmetric", anti.worst());
    r.extras.emplace_back("dtau_vs_scrP", sym.worst());
    return r;
}

// ---------------------------------------------------------------------------
// Potential recovery
// ---------------------------------------------------------------------------

/// Jet record of the potential along a path endpoint: the gauge fixes
/// (Phi, dPhi, d2Phi) = 0 at the basepoint, and d3Phi = P is the transport law.
struct PotentialRecord {
    Vec basepoint;
    Vec endpoint;
    double value = 0.0;
    Vec grad;
    PointTensor hess;
    double path_residual = 0.0; // axis route vs straight route, max state diff
};

namespace detail {

inline std::size_t vech_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    // row-major upper triangle
    return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
}

inline SegmentRhs potential_rhs(const ProductStructure& p) {
    int n = p.dim();
    return [&p, n](const Vec& x, const Vec& y, const Vec& dir) {
        PointTensor pv = p.P().eval_stack(x, 0)[0];
        Vec dy(y.size(), 0.0);
        // y = [Phi, dPhi (n), vech d2Phi]
        for (int a = 0; a < n; ++a) dy[0] += y[1 + static_cast<std::size_t>(a)] * dir[static_cast<std::size_t>(a)];
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int a = 0; a < n; ++a)
                acc += y[1 + static_cast<std::size_t>(n) + vech_index(i, a, n)] * dir[static_cast<std::size_t>(a)];
            dy[1 + static_cast<std::size_t>(i)] = acc;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double acc = 0.0;
                for (int a = 0; a < n; ++a) acc += pv.at({i, j, a}) * dir[static_cast<std::size_t>(a)];
                dy[1 + static_cast<std::size_t>(n) + vech_index(i, j, n)] = acc;
            }
        return dy;
    };
}

inline PotentialRecord potential_record_from_state(const ProductStructure& p, const Vec& basepoint, const Vec& y,
                                                   const Vec& endpoint) {
    int n = p.dim();
    PotentialRecord rec;
    rec.basepoint = basepoint;
    rec.endpoint = endpoint;
    rec.value = y[0];
    rec.grad.assign(y.begin() + 1, y.begin() + 1 + n);
    rec.hess = PointTensor(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            rec.hess.at({i, j}) = y[1 + static_cast<std::size_t>(n) + vech_index(i, j, n)];
    return rec;
}

} // namespace detail

/// Integrates (Phi, dPhi, d2Phi) from zero initial data at the basepoint along
/// the given polyline; the path-independence diagnostic reruns the transport
/// along the straight segment to the same endpoint.
inline PotentialRecord recover_potential(const ProductStructure& p, const Vec& basepoint,
                                         const std::vector<Vec>& polyline, const OdeOptions& opt = {}) {
    int n = p.dim();
    if (polyline.empty() || polyline.front() != basepoint)
        throw schema_error("potential path must start at the basepoint");
    Vec y(static_cast<std::size_t>(1 + n + n * (n + 1) / 2), 0.0);
    auto rhs = detail::potential_rhs(p);
    integrate_polyline(y, polyline, rhs, opt);

    Vec alt(y.size(), 0.0);
    integrate_polyline(alt, diagonal_polyline(basepoint, polyline.back()), rhs, opt);
    double residual = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) residual = std::max(residual, std::abs(y[i] - alt[i]));

    PotentialRecord rec = detail::potential_record_from_state(p, basepoint, y, polyline.back());
    rec.path_residual = residual;
    return rec;
}

/// Axis-aligned route from basepoint to target with the standard diagnostics.
inline PotentialRecord potential_state_at(const ProductStructure& p, const Vec& basepoint, const Vec& target,
                                          const OdeOptions& opt = {}) {
    return recover_potential(p, basepoint, axis_polyline(basepoint, target), opt);
}

// ---------------------------------------------------------------------------
// Hessian structure checks
// ---------------------------------------------------------------------------

/// Curvature residual of the connection with Christoffel symbols sign * P:
/// max |d_i G^a_jk - d_j G^a_ik + sum_b (G^a_ib G^b_jk - G^a_jb G^b_ik)|.
inline AxiomReport check_hessian_flatness(const ProductStructure& p, const std::vector<Vec>& pts, double tol,
                                          int sign) {
    int n = p.dim();
    std::string axiom = sign >= 0 ? "hessian_flatness_plus" : "hessian_flatness_minus";
    double s = sign >= 0 ? 1.0 : -1.0;
    return detail::reduce_over_points(std::move(axiom), pts, tol, [&, s](const Vec& x) {
        auto stack = p.P().eval_stack(x, 1);
        const PointTensor& pv = stack[0];
        const PointTensor& dp = stack[1];
        detail::PointWorst w;
        for (int a = 0; a < n; ++a)
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        double curv = s * (dp.at({j, k, a, i}) - dp.at({i, k, a, j}));
                        for (int b = 0; b < n; ++b)
                            curv += s * s * (pv.at({i, b, a}) * pv.at({j, k, b}) - pv.at({j, b, a}) * pv.at({i, k, b}));
                        double r = std::abs(curv);
                        if (r > w.value) w = {r, index_label({a, i, j, k})};
                    }
        return w;
    });
}

/// Verifies the Hessian-potential identity: with the connection D whose
/// Christoffel symbols are -P and the potential regauged so that
/// (dPhi, d2Phi)(x0) = (0, -g), the full covariant third derivative satisfies
/// D^3 Phi = -2P at every sample point.
inline AxiomReport check_hessian_potential(const ProductStructure& p, const Vec& basepoint,
                                           const std::vector<Vec>& pts, double tol, const OdeOptions& opt = {}) {
    int n = p.dim();
    return detail::reduce_over_points("hessian_potential", pts, tol, [&](const Vec& x) {
        PotentialRecord rec = potential_state_at(p, basepoint, x, opt);
        // regauge by the quadratic -|x - x0|^2 / 2
        Vec phi_a = rec.grad;
        for (int c = 0; c < n; ++c) phi_a[static_cast<std::size_t>(c)] -= (x[static_cast<std::size_t>(c)] - basepoint[static_cast<std::size_t>(c)]);
        PointTensor phi_ab = rec.hess;
        for (int c = 0; c < n; ++c) phi_ab.at({c, c}) -= 1.0;

        auto stack = p.P().eval_stack(x, 1);
        const PointTensor& pv = stack[0];
        const PointTensor& dp = stack[1];
        detail::PointWorst w;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    // D^3 Phi with Gamma = -P; the third plain derivative of the
                    // transported potential is P itself.
                    double d3 = pv.at({i, j, k});
                    for (int a = 0; a < n; ++a) {
                        d3 += dp.at({i, j, a, k}) * phi_a[static_cast<std::size_t>(a)];
                        d3 += pv.at({i, j, a}) * phi_ab.at({a, k});
                        d3 += pv.at({k, i, a}) * phi_ab.at({a, j});
                        d3 += pv.at({k, j, a}) * phi_ab.at({i, a});
                        for (int b = 0; b < n; ++b)
                            d3 += (pv.at({k, i, a}) * pv.at({a, j, b}) + pv.at({k, j, a}) * pv.at({i, a, b})) *
                                  phi_a[static_cast<std::size_t>(b)];
                    }
                    double r = std::abs(d3 + 2.0 * pv.at({i, j, k}));
                    if (r > w.value) w = {r, index_label({i, j, k})};
                }
        return w;
    });
}

/// Full product-side axiom suite.
struct ProductSuite {
    AxiomReport wdvv;
    AxiomReport nabla_compat;
    AxiomReport trace_closed;
    AxiomReport flatness_plus;
    AxiomReport flatness_minus;
    bool pass() const {
        return wdvv.pass && nabla_compat.pass && trace_closed.pass && flatness_plus.pass && flatness_minus.pass;
    }
};

inline ProductSuite run_product_suite(const ProductStructure& p, const std::vector<Vec>& pts, double tol) {
    ProductSuite s{check_wdvv(p, pts, tol), check_nabla_compat(p, pts, tol), check_trace_closed(p, pts, tol),
                   check_hessian_flatness(p, pts, tol, +1), check_hessian_flatness(p, pts, tol, -1)};
    return s;
}

} // namespace frobsia
