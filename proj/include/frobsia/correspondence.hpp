#pragma once

#include <optional>

#include "frobsia/abundant_checks.hpp"
#include "frobsia/ode.hpp"
#include "frobsia/product_checks.hpp"
#include "frobsia/report.hpp"
#include "frobsia/structures.hpp"

namespace frobsia {

// ---------------------------------------------------------------------------
// product -> abundant
// ---------------------------------------------------------------------------

struct CorrespondenceOptions {
    std::uint64_t seed = 0x5eedf00dull;
    int validation_points = 20;
    double recognition_tol = 1e-9; // relative, for closed-form recognition of t
    OdeOptions ode{};
};

struct CorrespondenceResult {
    AbundantStructure structure;
    Vec t_basepoint;
    double t_gauge = 0.0;            // t value at the basepoint (fixed to 0)
    bool t_closed_form = false;
    double t_path_residual = 0.0;    // two-route disagreement of the t integral
    double dt_match_residual = 0.0;  // dt of the emitted structure vs -3/(n+2) tau
    // sampled t table for consumers when no closed form was recognized
    std::vector<Vec> sampled_points;
    Vec sampled_values;
};

namespace detail {

/// Tries to recognize tau_k as a_k (constant) or c_k / x^k; returns the
/// closed form of its antiderivative contribution or nothing.
struct TauTerm {
    enum class Kind { Constant, OverX } kind;
    double coeff;
};

inline std::optional<TauTerm> recognize_tau_component(const ScalarFieldExpr& tau_k, int k, const DomainBox& box,
                                                      SplitMix64& rng, double tol) {
    // probe along coordinate k and along the other coordinates
    Vec base = box.center();
    auto at_xk = [&](double xk) {
        Vec x = base;
        x[static_cast<std::size_t>(k)] = xk;
        return tau_k.value_at(x);
    };
    double lo = box.intervals[static_cast<std::size_t>(k)].first;
    double hi = box.intervals[static_cast<std::size_t>(k)].second;
    double q1 = lo + 0.3 * (hi - lo), q2 = lo + 0.55 * (hi - lo), q3 = lo + 0.8 * (hi - lo);
    double v1 = at_xk(q1), v2 = at_xk(q2), v3 = at_xk(q3);
    double scale = std::max({std::abs(v1), std::abs(v2), std::abs(v3), 1e-30});

    std::optional<TauTerm> guess;
    if (std::abs(v1 - v2) <= tol * scale && std::abs(v2 - v3) <= tol * scale) {
        guess = TauTerm{TauTerm::Kind::Constant, v2};
    } else if (std::abs(v1 * q1 - v2 * q2) <= tol * scale * std::abs(q2) &&
               std::abs(v2 * q2 - v3 * q3) <= tol * scale * std::abs(q3)) {
        guess = TauTerm{TauTerm::Kind::OverX, v2 * q2};
    }
    if (!guess) return std::nullopt;

    // validate on random box points (also catches dependence on other coords)
    for (int rep = 0; rep < 8; ++rep) {
        Vec x = box.sample(rng, 0.1);
        double want = guess->kind == TauTerm::Kind::Constant ? guess->coeff
                                                             : guess->coeff / x[static_cast<std::size_t>(k)];
        double got = tau_k.value_at(x);
        if (std::abs(got - want) > tol * std::max(1.0, std::abs(want))) return std::nullopt;
    }
    return guess;
}

} // namespace detail

/// The forward correspondence map. S = -3 * (trace-free part of P) is emitted
/// as closed-form component expressions; t integrates dt = -3/(n+2) tr(P^)
/// from the basepoint with gauge t(basepoint) = 0. When every trace component
/// is recognized as a constant or c/x^k, t is emitted in closed form; the
/// numeric path integral is the general fallback, in which case the structure
/// carries the dt components (always closed-form) and a sampled t table.
inline CorrespondenceResult product_to_abundant(const ProductStructure& p, const Vec& basepoint,
                                                const CorrespondenceOptions& opt = {}) {
    int n = p.dim();
    double trace_factor = 3.0 / (n + 2.0);

    std::vector<ScalarFieldExpr> tau = p.trace_exprs();

    // S components: -3 P_ijk + (d_ij w_k + d_jk w_i + d_ki w_j), w = 3 tau/(n+2)
    std::vector<ScalarFieldExpr> w_exprs;
    w_exprs.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) w_exprs.push_back(trace_factor * tau[static_cast<std::size_t>(k)]);

    AbundantStructure a(n, p.box());
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int k = j; k < n; ++k) {
                ScalarFieldExpr s = -3.0 * p.P().get(i, j, k);
                if (i == j) s = s + w_exprs[static_cast<std::size_t>(k)];
                if (j == k) s = s + w_exprs[static_cast<std::size_t>(i)];
                if (k == i) s = s + w_exprs[static_cast<std::size_t>(j)];
                a.S().set(i, j, k, s);
            }

    // dt_k = -3/(n+2) tau_k, always closed-form
    std::vector<ScalarFieldExpr> dt_exprs;
    dt_exprs.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) dt_exprs.push_back(-trace_factor * tau[static_cast<std::size_t>(k)]);

    CorrespondenceResult res;
    res.t_basepoint = basepoint;

    // closed-form recognition of t coordinate by coordinate
    SplitMix64 rng(opt.seed);
    std::vector<detail::TauTerm> terms;
    bool recognized = true;
    for (int k = 0; k < n && recognized; ++k) {
        auto term = detail::recognize_tau_component(tau[static_cast<std::size_t>(k)], k, p.box(), rng,
                                                    opt.recognition_tol);
        if (term)
            terms.push_back(*term);
        else
            recognized = false;
    }

    if (recognized) {
        // t = sum_k -3/(n+2) * (a_k x^k  or  c_k log x^k), shifted to vanish
        // at the basepoint
        ScalarFieldExpr t = ScalarFieldExpr::zero(n);
        for (int k = 0; k < n; ++k) {
            double c = -trace_factor * terms[static_cast<std::size_t>(k)].coeff;
            if (c == 0.0) continue;
            ScalarFieldExpr xk = ScalarFieldExpr::coordinate(n, k);
            if (terms[static_cast<std::size_t>(k)].kind == detail::TauTerm::Kind::Constant)
                t = t + c * xk;
            else
                t = t + c * ScalarFieldExpr::parse("log(x" + std::to_string(k + 1) + ")", n);
        }
        double shift = t.value_at(basepoint);
        if (shift != 0.0) t = t - ScalarFieldExpr::constant(n, shift);
        a.t() = TPotential::closed_form(t);
        res.t_closed_form = true;

        // cross-check the recognized closed form against dt at random points
        double worst = 0.0;
        for (int rep = 0; rep < opt.validation_points; ++rep) {
            Vec x = p.box().sample(rng, 0.1);
            for (int k = 0; k < n; ++k) {
                double want = dt_exprs[static_cast<std::size_t>(k)].value_at(x);
                double got = a.t().grad_exprs()[static_cast<std::size_t>(k)].value_at(x);
                worst = std::max(worst, std::abs(got - want));
            }
        }
        res.dt_match_residual = worst;
    } else {
        a.t() = TPotential::gradient_only(dt_exprs);
        res.dt_match_residual = 0.0; // dt is the defining expression here
    }

    // path-independence diagnostic of the t integral towards a far target,
    // and the sampled table for the numeric fallback
    auto t_rhs = [&dt_exprs, n](const Vec& x, const Vec&, const Vec& dir) {
        Vec dy(1, 0.0);
        for (int k = 0; k < n; ++k) dy[0] += dt_exprs[static_cast<std::size_t>(k)].value_at(x) * dir[static_cast<std::size_t>(k)];
        return dy;
    };
    SplitMix64 rng2(opt.seed ^ 0x9e3779b9ull);
    Vec target = p.box().sample(rng2, 0.2);
    Vec ta(1, 0.0), tb(1, 0.0);
    integrate_polyline(ta, axis_polyline(basepoint, target), t_rhs, opt.ode);
    integrate_polyline(tb, diagonal_polyline(basepoint, target), t_rhs, opt.ode);
    res.t_path_residual = std::abs(ta[0] - tb[0]);

    if (!res.t_closed_form) {
        for (int rep = 0; rep < 8; ++rep) {
            Vec x = p.box().sample(rng2, 0.1);
            Vec ty(1, 0.0);
            integrate_polyline(ty, axis_polyline(basepoint, x), t_rhs, opt.ode);
            res.sampled_points.push_back(x);
            res.sampled_values.push_back(ty[0]);
        }
    }

    res.structure = std::move(a);
    return res;
}

// ---------------------------------------------------------------------------
// abundant -> product
// ---------------------------------------------------------------------------

/// The reverse correspondence map: P = -(1/3) S - Pi_Sym3 g (x) dt, emitted
/// as closed-form component expressions (dt components are exact symbolic
/// derivatives when t is closed-form).
inline ProductStructure abundant_to_product(const AbundantStructure& a) {
    int n = a.dim();
    const auto& dt = a.t().grad_exprs();
    ProductStructure p(n, a.box());
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int k = j; k < n; ++k) {
                ScalarFieldExpr e = (-1.0 / 3.0) * a.S().get(i, j, k);
                if (i == j) e = e + (-1.0 / 3.0) * dt[static_cast<std::size_t>(k)];
                if (j == k) e = e + (-1.0 / 3.0) * dt[static_cast<std::size_t>(i)];
                if (k == i) e = e + (-1.0 / 3.0) * dt[static_cast<std::size_t>(j)];
                p.P().set(i, j, k, e);
            }
    return p;
}

// ---------------------------------------------------------------------------
// Roundtrips
// ---------------------------------------------------------------------------

/// product -> abundant -> product; residual is the max component difference
/// over the sample points. Exactness rests on the decomposition
/// P = (trace-free part) + Pi_Sym3(g (x) 3 tau/(n+2)).
inline AxiomReport roundtrip_check(const ProductStructure& p, const Vec& basepoint, const std::vector<Vec>& pts,
                                   double tol, const CorrespondenceOptions& opt = {}) {
    CorrespondenceResult fwd = product_to_abundant(p, basepoint, opt);
    ProductStructure back = abundant_to_product(fwd.structure);
    int n = p.dim();
    ResidualTracker tracker;
    for (const Vec& x : pts) {
        PointTensor orig = p.P().eval_stack(x, 0)[0];
        PointTensor rec = back.P().eval_stack(x, 0)[0];
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = j; k < n; ++k)
                    tracker.update(orig.at({i, j, k}) - rec.at({i, j, k}), x, index_label({i, j, k}));
    }
    AxiomReport r = tracker.finish("roundtrip_product", tol, pts);
    r.extras.emplace_back("t_path_residual", fwd.t_path_residual);
    r.extras.emplace_back("dt_match", fwd.dt_match_residual);
    return r;
}

/// abundant -> product -> abundant; S must match exactly and dt up to the
/// integration tolerance (t itself is only defined up to a constant).
inline AxiomReport abundant_roundtrip_check(const AbundantStructure& a, const Vec& basepoint,
                                            const std::vector<Vec>& pts, double tol,
                                            const CorrespondenceOptions& opt = {}) {
    ProductStructure p = abundant_to_product(a);
    CorrespondenceResult fwd = product_to_abundant(p, basepoint, opt);
    int n = a.dim();
    ResidualTracker s_tracker, dt_tracker;
    for (const Vec& x : pts) {
        PointTensor s0 = a.S().eval_stack(x, 0)[0];
        PointTensor s1 = fwd.structure.S().eval_stack(x, 0)[0];
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = j; k < n; ++k)
                    s_tracker.update(s0.at({i, j, k}) - s1.at({i, j, k}), x, index_label({i, j, k}));
        Vec dt0 = a.t().derivs(x, 1).grad;
        Vec dt1 = fwd.structure.t().derivs(x, 1).grad;
        for (int k = 0; k < n; ++k)
            dt_tracker.update(dt0[static_cast<std::size_t>(k)] - dt1[static_cast<std::size_t>(k)], x,
                              index_label({k}));
    }
    AxiomReport r = s_tracker.finish("roundtrip_abundant", tol, pts);
    r.max_residual = std::max(s_tracker.worst(), dt_tracker.worst());
    r.pass = r.max_residual <= tol;
    r.extras.emplace_back("S_match", s_tracker.worst());
    r.extras.emplace_back("dt_match", dt_tracker.worst());
    return r;
}

} // namespace frobsia
