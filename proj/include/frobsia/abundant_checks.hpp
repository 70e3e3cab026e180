#pragma once

#include "frobsia/report.hpp"
#include "frobsia/structures.hpp"

namespace frobsia {

// ---------------------------------------------------------------------------
// Pointwise building blocks
// ---------------------------------------------------------------------------

/// scrS_ij = sum_ab S_iab S_jab.
inline PointTensor scr_s(const PointTensor& s) {
    int n = s.dim();
    PointTensor out(n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) acc += s.at({i, a, b}) * s.at({j, a, b});
            out.at({i, j}) = out.at({j, i}) = acc;
        }
    return out;
}

/// B = -(1/3)(S + 3 Pi_Sym3 g (x) dt), the symmetric tensor whose quadratic
/// relation is the third structural equation.
inline PointTensor b_tensor(const PointTensor& s, const Vec& dt, const MetricContext& ctx) {
    return (-1.0 / 3.0) * (s + 3.0 * sym3_of_metric_and_vector(ctx, dt));
}

/// Auxiliary rank-4 tensor of the first structural equation:
/// digamma(X,Y,Z,W) = S(X,W,S^(Y,Z)) + 3 S(X,Y,W) Z(t) + S(X,Y,Z) W(t)
///                  + (4/(n-2) scrS(Y,Z) - 3 S(Y,Z,grad t)) g(X,W).
inline PointTensor digamma_tensor(const PointTensor& s, const Vec& dt, const MetricContext& ctx) {
    int n = ctx.dim;
    PointTensor scr = scr_s(s);
    PointTensor s_gradt(n, 2); // S(Y,Z,grad t)
    for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
            double acc = 0.0;
            for (int a = 0; a < n; ++a) acc += s.at({y, z, a}) * dt[static_cast<std::size_t>(a)];
            s_gradt.at({y, z}) = acc;
        }
    PointTensor out(n, 4);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            for (int z = 0; z < n; ++z)
                for (int w = 0; w < n; ++w) {
                    double acc = 0.0;
                    for (int a = 0; a < n; ++a) acc += s.at({x, w, a}) * s.at({y, z, a});
                    acc += 3.0 * s.at({x, y, w}) * dt[static_cast<std::size_t>(z)];
                    acc += s.at({x, y, z}) * dt[static_cast<std::size_t>(w)];
                    acc += (4.0 / (n - 2.0) * scr.at({y, z}) - 3.0 * s_gradt.at({y, z})) * ctx.g(x, w);
                    out.at({x, y, z, w}) = acc;
                }
    return out;
}

/// digamma evaluated from the structure's fields at a point.
inline PointTensor digamma(const AbundantStructure& a, const Vec& x0) {
    MetricContext ctx{a.dim()};
    PointTensor s = a.S().eval_stack(x0, 0)[0];
    Vec dt = a.t().derivs(x0, 1).grad;
    return digamma_tensor(s, dt, ctx);
}

/// Trace-free symmetric projection of digamma over its first three slots,
/// the derivative slot held fixed: result[x,y,z,w].
inline PointTensor digamma_projected(const PointTensor& dg, const MetricContext& ctx) {
    int n = ctx.dim;
    PointTensor out(n, 4);
    for (int w = 0; w < n; ++w) {
        PointTensor slice(n, 3);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) slice.at({x, y, z}) = dg.at({x, y, z, w});
        PointTensor proj = trace_free_sym3(sym_project(slice), ctx);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) out.at({x, y, z, w}) = proj.at({x, y, z});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structural equation checks
// ---------------------------------------------------------------------------

namespace detail {
struct PointWorstA {
    double value = 0.0;
    std::string component;
};
template <class F>
AxiomReport reduce_points(std::string axiom, const std::vector<Vec>& pts, double tol, F&& per_point) {
    std::vector<PointWorstA> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { worst[i] = per_point(pts[i]); });
    ResidualTracker tracker;
    for (std::size_t i = 0; i < pts.size(); ++i) tracker.update(worst[i].value, pts[i], worst[i].component);
    return tracker.finish(std::move(axiom), tol, pts);
}
} // namespace detail

/// First structural equation. The derivative of S satisfies
///   grad_W S(X,Y,Z) = -(1/3) (Pi_Sym3_tracefree digamma)(X,Y,Z,W);
/// the sign is fixed by the product-to-abundant construction (the diagonal
/// Smorodinski-Winternitz family satisfies it with the minus).
inline AxiomReport check_A1(const AbundantStructure& a, const std::vector<Vec>& pts, double tol) {
    int n = a.dim();
    MetricContext ctx{n};
    return detail::reduce_points("A1", pts, tol, [&](const Vec& x) {
        auto stack = a.S().eval_stack(x, 1);
        const PointTensor& s = stack[0];
        const PointTensor& ds = stack[1];
        Vec dt = a.t().derivs(x, 1).grad;
        PointTensor rhs = digamma_projected(digamma_tensor(s, dt, ctx), ctx);
        detail::PointWorstA w;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                for (int k = j; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double r = std::abs(ds.at({i, j, k, l}) + rhs.at({i, j, k, l}) / 3.0);
                        if (r > w.value) w = {r, index_label({i, j, k, l})};
                    }
        return w;
    });
}

/// Second structural equation (curvature fixed to zero). Two algebraically
/// equivalent right-hand sides are evaluated:
///   definition form:  -(1/3)(dt (x) dt - |grad t|^2 g / 2)
///                     - (1/(3(n-2)))(scrS + (n-6)|S|^2 g / (2(n-1)(n+2)))
///   construction form: -(1/(3(n-2))) scrS - (1/3)(dt (x) dt - 2|grad t|^2 g/(n-2)).
/// They agree exactly where |S|^2 = (n-1)(n+2)|grad t|^2 holds.
inline AxiomReport check_A2(const AbundantStructure& a, const std::vector<Vec>& pts, double tol) {
    int n = a.dim();
    struct A2Worst {
        detail::PointWorstA def, con, agree;
    };
    std::vector<A2Worst> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t pi) {
        const Vec& x = pts[pi];
        PointTensor s = a.S().eval_stack(x, 0)[0];
        auto td = a.t().derivs(x, 2);
        PointTensor scr = scr_s(s);
        double grad2 = 0.0;
        for (double g : td.grad) grad2 += g * g;
        double s2 = 0.0;
        for (int i = 0; i < n; ++i) s2 += scr.at({i, i});
        A2Worst w;
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                double gij = (i == j) ? 1.0 : 0.0;
                double dt2 = td.grad[static_cast<std::size_t>(i)] * td.grad[static_cast<std::size_t>(j)];
                double def = -(dt2 - 0.5 * grad2 * gij) / 3.0 -
                             (scr.at({i, j}) + (n - 6.0) * s2 * gij / (2.0 * (n - 1.0) * (n + 2.0))) / (3.0 * (n - 2.0));
                double con = -scr.at({i, j}) / (3.0 * (n - 2.0)) - (dt2 - 2.0 * grad2 * gij / (n - 2.0)) / 3.0;
                double lhs = td.hess.at({i, j});
                double rdef = std::abs(lhs - def);
                double rcon = std::abs(lhs - con);
                double ragree = std::abs(def - con);
                if (rdef > w.def.value) w.def = {rdef, index_label({i, j})};
                if (rcon > w.con.value) w.con = {rcon, index_label({i, j})};
                if (ragree > w.agree.value) w.agree = {ragree, index_label({i, j})};
            }
        worst[pi] = w;
    });
    ResidualTracker def, con, agree;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        def.update(worst[i].def.value, pts[i], worst[i].def.component);
        con.update(worst[i].con.value, pts[i], worst[i].con.component);
        agree.update(worst[i].agree.value, pts[i], worst[i].agree.component);
    }
    AxiomReport r = def.finish("A2", tol, pts);
    r.extras.emplace_back("definition_form", def.worst());
    r.extras.emplace_back("construction_form", con.worst());
    r.extras.emplace_back("forms_agree", agree.worst());
    return r;
}

/// Third structural equation, raw quadratic form plus its decomposition:
///   full:       sum_a (B_ika B_jla - B_ila B_jka) = 0
///   weyl:       the Weyl part of BB(i,j,k,l) = sum_a B_ija B_kla vanishes
///   trace:      scrB(j,l) = sum_a tr(B^)_a B_ajl   (full contraction of raw)
///   reduced:    trace-free part of (n-2) S^(dt) + (n-2) dt (x) dt - scrS
///   perfsq:     |S|^2 - (n-1)(n+2)|grad t|^2 = 0.
inline AxiomReport check_A3(const AbundantStructure& a, const std::vector<Vec>& pts, double tol) {
    int n = a.dim();
    MetricContext ctx{n};
    struct A3Worst {
        detail::PointWorstA full, weyl, trace, reduced, perfsq;
    };
    std::vector<A3Worst> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t pi) {
        const Vec& x = pts[pi];
        PointTensor s = a.S().eval_stack(x, 0)[0];
        auto td = a.t().derivs(x, 1);
        PointTensor b = b_tensor(s, td.grad, ctx);
        A3Worst w;
        // full quadratic residual
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double acc = 0.0;
                        for (int e = 0; e < n; ++e)
                            acc += b.at({i, k, e}) * b.at({j, l, e}) - b.at({i, l, e}) * b.at({j, k, e});
                        if (std::abs(acc) > w.full.value) w.full = {std::abs(acc), index_label({i, j, k, l})};
                    }
        // Weyl part of the B-square pairing
        PointTensor bb(n, 4);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double acc = 0.0;
                        for (int e = 0; e < n; ++e) acc += b.at({i, j, e}) * b.at({k, l, e});
                        bb.at({i, j, k, l}) = acc;
                    }
        PointTensor wp = weyl_project(bb, ctx);
        wp.for_each_index([&](const std::vector<int>& idx, std::size_t flat) {
            double r = std::abs(wp.data()[flat]);
            if (r > w.weyl.value) w.weyl = {r, index_label({idx[0], idx[1], idx[2], idx[3]})};
        });
        // trace part: scrB = tr(B^) . B
        PointTensor scrb = scr_s(b);
        Vec trb = sym3_trace(b);
        for (int j = 0; j < n; ++j)
            for (int l = j; l < n; ++l) {
                double rhs = 0.0;
                for (int e = 0; e < n; ++e) rhs += trb[static_cast<std::size_t>(e)] * b.at({e, j, l});
                double r = std::abs(scrb.at({j, l}) - rhs);
                if (r > w.trace.value) w.trace = {r, index_label({j, l})};
            }
        // reduced trace-free condition
        PointTensor scr = scr_s(s);
        double grad2 = 0.0;
        for (double g : td.grad) grad2 += g * g;
        double s2 = 0.0;
        for (int i = 0; i < n; ++i) s2 += scr.at({i, i});
        PointTensor red(n, 2);
        for (int j = 0; j < n; ++j)
            for (int l = 0; l < n; ++l) {
                double sdt = 0.0;
                for (int e = 0; e < n; ++e) sdt += s.at({e, j, l}) * td.grad[static_cast<std::size_t>(e)];
                red.at({j, l}) = (n - 2.0) * sdt +
                                 (n - 2.0) * td.grad[static_cast<std::size_t>(j)] * td.grad[static_cast<std::size_t>(l)] -
                                 scr.at({j, l});
            }
        double tr_red = 0.0;
        for (int i = 0; i < n; ++i) tr_red += red.at({i, i});
        for (int j = 0; j < n; ++j)
            for (int l = j; l < n; ++l) {
                double r = std::abs(red.at({j, l}) - (j == l ? tr_red / n : 0.0));
                if (r > w.reduced.value) w.reduced = {r, index_label({j, l})};
            }
        // perfect-square identity
        double perf = std::abs(s2 - (n - 1.0) * (n + 2.0) * grad2);
        if (perf > w.perfsq.value) w.perfsq = {perf, "scalar"};
        worst[pi] = w;
    });
    ResidualTracker full, weyl, trace, reduced, perfsq;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        full.update(worst[i].full.value, pts[i], worst[i].full.component);
        weyl.update(worst[i].weyl.value, pts[i], worst[i].weyl.component);
        trace.update(worst[i].trace.value, pts[i], worst[i].trace.component);
        reduced.update(worst[i].reduced.value, pts[i], worst[i].reduced.component);
        perfsq.update(worst[i].perfsq.value, pts[i], worst[i].perfsq.component);
    }
    AxiomReport r = full.finish("A3", tol, pts);
    r.extras.emplace_back("weyl_part", weyl.worst());
    r.extras.emplace_back("trace_part", trace.worst());
    r.extras.emplace_back("reduced_trace_free", reduced.worst());
    r.extras.emplace_back("perfect_square", perfsq.worst());
    return r;
}

// ---------------------------------------------------------------------------
// Unconditional index-algebra identities
// ---------------------------------------------------------------------------

struct NineBResiduals {
    double scr_identity;  // 9 scrB = scrS + 4 S(grad t) + (n+6) dt (x) dt + 2 |grad t|^2 g
    double norm_identity; // 9 |B|^2 = |S|^2 + 3(n+2) |grad t|^2
};

/// Pointwise evaluation of the two 9B identities for arbitrary symmetric
/// trace-free S values and gradient values; they hold for ANY pair, no
/// structural equations required.
inline NineBResiduals nine_b_residuals_pointwise(const PointTensor& s, const Vec& dt, const MetricContext& ctx) {
    int n = ctx.dim;
    PointTensor b = b_tensor(s, dt, ctx);
    PointTensor scrb = scr_s(b);
    PointTensor scr = scr_s(s);
    double grad2 = 0.0;
    for (double g : dt) grad2 += g * g;
    double s2 = 0.0, b2 = 0.0;
    for (int i = 0; i < n; ++i) {
        s2 += scr.at({i, i});
        b2 += scrb.at({i, i});
    }
    NineBResiduals res{0.0, 0.0};
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double sdt = 0.0;
            for (int e = 0; e < n; ++e) sdt += s.at({e, i, j}) * dt[static_cast<std::size_t>(e)];
            double rhs = scr.at({i, j}) + 4.0 * sdt +
                         (n + 6.0) * dt[static_cast<std::size_t>(i)] * dt[static_cast<std::size_t>(j)] +
                         2.0 * grad2 * ((i == j) ? 1.0 : 0.0);
            res.scr_identity = std::max(res.scr_identity, std::abs(9.0 * scrb.at({i, j}) - rhs));
        }
    res.norm_identity = std::abs(9.0 * b2 - (s2 + 3.0 * (n + 2.0) * grad2));
    return res;
}

/// Both identities evaluated from the structure's own fields.
inline AxiomReport check_9B_identities(const AbundantStructure& a, const std::vector<Vec>& pts, double tol) {
    int n = a.dim();
    MetricContext ctx{n};
    struct NineWorst {
        detail::PointWorstA scr, norm;
    };
    std::vector<NineWorst> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t pi) {
        const Vec& x = pts[pi];
        PointTensor s = a.S().eval_stack(x, 0)[0];
        Vec dt = a.t().derivs(x, 1).grad;
        NineBResiduals res = nine_b_residuals_pointwise(s, dt, ctx);
        worst[pi] = {{res.scr_identity, "matrix"}, {res.norm_identity, "scalar"}};
    });
    ResidualTracker scr, norm;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        scr.update(worst[i].scr.value, pts[i], worst[i].scr.component);
        norm.update(worst[i].norm.value, pts[i], worst[i].norm.component);
    }
    AxiomReport r = scr.finish("nine_B_identities", tol, pts);
    r.max_residual = std::max(scr.worst(), norm.worst());
    r.pass = r.max_residual <= tol;
    r.extras.emplace_back("nine_scrB", scr.worst());
    r.extras.emplace_back("nine_B_norm", norm.worst());
    return r;
}

/// Full abundant-side axiom suite.
struct AbundantSuite {
    double s_trace_residual;
    AxiomReport a1, a2, a3, nine_b;
    bool pass(double s_trace_tol = 1e-12) const {
        return s_trace_residual <= s_trace_tol && a1.pass && a2.pass && a3.pass && nine_b.pass;
    }
};

inline AbundantSuite run_abundant_suite(const AbundantStructure& a, const std::vector<Vec>& pts, double tol) {
    return AbundantSuite{a.trace_residual(pts), check_A1(a, pts, tol), check_A2(a, pts, tol), check_A3(a, pts, tol),
                         check_9B_identities(a, pts, 1e-11)};
}

} // namespace frobsia
