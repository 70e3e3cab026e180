#include <doctest.h>

#include <frobsia/correspondence.hpp>
#include <frobsia/prolongation.hpp>

using namespace frobsia;

namespace {

ProductStructure sw_product(int n) {
    ProductStructure p(n, DomainBox::cube(n, 0.05, 20.0));
    for (int i = 0; i < n; ++i)
        p.P().set(i, i, i, ScalarFieldExpr::parse("-1/x" + std::to_string(i + 1), n));
    return p;
}

AbundantStructure sw_abundant(int n) {
    Vec base(static_cast<std::size_t>(n), 1.0);
    return product_to_abundant(sw_product(n), base).structure;
}

AbundantStructure trivial_structure(int n) {
    AbundantStructure a(n, DomainBox::cube(n, -2.0, 2.0));
    a.t() = TPotential::closed_form(ScalarFieldExpr::zero(n));
    return a;
}

VState v_state_from_expr(const ScalarFieldExpr& v, const Vec& x) {
    int n = v.dim();
    Jet j = v.jet_at(x, 2);
    VState s;
    s.x = x;
    s.V = j.value();
    s.gradV.resize(static_cast<std::size_t>(n));
    s.lapV = 0.0;
    for (int c = 0; c < n; ++c) {
        s.gradV[static_cast<std::size_t>(c)] = j.d1(c);
        s.lapV += j.d2(c, c);
    }
    return s;
}

/// Plug-in residual of a closed-form potential against the V-system:
/// both the Hessian equation and the Laplacian-gradient closure.
double v_plugin_residual(const ProlongationSystem& sys, const ScalarFieldExpr& v, const Vec& x) {
    int n = sys.dim();
    Jet j = v.jet_at(x, 3);
    VState s = v_state_from_expr(v, x);
    VDerivs d = sys.v_rhs(x, s);
    double worst = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) worst = std::max(worst, std::abs(d.hess.at({a, b}) - j.d2(a, b)));
    for (int i = 0; i < n; ++i) {
        double dlap = 0.0;
        for (int a = 0; a < n; ++a) dlap += j.d3(i, a, a);
        worst = std::max(worst, std::abs(d.dlap[static_cast<std::size_t>(i)] - dlap));
    }
    return worst;
}

std::vector<ScalarFieldExpr> sw_v_family(int n) {
    std::vector<ScalarFieldExpr> fam;
    fam.push_back(ScalarFieldExpr::constant(n, 1.0));
    std::string r2 = "x1^2";
    for (int c = 1; c < n; ++c) r2 += " + x" + std::to_string(c + 1) + "^2";
    fam.push_back(ScalarFieldExpr::parse(r2, n));
    for (int c = 0; c < n; ++c) fam.push_back(ScalarFieldExpr::parse("x" + std::to_string(c + 1) + "^-2", n));
    return fam;
}

/// Closed-form Killing family of the diagonal structure: axis squares
/// dx^i (x) dx^i and squared rotations (x^i dx^j - x^j dx^i)^2.
std::vector<ExprTensor> sw_k_family(int n) {
    std::vector<ExprTensor> fam;
    for (int i = 0; i < n; ++i) {
        ExprTensor k = ExprTensor::zeros(n, 2);
        k.at({i, i}) = ScalarFieldExpr::constant(n, 1.0);
        fam.push_back(k);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            std::string xi = "x" + std::to_string(i + 1), xj = "x" + std::to_string(j + 1);
            ExprTensor k = ExprTensor::zeros(n, 2);
            k.at({i, i}) = ScalarFieldExpr::parse(xj + "^2", n);
            k.at({j, j}) = ScalarFieldExpr::parse(xi + "^2", n);
            k.at({i, j}) = ScalarFieldExpr::parse("-" + xi + "*" + xj, n);
            k.at({j, i}) = k.at({i, j});
            fam.push_back(k);
        }
    return fam;
}

PointTensor eval_k(const ExprTensor& k, const Vec& x) {
    PointTensor out(k.dim, 2);
    out.for_each_index(
        [&](const std::vector<int>&, std::size_t flat) { out.data()[flat] = k.components[flat].value_at(x); });
    return out;
}

double k_plugin_residual(const ProlongationSystem& sys, const ExprTensor& k, const Vec& x) {
    int n = sys.dim();
    PointTensor kv = eval_k(k, x);
    PointTensor dk = sys.k_rhs(x, kv);
    auto stack = derivative_tensor(k, x, 1);
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int l = 0; l < n; ++l)
                worst = std::max(worst, std::abs(dk.at({i, j, l}) - stack[1].at({i, j, l})));
    return worst;
}

} // namespace

TEST_CASE("v_rhs: trivial structure gives the radial system") {
    auto a = trivial_structure(3);
    ProlongationSystem sys(a);
    VState s;
    s.x = {0.3, -0.5, 1.1};
    s.V = 2.0;
    s.gradV = {0.4, -1.0, 0.2};
    s.lapV = 1.8;
    VDerivs d = sys.v_rhs(s.x, s);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(d.hess.at({i, j}) == doctest::Approx(i == j ? 0.6 : 0.0));
    for (double v : d.dlap) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("v_rhs plug-in: the closed-form family solves the diagonal system") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    for (const Vec& x : {Vec{1.0, 1.0, 1.0}, Vec{1.0, 2.0, 3.0}, Vec{0.7, 1.9, 0.4}})
        for (const auto& v : sw_v_family(3)) {
            CAPTURE(v.to_string());
            CHECK(v_plugin_residual(sys, v, x) < 1e-10);
        }
}

TEST_CASE("v_rhs rejects linear potentials for the diagonal structure") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    auto v = ScalarFieldExpr::parse("x1", 3);
    CHECK(v_plugin_residual(sys, v, {1.0, 1.0, 1.0}) > 1.0);
}

TEST_CASE("v_rhs trace consistency: the Hessian equation contracts to the Laplacian") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    SplitMix64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        VState s;
        s.x = a.box().sample(rng, 0.2);
        s.V = rng.uniform(-1, 1);
        s.gradV = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        s.lapV = rng.uniform(-1, 1);
        VDerivs d = sys.v_rhs(s.x, s);
        double tr = d.hess.at({0, 0}) + d.hess.at({1, 1}) + d.hess.at({2, 2});
        CHECK(tr == doctest::Approx(s.lapV).epsilon(1e-12));
    }
}

TEST_CASE("k_rhs: constant axis tensors and the metric solve the system with dK = 0") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec x{1.0, 2.0, 3.0};
    PointTensor axis(3, 2);
    axis.at({0, 0}) = 1.0;
    CHECK(sys.k_rhs(x, axis).max_abs() < 1e-13);
    CHECK(sys.k_rhs(x, PointTensor::metric(3)).max_abs() < 1e-13);
}

TEST_CASE("k_rhs matches finite differences of the closed-form Killing family") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec x{1.0, 2.0, 3.0};
    const double h = 1e-5;
    for (const auto& k : sw_k_family(3)) {
        PointTensor dk = sys.k_rhs(x, eval_k(k, x));
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j)
                for (int l = 0; l < 3; ++l) {
                    Vec xp = x, xm = x;
                    xp[static_cast<std::size_t>(l)] += h;
                    xm[static_cast<std::size_t>(l)] -= h;
                    double fd = (eval_k(k, xp).at({i, j}) - eval_k(k, xm).at({i, j})) / (2 * h);
                    CHECK(dk.at({i, j, l}) == doctest::Approx(fd).epsilon(1e-6));
                }
    }
}

TEST_CASE("k_rhs: rotation tensor spot values at (1,2,3)") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec x{1.0, 2.0, 3.0};
    PointTensor k(3, 2); // (x1 dx2 - x2 dx1)^2
    k.at({0, 0}) = 4.0;
    k.at({1, 1}) = 1.0;
    k.at({0, 1}) = k.at({1, 0}) = -2.0;
    PointTensor dk = sys.k_rhs(x, k);
    CHECK(dk.at({1, 1, 0}) == doctest::Approx(2.0));  // d_1 K_22 = 2 x^1
    CHECK(dk.at({0, 1, 0}) == doctest::Approx(-2.0)); // d_1 K_12 = -x^2
    CHECK(dk.at({0, 0, 1}) == doctest::Approx(4.0));  // d_2 K_11 = 2 x^2
    CHECK(dk.at({0, 0, 0}) == doctest::Approx(0.0));
}

TEST_CASE("dense solve and the direct antisymmetrized route agree; Killing symmetry emerges") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    SplitMix64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        Vec x = a.box().sample(rng, 0.2);
        PointTensor k(3, 2);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) k.at({i, j}) = k.at({j, i}) = rng.uniform(-1.0, 1.0);
        PointTensor solved = sys.k_rhs(x, k);
        PointTensor direct = sys.k_rhs_direct(x, k);
        CHECK((solved - direct).max_abs() < 1e-12);
        // fully symmetrized output vanishes: the Killing condition
        double worst = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int l = 0; l < 3; ++l)
                    worst = std::max(worst,
                                     std::abs(solved.at({i, j, l}) + solved.at({j, l, i}) + solved.at({l, i, j})) / 3.0);
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("integrate_basis V: rank n+2 and closed-form candidates span the space") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    std::vector<Vec> targets{{1.5, 2.0, 1.2}, {2.5, 0.8, 1.7}};
    auto basis = integrate_basis(sys, base, targets, BasisKind::V);
    CHECK(basis.path_residual < 1e-8);
    REQUIRE(basis.seeds.size() == 5);

    // rank of the seed -> endpoint-state map at the first target
    Matrix m(5, 5);
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t c = 0; c < 5; ++c) m.at(c, s) = basis.states[0][s][c];
    Vec sv = singular_values(m);
    CHECK(numerical_rank(sv) == 5);

    // the closed-form family: plug-in residuals and a well-conditioned
    // evaluation matrix at five generic points
    auto fam = sw_v_family(3);
    std::vector<Vec> eval_pts{{1.0, 1.0, 1.0}, {1.5, 0.7, 2.0}, {2.2, 1.9, 0.6}, {0.8, 2.6, 1.4}, {3.0, 1.1, 2.3}};
    Matrix ev(5, 5);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 5; ++c) ev.at(r, c) = fam[c].value_at(eval_pts[r]);
    Vec esv = singular_values(ev);
    CHECK(esv.front() / esv.back() < 1e6);
    for (const auto& v : fam)
        for (const auto& x : eval_pts) CHECK(v_plugin_residual(sys, v, x) < 1e-9);
}

TEST_CASE("integrate_basis K: rank n(n+1)/2 and the closed family plugs in") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    auto basis = integrate_basis(sys, base, {{1.4, 2.2, 0.9}}, BasisKind::K);
    REQUIRE(basis.seeds.size() == 6);
    Matrix m(6, 6);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t c = 0; c < 6; ++c) m.at(c, s) = basis.states[0][s][c];
    CHECK(numerical_rank(singular_values(m)) == 6);

    for (const auto& k : sw_k_family(3))
        for (const Vec& x : {Vec{1.0, 2.0, 3.0}, Vec{0.7, 1.1, 1.9}}) CHECK(k_plugin_residual(sys, k, x) < 1e-9);
}

TEST_CASE("integrate_basis V on the trivial structure: constant seed stays constant") {
    auto a = trivial_structure(3);
    ProlongationSystem sys(a);
    Vec base{0.0, 0.0, 0.0};
    auto basis = integrate_basis(sys, base, {{1.0, -1.0, 0.5}, {-1.5, 0.3, 0.9}}, BasisKind::V);
    // seed 0 is (V, dV, lap) = (1, 0, 0, 0, 0)
    for (const auto& per_target : basis.states) {
        CHECK(per_target[0][0] == doctest::Approx(1.0));
        for (std::size_t c = 1; c < 5; ++c) CHECK(std::abs(per_target[0][c]) < 1e-13);
    }
}

TEST_CASE("integrate_basis K on the trivial structure:six constant solutions") {
    auto a = trivial_structure(3);
    ProlongationSystem sys(a);
    auto basis = integrate_basis(sys, {0.0, 0.0, 0.0}, {{1.0, 0.5, -0.5}}, BasisKind::K);
    REQUIRE(basis.seeds.size() == 6);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t c = 0; c < 6; ++c)
            CHECK(basis.states[0][s][c] == doctest::Approx(basis.seeds[s][c]).epsilon(1e-13));
    Matrix m(6, 6);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t c = 0; c < 6; ++c) m.at(c, s) = basis.states[0][s][c];
    CHECK(numerical_rank(singular_values(m)) == 6);
}

TEST_CASE("superposition: transporting a seed combination equals combining transports") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    Vec target{1.8, 1.3, 0.7};
    auto basis = integrate_basis(sys, base, {target}, BasisKind::V);
    Vec combo(5, 0.0);
    double c0 = 0.7, c1 = -1.2;
    for (std::size_t i = 0; i < 5; ++i) combo[i] = c0 * basis.seeds[0][i] + c1 * basis.seeds[3][i];
    integrate_polyline(combo, axis_polyline(base, target), v_transport_rhs(sys));
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(combo[i] ==
              doctest::Approx(c0 * basis.states[0][0][i] + c1 * basis.states[0][3][i]).epsilon(1e-10));
}

TEST_CASE("integrate_w: closed forms for the axis tensor, the metric, and constants") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    double av = 1.0, bv = 0.5;
    auto v_expr = ScalarFieldExpr::parse("1*(x1^2 + x2^2 + x3^2) + 0.5*x1^-2", 3);
    VState v_seed = v_state_from_expr(v_expr, base);
    v_seed.x = base;

    // K = dx1 (x) dx1: W = a x1^2 + b / x1^2 + const
    KState k_seed;
    k_seed.x = base;
    k_seed.K = PointTensor(3, 2);
    k_seed.K.at({0, 0}) = 1.0;
    std::vector<Vec> targets{{2.0, 1.5, 1.0}, {1.2, 0.8, 2.0}};
    Vec w = integrate_w(sys, v_seed, k_seed, targets);
    auto w_closed = [&](const Vec& x) { return av * x[0] * x[0] + bv / (x[0] * x[0]); };
    for (std::size_t ti = 0; ti < targets.size(); ++ti)
        CHECK(w[ti] == doctest::Approx(w_closed(targets[ti]) - w_closed(base)).epsilon(1e-9));

    // K = g: W = V + const
    KState g_seed;
    g_seed.x = base;
    g_seed.K = PointTensor::metric(3);
    Vec wg = integrate_w(sys, v_seed, g_seed, targets);
    for (std::size_t ti = 0; ti < targets.size(); ++ti)
        CHECK(wg[ti] == doctest::Approx(v_expr.value_at(targets[ti]) - v_expr.value_at(base)).epsilon(1e-9));

    // constant V: W stays zero
    VState const_seed;
    const_seed.x = base;
    const_seed.V = 3.0;
    const_seed.gradV = {0.0, 0.0, 0.0};
    const_seed.lapV = 0.0;
    Vec wc = integrate_w(sys, const_seed, k_seed, targets);
    for (double wv : wc) CHECK(std::abs(wv) < 1e-10);
}

TEST_CASE("bertrand-darboux residual vanishes for pairs from the same structure") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    std::vector<Vec> pts{{1.3, 1.8, 0.9}, {2.1, 0.7, 1.4}};

    // decoupled pair: V = 1/(x1)^2 against the rotation tensor in (2,3)
    VState v_seed = v_state_from_expr(ScalarFieldExpr::parse("x1^-2", 3), base);
    v_seed.x = base;
    KState rot;
    rot.x = base;
    rot.K = PointTensor(3, 2);
    rot.K.at({1, 1}) = 1.0; // (x2 dx3 - x3 dx2)^2 at (1,1,1)
    rot.K.at({2, 2}) = 1.0;
    rot.K.at({1, 2}) = rot.K.at({2, 1}) = -1.0;
    auto rep = bd_residual(sys, v_seed, rot, pts, 1e-8);
    CHECK(rep.pass);

    // generic seeds from the canonical bases
    SplitMix64 rng(9);
    for (int rep_i = 0; rep_i < 4; ++rep_i) {
        VState vs;
        vs.x = base;
        vs.V = rng.uniform(-1, 1);
        vs.gradV = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        vs.lapV = rng.uniform(-1, 1);
        KState ks;
        ks.x = base;
        ks.K = PointTensor(3, 2);
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j) ks.K.at({i, j}) = ks.K.at({j, i}) = rng.uniform(-1, 1);
        CHECK(bd_residual(sys, vs, ks, pts, 1e-8).pass);
    }
}

TEST_CASE("integrated K solutions satisfy the Killing equation at targets") {
    auto a = sw_abundant(3);
    ProlongationSystem sys(a);
    Vec base{1.0, 1.0, 1.0};
    std::vector<Vec> targets{{1.6, 1.1, 2.3}, {0.9, 2.4, 1.2}};
    auto basis = integrate_basis(sys, base, targets, BasisKind::K);
    for (std::size_t ti = 0; ti < targets.size(); ++ti)
        for (const auto& packed : basis.states[ti]) {
            KState k = KState::unpack(targets[ti], packed, 3);
            PointTensor dk = sys.k_rhs(targets[ti], k.K);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    for (int l = 0; l < 3; ++l) {
                        double sym = (dk.at({i, j, l}) + dk.at({j, l, i}) + dk.at({l, i, j})) / 3.0;
                        CHECK(std::abs(sym) < 1e-8);
                    }
        }
}
