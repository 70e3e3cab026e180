#include <doctest.h>

#include <frobsia/correspondence.hpp>

using namespace frobsia;

namespace {

ProductStructure sw_product(int n) {
    ProductStructure p(n, DomainBox::cube(n, 0.05, 20.0));
    for (int i = 0; i < n; ++i)
        p.P().set(i, i, i, ScalarFieldExpr::parse("-1/x" + std::to_string(i + 1), n));
    return p;
}

} // namespace

TEST_CASE("forward map: S components, t closed form, t(2,1,1)") {
    auto res = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0});
    REQUIRE(res.t_closed_form);
    CHECK(res.structure.t().value_at({2.0, 1.0, 1.0}) == doctest::Approx(0.41588830834));
    PointTensor s = res.structure.S().eval_stack({1.0, 1.0, 1.0}, 0)[0];
    CHECK(s.at({0, 0, 0}) == doctest::Approx(1.2));
    // output S is trace-free at sample points
    std::vector<Vec> pts = sample_points(res.structure.box(), 20, 31, 0.1);
    CHECK(res.structure.trace_residual(pts) < 1e-12);
}

TEST_CASE("forward map refuses nothing but reports dt match against the trace") {
    auto p = sw_product(4);
    Vec base(4, 1.0);
    auto res = product_to_abundant(p, base);
    // dt must equal -3/(n+2) tau at sample points
    std::vector<Vec> pts = sample_points(p.box(), 20, 77, 0.1);
    auto tau = p.trace_exprs();
    double worst = 0.0;
    for (const Vec& x : pts) {
        Vec dt = res.structure.t().derivs(x, 1).grad;
        for (int k = 0; k < 4; ++k) {
            double want = -3.0 / 6.0 * tau[static_cast<std::size_t>(k)].value_at(x);
            worst = std::max(worst, std::abs(dt[static_cast<std::size_t>(k)] - want));
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("forward map output passes the abundant axioms") {
    auto res = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0});
    std::vector<Vec> pts = sample_points(res.structure.box(), 100, 99, 0.1);
    CHECK(check_A1(res.structure, pts, 1e-9).pass);
    CHECK(check_A2(res.structure, pts, 1e-9).pass);
    CHECK(check_A3(res.structure, pts, 1e-9).pass);
}

TEST_CASE("zero product maps to the zero structure") {
    ProductStructure zero(3, DomainBox::cube(3, -2.0, 2.0));
    auto res = product_to_abundant(zero, {0.0, 0.0, 0.0});
    CHECK(res.structure.S().empty());
    REQUIRE(res.t_closed_form);
    CHECK(res.structure.t().value_at({1.0, -1.0, 0.5}) == doctest::Approx(0.0));
}

TEST_CASE("reverse map reconstructs the diagonal product from its (S,t)") {
    auto res = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0});
    ProductStructure back = abundant_to_product(res.structure);
    Vec x{1.0, 1.0, 1.0};
    PointTensor pv = back.P().eval_stack(x, 0)[0];
    CHECK(pv.at({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(pv.at({0, 0, 1}) == doctest::Approx(0.0).epsilon(1e-13));
    Vec y{2.0, 0.5, 4.0};
    PointTensor pv2 = back.P().eval_stack(y, 0)[0];
    CHECK(pv2.at({0, 0, 0}) == doctest::Approx(-0.5));
    CHECK(pv2.at({1, 1, 1}) == doctest::Approx(-2.0));
    CHECK(pv2.at({2, 2, 2}) == doctest::Approx(-0.25));
}

TEST_CASE("reverse map of S = 0 with linear t is the pure-trace product") {
    AbundantStructure a(3, DomainBox::cube(3, -2.0, 2.0));
    a.t() = TPotential::closed_form(ScalarFieldExpr::parse("x1 + x2 + x3", 3));
    ProductStructure p = abundant_to_product(a);
    Vec x{0.3, -0.7, 1.1};
    PointTensor pv = p.P().eval_stack(x, 0)[0];
    CHECK(pv.at({0, 0, 0}) == doctest::Approx(-1.0));
    CHECK(pv.at({0, 0, 1}) == doctest::Approx(-1.0 / 3));
    CHECK(pv.at({0, 1, 2}) == doctest::Approx(0.0));
    // this pure-trace product is NOT associative; the worst quadruple is
    // (1,1,2,2): |7/9 - 2/9| = 5/9
    auto rep = check_wdvv(p, {x}, 1e-10);
    CHECK_FALSE(rep.pass);
    CHECK(rep.max_residual == doctest::Approx(5.0 / 9).epsilon(1e-10));
}

TEST_CASE("roundtrip product -> abundant -> product is the identity") {
    for (int n : {3, 4, 5}) {
        auto p = sw_product(n);
        Vec base(static_cast<std::size_t>(n), 1.0);
        std::vector<Vec> pts = sample_points(p.box(), 30, 55, 0.1);
        auto rep = roundtrip_check(p, base, pts, 1e-10);
        CHECK(rep.pass);
    }
}

TEST_CASE("roundtrip of the zero product is exactly zero") {
    ProductStructure zero(3, DomainBox::cube(3, -2.0, 2.0));
    auto rep = roundtrip_check(zero, {0.0, 0.0, 0.0}, {{0.5, 0.1, -0.4}}, 1e-14);
    CHECK(rep.max_residual == 0.0);
}

TEST_CASE("abundant-side roundtrip: S exact, dt matches") {
    auto a = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0}).structure;
    std::vector<Vec> pts = sample_points(a.box(), 20, 66, 0.1);
    auto rep = abundant_roundtrip_check(a, {1.0, 1.0, 1.0}, pts, 1e-8);
    CHECK(rep.pass);
    CHECK(rep.extra("S_match") < 1e-10);
    CHECK(rep.extra("dt_match") < 1e-8);
}

TEST_CASE("scaling linearity: the trace-free projection commutes with scaling P") {
    auto p = sw_product(3);
    // 2P has S-components exactly twice those of P
    ProductStructure p2(3, p.box());
    for (int i = 0; i < 3; ++i)
        p2.P().set(i, i, i, ScalarFieldExpr::parse("-2/x" + std::to_string(i + 1), 3));
    auto r1 = product_to_abundant(p, {1.0, 1.0, 1.0});
    auto r2 = product_to_abundant(p2, {1.0, 1.0, 1.0});
    for (const Vec& x : sample_points(p.box(), 10, 12, 0.1)) {
        PointTensor s1 = r1.structure.S().eval_stack(x, 0)[0];
        PointTensor s2 = r2.structure.S().eval_stack(x, 0)[0];
        CHECK((s2 - 2.0 * s1).max_abs() < 1e-12);
    }
}

TEST_CASE("trace of the reconstructed product inverts the dt relation") {
    // tr(P^) of abundant_to_product(A) equals -(n+2)/3 dt
    auto a = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0}).structure;
    ProductStructure p = abundant_to_product(a);
    auto tau = p.trace_exprs();
    for (const Vec& x : sample_points(p.box(), 10, 13, 0.1)) {
        Vec dt = a.t().derivs(x, 1).grad;
        for (int k = 0; k < 3; ++k) {
            double want = -(3.0 + 2.0) / 3.0 * dt[static_cast<std::size_t>(k)];
            CHECK(tau[static_cast<std::size_t>(k)].value_at(x) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-recognizable traces fall back to gradient-only t with a sampled table") {
    // trace components depend on two coordinates jointly -> no closed form
    ProductStructure p(3, DomainBox::cube(3, 0.5, 3.0));
    p.P().set(0, 0, 0, ScalarFieldExpr::parse("x2/x1", 3));
    auto res = product_to_abundant(p, {1.0, 1.0, 1.0});
    CHECK_FALSE(res.t_closed_form);
    CHECK_FALSE(res.structure.t().has_value());
    CHECK(res.structure.t().grad_exprs().size() == 3);
    CHECK(res.sampled_points.size() == res.sampled_values.size());
    CHECK(res.sampled_points.size() > 0);
    // the gradient-only structure still serialises and reloads
    json j = res.structure.to_json();
    AbundantStructure back = AbundantStructure::from_json(j);
    Vec x{1.2, 1.4, 0.9};
    Vec g1 = res.structure.t().derivs(x, 1).grad;
    Vec g2 = back.t().derivs(x, 1).grad;
    for (int k = 0; k < 3; ++k) CHECK(g1[static_cast<std::size_t>(k)] == doctest::Approx(g2[static_cast<std::size_t>(k)]));
}
