#include <doctest.h>

#include <frobsia/abundant_checks.hpp>
#include <frobsia/correspondence.hpp>

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

/// Random trace-free symmetric rank-3 values plus a random gradient.
std::pair<PointTensor, Vec> random_pointwise_st(int n, SplitMix64& rng) {
    MetricContext ctx{n};
    PointTensor raw(n, 3);
    for (double& v : raw.data()) v = rng.uniform(-1.0, 1.0);
    PointTensor s = trace_free_sym3(sym_project(raw), ctx);
    Vec dt(static_cast<std::size_t>(n));
    for (double& v : dt) v = rng.uniform(-1.0, 1.0);
    return {s, dt};
}

} // namespace

TEST_CASE("derived S components match the hand values at (1,1,1)") {
    auto a = sw_abundant(3);
    PointTensor s = a.S().eval_stack({1.0, 1.0, 1.0}, 0)[0];
    CHECK(s.at({0, 0, 0}) == doctest::Approx(1.2));  // 6/5
    CHECK(s.at({0, 0, 1}) == doctest::Approx(-0.6)); // -3/5
    CHECK(s.at({0, 1, 2}) == doctest::Approx(0.0));
    for (double tr : sym3_trace(s)) CHECK(std::abs(tr) < 1e-14);

    // scrS and the norm identities at the symmetric point
    PointTensor scr = scr_s(s);
    CHECK(scr.at({0, 0}) == doctest::Approx(3.6));       // 18/5
    CHECK(scr.at({0, 1}) == doctest::Approx(-9.0 / 25)); // -0.36
    double s2 = scr.at({0, 0}) + scr.at({1, 1}) + scr.at({2, 2});
    CHECK(s2 == doctest::Approx(10.8)); // |S|^2 = 54/5
}

TEST_CASE("derived t is the closed-form log sum with gauge 0 at the basepoint") {
    auto res = product_to_abundant(sw_product(3), {1.0, 1.0, 1.0});
    REQUIRE(res.t_closed_form);
    const auto& t = res.structure.t();
    REQUIRE(t.has_value());
    CHECK(t.value_at({1.0, 1.0, 1.0}) == doctest::Approx(0.0));
    CHECK(t.value_at({2.0, 1.0, 1.0}) == doctest::Approx(0.6 * std::log(2.0))); // ~0.41589
    CHECK(t.value_at({std::exp(1.0), 1.0, 1.0}) == doctest::Approx(0.6));
    Vec dt = t.derivs({1.0, 1.0, 1.0}, 1).grad;
    for (double v : dt) CHECK(v == doctest::Approx(0.6));
    CHECK(res.dt_match_residual < 1e-12);
    CHECK(res.t_path_residual < 1e-10);
}

TEST_CASE("digamma: vanishes for S = 0, matches the termwise oracle, scales per term") {
    MetricContext ctx{3};
    Vec x{1.0, 1.0, 1.0};

    // S = 0 kills every term
    PointTensor zero_s(3, 3);
    Vec some_dt{0.4, -0.2, 0.9};
    CHECK(digamma_tensor(zero_s, some_dt, ctx).max_abs() == 0.0);

    auto a = sw_abundant(3);
    PointTensor s = a.S().eval_stack(x, 0)[0];
    Vec dt = a.t().derivs(x, 1).grad;
    PointTensor dg = digamma_tensor(s, dt, ctx);

    // frozen hand values at the symmetric point
    CHECK(dg.at({0, 0, 0, 0}) == doctest::Approx(19.44));
    CHECK(dg.at({1, 1, 0, 0}) == doctest::Approx(-0.72));
    CHECK(dg.at({0, 1, 1, 0}) == doctest::Approx(11.88));
    CHECK(dg.at({0, 0, 1, 1}) == doctest::Approx(-0.72));
    CHECK(dg.at({1, 0, 0, 1}) == doctest::Approx(11.88));

    // termwise oracle: reassemble from the four displayed terms
    PointTensor scr = scr_s(s);
    for (int xx = 0; xx < 3; ++xx)
        for (int yy = 0; yy < 3; ++yy)
            for (int zz = 0; zz < 3; ++zz)
                for (int ww = 0; ww < 3; ++ww) {
                    double t1 = 0.0, sg = 0.0;
                    for (int e = 0; e < 3; ++e) {
                        t1 += s.at({xx, ww, e}) * s.at({yy, zz, e});
                        sg += s.at({yy, zz, e}) * dt[static_cast<std::size_t>(e)];
                    }
                    double t2 = 3.0 * s.at({xx, yy, ww}) * dt[static_cast<std::size_t>(zz)];
                    double t3 = s.at({xx, yy, zz}) * dt[static_cast<std::size_t>(ww)];
                    double t4 = (4.0 * scr.at({yy, zz}) - 3.0 * sg) * (xx == ww ? 1.0 : 0.0);
                    CHECK(dg.at({xx, yy, zz, ww}) == doctest::Approx(t1 + t2 + t3 + t4).epsilon(1e-13));
                }

    // per-term scaling under S -> 2S: quadratic terms x4, linear terms x2
    PointTensor dg2 = digamma_tensor(2.0 * s, dt, ctx);
    PointTensor quad = digamma_tensor(s, Vec(3, 0.0), ctx);          // pure S.S part
    PointTensor lin = dg - quad;                                      // pure S.dt part
    CHECK((dg2 - (4.0 * quad + 2.0 * lin)).max_abs() < 1e-11);
}

TEST_CASE("A1 holds for the derived structure and breaks under t -> 2t") {
    auto a = sw_abundant(3);
    std::vector<Vec> pts = sample_points(a.box(), 30, 101, 0.1);
    auto rep = check_A1(a, pts, 1e-9);
    CHECK(rep.pass);

    // trace-freeness of the right-hand side
    MetricContext ctx{3};
    Vec x{1.3, 0.9, 2.1};
    PointTensor s = a.S().eval_stack(x, 0)[0];
    Vec dt = a.t().derivs(x, 1).grad;
    PointTensor rhs = digamma_projected(digamma_tensor(s, dt, ctx), ctx);
    for (int w = 0; w < 3; ++w)
        for (int y = 0; y < 3; ++y) {
            double tr = 0.0;
            for (int e = 0; e < 3; ++e) tr += rhs.at({e, e, y, w});
            CHECK(std::abs(tr) < 1e-12);
        }

    AbundantStructure broken = a;
    broken.t() = TPotential::closed_form(2.0 * a.t().value_expr());
    auto rep_broken = check_A1(broken, {{1.0, 1.0, 1.0}}, 1e-9);
    CHECK_FALSE(rep_broken.pass);
    CHECK(rep_broken.max_residual > 1e-3);
}

TEST_CASE("A1 single component at the symmetric point matches the hand chain") {
    // d_1 S_111 = -6/5 and the projected digamma gives exactly -3 * that
    auto a = sw_abundant(3);
    MetricContext ctx{3};
    Vec x{1.0, 1.0, 1.0};
    auto stack = a.S().eval_stack(x, 1);
    CHECK(stack[1].at({0, 0, 0, 0}) == doctest::Approx(-1.2));
    PointTensor rhs = digamma_projected(digamma(a, x), ctx);
    CHECK(rhs.at({0, 0, 0, 0}) == doctest::Approx(3.6));
    CHECK(stack[1].at({0, 0, 0, 0}) == doctest::Approx(-rhs.at({0, 0, 0, 0}) / 3.0));
}

TEST_CASE("A2 holds in both forms, the two forms agree, negative control fails") {
    auto a = sw_abundant(3);
    // hand Hessian at (1,1,1): diag(-3/5)
    auto td = a.t().derivs({1.0, 1.0, 1.0}, 2);
    CHECK(td.hess.at({0, 0}) == doctest::Approx(-0.6));
    CHECK(td.hess.at({0, 1}) == doctest::Approx(0.0));

    std::vector<Vec> pts = sample_points(a.box(), 30, 202, 0.1);
    auto rep = check_A2(a, pts, 1e-9);
    CHECK(rep.pass);
    CHECK(rep.extra("definition_form") < 1e-9);
    CHECK(rep.extra("construction_form") < 1e-9);
    CHECK(rep.extra("forms_agree") < 1e-10);

    AbundantStructure broken = a;
    broken.t() = TPotential::closed_form(2.0 * a.t().value_expr());
    auto rep_broken = check_A2(broken, {{1.0, 1.0, 1.0}}, 1e-9);
    CHECK_FALSE(rep_broken.pass);
    CHECK(rep_broken.max_residual == doctest::Approx(0.78));       // definition form
    CHECK(rep_broken.extra("construction_form") == doctest::Approx(2.4)); // 12/5
}

TEST_CASE("A3 with all decomposition parts holds for the derived structure") {
    for (int n : {3, 4}) {
        auto a = sw_abundant(n);
        std::vector<Vec> pts = sample_points(a.box(), 25, 303, 0.1);
        auto rep = check_A3(a, pts, 1e-9);
        CHECK(rep.pass);
        CHECK(rep.extra("weyl_part") < 1e-9);
        CHECK(rep.extra("trace_part") < 1e-9);
        CHECK(rep.extra("reduced_trace_free") < 1e-9);
        CHECK(rep.extra("perfect_square") < 1e-9);
    }
}

TEST_CASE("perfect-square identity numbers at the symmetric point") {
    auto a = sw_abundant(3);
    Vec x{1.0, 1.0, 1.0};
    PointTensor s = a.S().eval_stack(x, 0)[0];
    Vec dt = a.t().derivs(x, 1).grad;
    double grad2 = 0.0;
    for (double v : dt) grad2 += v * v;
    CHECK(grad2 == doctest::Approx(27.0 / 25));
    double s2 = 0.0;
    PointTensor scr = scr_s(s);
    for (int i = 0; i < 3; ++i) s2 += scr.at({i, i});
    CHECK(s2 == doctest::Approx(54.0 / 5));
    CHECK(s2 == doctest::Approx(10.0 * grad2));
}

TEST_CASE("A3 decomposition is exact algebra: parts pass at 10x whenever the full residual passes") {
    for (int n : {3, 4}) {
        auto a = sw_abundant(n);
        double tol = 1e-9;
        auto rep = check_A3(a, sample_points(a.box(), 40, 606, 0.1), tol);
        REQUIRE(rep.pass);
        for (const char* part : {"weyl_part", "trace_part", "reduced_trace_free", "perfect_square"})
            CHECK(rep.extra(part) <= 10.0 * tol);
    }
}

TEST_CASE("A3 on the trivial structure is exactly zero") {
    AbundantStructure a(3, DomainBox::cube(3, -2.0, 2.0));
    a.t() = TPotential::closed_form(ScalarFieldExpr::zero(3));
    auto rep = check_A3(a, {{0.5, -0.5, 0.2}}, 1e-14);
    CHECK(rep.max_residual == 0.0);
}

TEST_CASE("nine-B identities hold unconditionally on random pointwise data") {
    SplitMix64 rng(777);
    for (int rep = 0; rep < 200; ++rep) {
        int n = 3 + static_cast<int>(rng.next_u64() % 4); // 3..6
        MetricContext ctx{n};
        auto [s, dt] = random_pointwise_st(n, rng);
        auto res = nine_b_residuals_pointwise(s, dt, ctx);
        CHECK(res.scr_identity < 1e-11);
        CHECK(res.norm_identity < 1e-11);
    }
}

TEST_CASE("nine-B identities from the structure's own fields") {
    auto a = sw_abundant(3);
    std::vector<Vec> pts = sample_points(a.box(), 20, 404, 0.1);
    auto rep = check_9B_identities(a, pts, 1e-11);
    CHECK(rep.pass);
}

TEST_CASE("abundant suite passes and the structure file round-trips through JSON") {
    auto a = sw_abundant(3);
    json j = a.to_json();
    AbundantStructure b = AbundantStructure::from_json(j);
    std::vector<Vec> pts = sample_points(b.box(), 15, 505, 0.1);
    auto suite = run_abundant_suite(b, pts, 1e-9);
    CHECK(suite.pass());
}
