#include <doctest.h>

#include <frobsia/expr.hpp>

using frobsia::ScalarFieldExpr;
using frobsia::Vec;

TEST_CASE("parses sums of squared coordinates") {
    auto f = ScalarFieldExpr::parse("x1^2 + x2^2", 2);
    CHECK(f.value_at({1.0, 2.0}) == doctest::Approx(5.0));
    CHECK(f.value_at({-3.0, 0.5}) == doctest::Approx(9.25));
}

TEST_CASE("parses quotients and products") {
    auto f = ScalarFieldExpr::parse("1/x1", 3);
    CHECK(f.value_at({4.0, 1.0, 1.0}) == doctest::Approx(0.25));

    auto g = ScalarFieldExpr::parse("log(x1)*x1^2", 1);
    CHECK(g.value_at({2.0}) == doctest::Approx(std::log(2.0) * 4.0));
}

TEST_CASE("whitespace is insignificant") {
    auto a = ScalarFieldExpr::parse("x1*x2+ sin( x1 )", 2);
    auto b = ScalarFieldExpr::parse("x1 * x2 + sin(x1)", 2);
    CHECK(a.value_at({0.7, 1.3}) == doctest::Approx(b.value_at({0.7, 1.3})));
}

TEST_CASE("syntax errors carry the byte offset") {
    try {
        ScalarFieldExpr::parse("x1 + (x2 * ", 2);
        FAIL("expected parse_error");
    } catch (const frobsia::parse_error& e) {
        CHECK(e.offset() == 11);
    }
}

TEST_CASE("coordinate index out of range is rejected") {
    CHECK_THROWS_AS(ScalarFieldExpr::parse("x4 + 1", 3), frobsia::parse_error);
    CHECK_NOTHROW(ScalarFieldExpr::parse("x3 + 1", 3));
}

TEST_CASE("printer output re-parses to the same field") {
    const char* samples[] = {
        "x1^2 + x2^2",
        "1/x1",
        "log(x1)*x1^2 - sqrt(x1)",
        "-x1^2",
        "(x1 + x2)*(x1 - x2)/x2",
        "exp(-x1*x2) + cos(x2)^3",
        "2.5*x1^-2 + 0.125",
        "-(x1 + 1)^4",
    };
    for (const char* s : samples) {
        CAPTURE(s);
        auto f = ScalarFieldExpr::parse(s, 2);
        std::string printed = f.to_string();
        auto g = ScalarFieldExpr::parse(printed, 2);
        CHECK(g.to_string() == printed);
        Vec x{1.37, 0.82};
        CHECK(f.value_at(x) == doctest::Approx(g.value_at(x)).epsilon(1e-15));
    }
}

TEST_CASE("unary minus binds tighter than the exponent, per the grammar") {
    // base := ... | '-' base, so -x1^2 reads as (-x1)^2
    auto f = ScalarFieldExpr::parse("-x1^2", 1);
    CHECK(f.value_at({3.0}) == doctest::Approx(9.0));
    auto g = ScalarFieldExpr::parse("-(x1^2)", 1);
    CHECK(g.value_at({3.0}) == doctest::Approx(-9.0));
}

TEST_CASE("symbolic derivative agrees with jet derivatives") {
    const char* samples[] = {
        "x1^2*x2 + sin(x1*x2)",
        "log(x1)/x2 + sqrt(x1 + x2)",
        "exp(x1 - x2^2)*cos(x1)",
        "x1^-3 + x2^5/x1",
    };
    Vec x{1.31, 2.17};
    for (const char* s : samples) {
        CAPTURE(s);
        auto f = ScalarFieldExpr::parse(s, 2);
        auto jet = f.jet_at(x, 1);
        for (int c = 0; c < 2; ++c) {
            auto df = f.derivative(c);
            CHECK(df.value_at(x) == doctest::Approx(jet.d1(c)).epsilon(1e-12));
            // the derivative string must itself re-parse
            auto reparsed = ScalarFieldExpr::parse(df.to_string(), 2);
            CHECK(reparsed.value_at(x) == doctest::Approx(jet.d1(c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("poles are hard errors") {
    auto f = ScalarFieldExpr::parse("1/x1", 1);
    CHECK_THROWS_AS(f.value_at({0.0}), frobsia::eval_error);
    auto g = ScalarFieldExpr::parse("log(x1)", 1);
    CHECK_THROWS_AS(g.value_at({-2.0}), frobsia::eval_error);
    CHECK_THROWS_AS(g.jet_at({0.0}, 2), frobsia::eval_error);
    auto h = ScalarFieldExpr::parse("sqrt(x1)", 1);
    CHECK_THROWS_AS(h.jet_at({-1.0}, 1), frobsia::eval_error);
}

TEST_CASE("expression arithmetic composes trees") {
    auto a = ScalarFieldExpr::parse("x1^2", 2);
    auto b = ScalarFieldExpr::parse("x2", 2);
    auto c = 2.0 * (a - b) + a * b;
    Vec x{1.5, 0.5};
    CHECK(c.value_at(x) == doctest::Approx(2.0 * (2.25 - 0.5) + 2.25 * 0.5));
}
