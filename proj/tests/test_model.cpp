#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pipl/model.hpp"

using namespace pipl;

namespace {

Nonlinearity nl(const char* text) { return Nonlinearity(Expr::parse(text)); }

}  // namespace

TEST_CASE("parser handles precedence, unary minus and right-associative power") {
    EvalPoint p{2.0, 0.0, 0.0, 3.0};
    CHECK(Expr::parse("1 + 2*3").eval(p) == 7.0);
    CHECK(Expr::parse("-x^2").eval(p) == -4.0);
    CHECK(Expr::parse("2^3^2").eval(p) == 512.0);
    CHECK(Expr::parse("2^-1").eval(p) == 0.5);
    CHECK(Expr::parse("(x+u)/5").eval(p) == 1.0);
    CHECK(Expr::parse("cos(pi)").eval(p) == doctest::Approx(-1.0));
    CHECK(Expr::parse("1.5e-1*2").eval(p) == doctest::Approx(0.3));
}

TEST_CASE("parse errors report the byte offset") {
    try {
        Expr::parse("sin(");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
    try {
        Expr::parse("x + foo(1)");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(Expr::parse("x )"), ParseError);
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
}

TEST_CASE("printing round-trips through the parser") {
    for (const char* text : {"sin(x)*exp(u) - 2*u^3/(1 + t)", "-(x - u)^2", "abs(u)*tanh(u) - ln(2 + x)",
                             "2^(x - 1)", "x - -2"}) {
        auto e = Expr::parse(text);
        auto back = Expr::parse(e.str());
        EvalPoint p{0.3, 0.0, 0.7, -0.4};
        CHECK(back.eval(p) == doctest::Approx(e.eval(p)).epsilon(1e-14));
    }
}

TEST_CASE("evaluate derivatives") {
    CHECK(nl("u^3").evaluate({0.0, 0.0}, 0.0, 2.0, 2) == doctest::Approx(12.0));
    auto lin = nl("(1 + x*t)*u");
    CHECK(lin.evaluate({0.5, 0.0}, 0.4, -7.0, 1) == doctest::Approx(1.2));
    CHECK(lin.is_linear());
    CHECK(nl("sin(x)*exp(u)").evaluate({std::numbers::pi / 2, 0.0}, 0.0, 0.0, 3) ==
          doctest::Approx(1.0));
    CHECK(nl("u^3").evaluate({0.0, 0.0}, 0.0, 1.5, 10) == 0.0);
}

TEST_CASE("domain errors carry the evaluation point") {
    auto b = nl("ln(u)");
    try {
        b.evaluate({0.25, 0.0}, 0.5, -1.0);
        FAIL("expected domain error");
    } catch (const DomainError& e) {
        std::string msg = e.what();
        CHECK(msg.find("ln") != std::string::npos);
        CHECK(msg.find("x=0.25") != std::string::npos);
        CHECK(msg.find("u=-1") != std::string::npos);
    }
    CHECK_THROWS_AS(nl("1/(u - 1)").evaluate({0.0, 0.0}, 0.0, 1.0), DomainError);
}

TEST_CASE("first derivative agrees with central differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    std::vector<Nonlinearity> cases{nl("sin(x*u) + u^3*exp(-t)"), nl("tanh(2*u)*cos(x) + abs(u)*u"),
                                    nl("u/(2 + u^2) + ln(1 + u^2)")};
    for (const auto& b : cases) {
        for (int s = 0; s < 40; ++s) {
            Point x{U(rng), 0.0};
            double t = std::abs(U(rng)), u = U(rng);
            double exact = b.evaluate(x, t, u, 1);
            double e1 = std::abs(exact - (b.evaluate(x, t, u + 1e-3) - b.evaluate(x, t, u - 1e-3)) / 2e-3);
            double e2 = std::abs(exact - (b.evaluate(x, t, u + 5e-4) - b.evaluate(x, t, u - 5e-4)) / 1e-3);
            // O(du^2): halving du divides the error by about four.
            CHECK(e1 < 1e-5);
            if (e1 > 1e-10) CHECK(e2 < 0.35 * e1);
        }
    }
}

TEST_CASE("freeze_quotient branches") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 5, 2, 1.0);
    auto q = freeze_quotient(nl("u^3"), Field::on_q(g, 2.0));
    for (double v : q.values()) CHECK(v == doctest::Approx(4.0));
    q = freeze_quotient(nl("u^3"), Field::on_q(g, 0.0));
    for (double v : q.values()) CHECK(v == 0.0);
    q = freeze_quotient(nl("sin(u)"), Field::on_q(g, 1e-12));
    for (double v : q.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    // Continuity across the switch.
    auto below = freeze_quotient(nl("exp(u) - 1"), Field::on_q(g, 0.999e-8));
    auto above = freeze_quotient(nl("exp(u) - 1"), Field::on_q(g, 1.001e-8));
    CHECK(std::abs(below.at(0, 0) - above.at(0, 0)) < 1e-8);
}

TEST_CASE("freeze_quotient consistency b(z) - q z -> 0") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 5, 2, 1.0);
    auto b = nl("sin(x + 1)*(u + u^2) + exp(u) - 1");
    double prev = 1e300;
    for (double z : {1e-1, 1e-3, 1e-5, 1e-7, 1e-9}) {
        auto q = freeze_quotient(b, Field::on_q(g, z));
        double worst = 0.0;
        for (int n = 0; n < g.space_nodes(); ++n)
            worst = std::max(worst, std::abs(b.evaluate(g.coord(n), 0.0, z) - q.at(0, n) * z));
        CHECK(worst <= prev + 1e-15);
        prev = worst;
    }
    CHECK(prev < 1e-14);
}

TEST_CASE("class gating rejects admissible-analytic with nonzero b(., 0)") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 5, 2, 1.0);
    CHECK_NOTHROW(Nonlinearity::checked(Expr::parse("x*u^2"), NonlinearityClass::AdmissibleAnalytic, g));
    CHECK_THROWS_AS(Nonlinearity::checked(Expr::parse("u^2 + x*(x - 0.5)"),
                                          NonlinearityClass::AdmissibleAnalytic, g),
                    InvalidInput);
    CHECK_THROWS_AS(Nonlinearity::checked(Expr::parse("u^2"), NonlinearityClass::LinearPotential, g),
                    InvalidInput);
    auto bt = Nonlinearity::glued(Expr::parse("u + 1"), Expr::parse("u^3"), 0.5);
    CHECK_NOTHROW(bt.validate(g));
    CHECK(bt.evaluate({0.0, 0.0}, 0.25, 2.0) == 3.0);
    CHECK(bt.evaluate({0.0, 0.0}, 0.75, 2.0) == 8.0);
    auto bad = Nonlinearity::glued(Expr::parse("u"), Expr::parse("u + 1"), 0.5);
    CHECK_THROWS_AS(bad.validate(g), InvalidInput);
}

TEST_CASE("growth check") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 5, 2, 1.0);
    auto bounded = check_growth(nl("sin(u)"), g, 1e6, 200);
    CHECK(bounded.satisfies);
    CHECK(bounded.tail_max < 0.5);
    CHECK(check_growth(nl("u*ln(1 + u^2)^0.25"), g, 1e6, 200).satisfies);
    auto quad = check_growth(nl("u^2"), g, 1e6, 200);
    CHECK_FALSE(quad.satisfies);
    CHECK(quad.curve.size() == 200);
}

TEST_CASE("diffusion tensor ellipticity") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 1.0}, 5, 5, 2, 1.0);
    DiffusionTensor ok(Expr::parse("1 + 0.5*x"), Expr::parse("0.2"), Expr::parse("1"), 0.5);
    CHECK_NOTHROW(ok.check_ellipticity(g));
    DiffusionTensor bad(Expr::parse("1"), Expr::parse("0.9"), Expr::parse("1"), 0.5);
    CHECK_THROWS_AS(bad.check_ellipticity(g), InvalidInput);
    CHECK(DiffusionTensor::identity().is_identity());
}

TEST_CASE("Taylor table") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 5, 2, 1.0);
    auto base = Field::sample_q(g, [](Point x, double t) { return x[0] + t; });
    auto table = taylor_table(nl("u^3"), base, 4);
    REQUIRE(table.coefficients.size() == 5);
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n = 0; n < g.space_nodes(); ++n) {
            double u = base.at(k, n);
            CHECK(table.coefficients[0].at(k, n) == doctest::Approx(u * u * u));
            CHECK(table.coefficients[3].at(k, n) == 6.0);
            CHECK(table.coefficients[4].at(k, n) == 0.0);
        }
}
