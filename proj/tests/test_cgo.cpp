#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pipl/cgo.hpp"

using namespace pipl;

namespace {

constexpr double pi = std::numbers::pi;
using cd = std::complex<double>;

Field bump_potential(const SpaceTimeGrid& g) {
    return Field::sample_q(g, [](Point x, double t) { return 2.0 * std::exp(-20 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + t); });
}

CGOParameters params(double rho, Direction d, double tau = 0.0) {
    CGOParameters p;
    p.rho = rho;
    p.direction = d;
    p.tau = tau;
    return p;
}

}  // namespace

TEST_CASE("parameter validation") {
    CGOParameters p;
    p.omega = {0.6, 0.6};
    p.xi = {0.0, 0.0};
    CHECK_THROWS_AS(p.validate(2), InvalidInput);
    p.omega = {0.6, 0.8};
    p.xi = {1.0, 0.0};
    CHECK_THROWS_AS(p.validate(2), InvalidInput);
    p.xi = {0.8, -0.6};
    CHECK_NOTHROW(p.validate(2));
    CHECK_THROWS_AS(p.validate(1), InvalidInput);
    CGOParameters c;
    c.carrier = CarrierKind::ComplexExponential;
    CHECK_THROWS_AS(c.validate(1), InvalidInput);
    c.xi = {2.0};
    CHECK_NOTHROW(c.validate(1));
}

TEST_CASE("ramp profiles and the product symbol") {
    auto p = params(16, Direction::Forward, 3.0);
    auto b = params(16, Direction::Backward);
    CHECK(std::abs(theta(p, {0.3, 0.0}, 0.0, 1.0)) == 0.0);
    CHECK(std::abs(theta(b, {0.3, 0.0}, 1.0, 1.0)) == 0.0);
    CHECK(phi_rho(16, 0.0, 1.0) == doctest::Approx(0.0).scale(1.0));
    CHECK(phi_rho(16, 1.0, 1.0) == doctest::Approx(0.0).scale(1.0));
    double prev = 1.0;
    for (double r : {4.0, 16.0, 64.0, 256.0}) {
        double gap = 1.0 - phi_rho(r, 0.5, 1.0);
        CHECK(gap < prev);
        prev = gap;
    }
    CHECK(prev < 1e-10);
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 9, 8, 1.0);
    auto s0 = product_symbol(g, params(8, Direction::Forward), params(8, Direction::Backward));
    for (auto v : s0.values()) CHECK(v.imag() == 0.0);
    CHECK_THROWS_AS(product_symbol(g, params(8, Direction::Forward), params(9, Direction::Backward)), InvalidInput);
    CHECK_THROWS_AS(product_symbol(g, params(8, Direction::Forward), params(8, Direction::Forward)), InvalidInput);
}

TEST_CASE("complex-exponential carriers multiply to the Fourier oscillation") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 17, 16, 0.5);
    CGOParameters f;
    f.carrier = CarrierKind::ComplexExponential;
    f.xi = {2 * pi};
    f.tau = -3.0;
    auto b = f;
    b.direction = Direction::Backward;
    auto cp = carrier_product(g, f, b);
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n = 0; n < g.space_nodes(); ++n) {
            cd want = std::exp(cd(0, -1) * (2 * pi * g.coord(n)[0] - 3.0 * g.time(k)));
            CHECK(std::abs(cp.at(k, n) - want) < 1e-12);
        }
}

TEST_CASE("materialized real CGO agrees with a direct physical solve") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 201, 800, 0.5);
    auto q = bump_potential(g);
    SolverSettings s;
    s.scheme = TimeScheme::CrankNicolson;
    auto sol = build(g, q, params(2.0, Direction::Forward), s);
    auto u = materialize(sol);
    Field ur = Field::on_q(g);
    for (std::size_t i = 0; i < ur.values().size(); ++i) {
        CHECK(std::abs(u.values()[i].imag()) < 1e-12 * (1 + std::abs(u.values()[i])));
        ur.values()[i] = u.values()[i].real();
    }
    auto direct = solve_linear(g, DiffusionTensor::identity(), q, ur, Field::on_omega(g), Field{}, s);
    CHECK(norm(direct.solution - ur, NormSpace::L2Q) < 1e-3 * norm(ur, NormSpace::L2Q));
}

TEST_CASE("backward CGO satisfies the backward equation after materialization") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 201, 800, 0.5);
    auto q = bump_potential(g);
    SolverSettings s;
    s.scheme = TimeScheme::CrankNicolson;
    auto sol = build(g, q, params(2.0, Direction::Backward), s);
    auto v = materialize(sol);
    Field vr = Field::on_q(g);
    for (std::size_t i = 0; i < vr.values().size(); ++i) vr.values()[i] = v.values()[i].real();
    auto direct = solve_backward(g, DiffusionTensor::identity(), q, Field::on_omega(g), vr, Field{}, s);
    CHECK(norm(direct.solution - vr, NormSpace::L2Q) < 1e-3 * norm(vr, NormSpace::L2Q));
    for (int n = 0; n < g.space_nodes(); ++n) CHECK(std::abs(sol.profile.at(g.time_steps(), n)) == 0.0);
}

TEST_CASE("remainder norm decreases in rho with small residual") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 128, 256, 1.0);
    auto q = bump_potential(g);
    for (auto dir : {Direction::Forward, Direction::Backward}) {
        auto sweep = remainder_sweep(g, q, params(8, dir, 2 * pi), {8, 16, 32, 64});
        for (std::size_t i = 1; i < sweep.size(); ++i) CHECK(sweep[i].remainder_norm < sweep[i - 1].remainder_norm);
        CHECK(sweep.back().remainder_norm < 0.5 * sweep.front().remainder_norm);
        for (const auto& e : sweep) {
            CHECK(e.residual < 1e-9);
            CHECK(e.max_materialized < kMaterializeLimit);
        }
    }
}

TEST_CASE("partial CGO vanishes on the outflow portion") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 1.0}, 17, 17, 16, 0.5);
    CGOParameters p;
    p.omega = {0.6, 0.8};
    p.xi = {0.8, -0.6};
    p.rho = 4;
    p.partial = true;
    auto sol = build(g, Field{}, p);
    auto nodes = classify_boundary(g, BoundaryPortion::directional(p.omega, 0.0, -1));
    CHECK(!nodes.empty());
    for (int k = 0; k < g.time_levels(); ++k)
        for (int b : nodes) CHECK(sol.profile.at(k, b) == cd(0.0));
    CHECK(sol.boundary_record.find("profile = 0") != std::string::npos);
}

TEST_CASE("pairing is exact for pure profiles and approaches the Fourier sample") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 1.0);
    auto f = Field::sample_q(g, [](Point x, double t) {
        return std::exp(-30 * (x[0] - 0.5) * (x[0] - 0.5) - 30 * (t - 0.5) * (t - 0.5));
    });
    double tau = 2 * pi;
    CGOSolution a, b;
    a.params = params(16, Direction::Forward, tau);
    b.params = params(16, Direction::Backward);
    a.profile = ComplexField::sample_q(g, [&](Point x, double t) { return theta(a.params, x, t, 1.0); });
    b.profile = ComplexField::sample_q(g, [&](Point x, double t) { return theta(b.params, x, t, 1.0); });
    auto exact = pairing(f, a, b);
    CHECK(std::abs(exact.value - exact.leading) < 1e-14);

    auto q1 = bump_potential(g);
    auto q2 = Field::on_q(g, 0.5);
    cd fhat = fourier_sample(f, {0.0}, tau);
    double prev = 1e300;
    for (double r : {8.0, 16.0, 32.0, 64.0}) {
        auto s1 = build(g, q1, params(r, Direction::Forward, tau));
        auto s2 = build(g, q2, params(r, Direction::Backward));
        double gap = std::abs(pairing(f, s1, s2).value - fhat);
        CHECK(gap < prev);
        prev = gap;
    }
}

TEST_CASE("materialization guard") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 64, 1.0);
    auto sol = build(g, Field{}, params(16, Direction::Forward));
    CHECK_THROWS_AS(materialize(sol), SolverError);
}
