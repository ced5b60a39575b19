#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "pipl/grid.hpp"

using namespace pipl;

TEST_CASE("grid coordinates are reproducible from indices") {
    auto g = SpaceTimeGrid::rectangle({0.0, -1.0}, {2.0, 1.0}, 5, 9, 4, 0.5);
    CHECK(g.space_nodes() == 45);
    CHECK(g.coord(g.node(4, 8))[0] == 2.0);
    CHECK(g.coord(g.node(4, 8))[1] == 1.0);
    CHECK(g.coord(g.node(2, 3))[1] == -1.0 + 3 * 0.25);
    CHECK(g.time(g.time_steps()) == 0.5);
    CHECK(g.dt() == doctest::Approx(0.125));
    CHECK_THROWS_AS(SpaceTimeGrid::interval(0, 1, 2, 4, 1.0), InvalidInput);
    CHECK_THROWS_AS(SpaceTimeGrid::interval(0, 1, 5, 1, 1.0), InvalidInput);
}

TEST_CASE("directional portion in 1D picks the face with positive normal component") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 11, 4, 1.0);
    auto nodes = classify_boundary(g, BoundaryPortion::directional({1.0}, 0.0, 1));
    REQUIRE(nodes.size() == 1);
    CHECK(g.coord(nodes[0])[0] == 1.0);
}

TEST_CASE("directional portions on a rectangle") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 1.0}, 5, 5, 4, 1.0);
    auto faces_of = [&](const BoundaryPortion& p) {
        std::vector<Face> out;
        for (const auto& e : p.resolve(g))
            if (out.empty() || out.back() != e.face) out.push_back(e.face);
        return out;
    };
    CHECK(faces_of(BoundaryPortion::directional({1.0, 0.0}, 0.5, 1)) == std::vector<Face>{Face::Right});
    // nu.omega = 0 on bottom and top, included by the non-strict rule at aperture 0.
    CHECK(faces_of(BoundaryPortion::directional({1.0, 0.0}, 0.0, -1)) ==
          std::vector<Face>{Face::Left, Face::Bottom, Face::Top});
    CHECK_THROWS_AS(BoundaryPortion::directional({1.0, 1.0}, 0.0, 1), InvalidInput);
}

TEST_CASE("directional portions cover the boundary and overlap only on tangential faces") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi);
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 2.0}, 6, 7, 3, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        double a = trial < 4 ? trial * std::numbers::pi / 2 : ang(rng);
        std::vector<double> w{std::cos(a), std::sin(a)};
        double len = std::hypot(w[0], w[1]);
        w[0] /= len;
        w[1] /= len;
        auto plus = BoundaryPortion::directional(w, 0.0, 1).resolve(g);
        auto minus = BoundaryPortion::directional(w, 0.0, -1).resolve(g);
        std::vector<BoundaryEntry> all = BoundaryPortion::full().resolve(g);
        for (const auto& e : all) {
            bool in_p = std::find(plus.begin(), plus.end(), e) != plus.end();
            bool in_m = std::find(minus.begin(), minus.end(), e) != minus.end();
            CHECK((in_p || in_m));
            if (in_p && in_m) {
                auto nu = g.normal(e.face);
                CHECK(std::abs(nu[0] * w[0] + nu[1] * w[1]) < 1e-12);
            }
        }
    }
}

TEST_CASE("named and neighborhood portions resolve to boundary nodes") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 1.0}, 4, 4, 3, 1.0);
    auto nb = classify_boundary(g, BoundaryPortion::neighborhood({Face::Left, Face::Bottom}));
    CHECK(nb.size() == 7);
    CHECK_THROWS_AS(classify_boundary(g, BoundaryPortion::named({5})), InvalidInput);
    auto corner = BoundaryPortion::named({0}).resolve(g);
    CHECK(corner.size() == 2);  // one entry per adjacent face
    auto full = classify_boundary(g, BoundaryPortion::full());
    CHECK(full == g.boundary_nodes());
}

TEST_CASE("norms: zero, constant, sine and tag mismatch") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 101, 4, 1.0);
    CHECK(norm(Field::on_omega(g), NormSpace::L2Omega) == 0.0);
    CHECK(norm(Field::on_omega(g, 1.0), NormSpace::L2Omega) == doctest::Approx(1.0).epsilon(1e-14));
    auto s = Field::sample_omega(g, [](Point x) { return std::sin(std::numbers::pi * x[0]); });
    CHECK(norm(s, NormSpace::L2Omega) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK_THROWS_AS(norm(s, NormSpace::L2Q), InvalidInput);
    auto scaled = -3.0 * s;
    CHECK(norm(scaled, NormSpace::L2Omega) == doctest::Approx(3.0 * norm(s, NormSpace::L2Omega)));
}

TEST_CASE("piecewise-linear fields integrate exactly") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {2.0, 1.0}, 9, 5, 6, 1.5);
    auto f = Field::sample_q(g, [](Point x, double t) { return 1.0 + 2.0 * x[0] - x[1] + 0.5 * t; });
    // Exact integral of an affine function over [0,2]x[0,1]x[0,1.5].
    double exact = 3.0 * (1.0 + 2.0 * 1.0 - 0.5 + 0.5 * 0.75);
    CHECK(integrate(f) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("norm converges at second order") {
    auto err = [](int n) {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, n + 1, n, 1.0);
        auto f = Field::sample_q(g, [](Point x, double t) { return std::exp(x[0]) * std::cos(t); });
        double exact = std::sqrt((std::exp(2.0) - 1.0) / 2.0 * (0.5 + std::sin(2.0) / 4.0));
        return std::abs(norm(f, NormSpace::L2Q) - exact);
    };
    double order = std::log2(err(32) / err(64));
    CHECK(order >= 1.9);
}

TEST_CASE("boundary weights use counting measure in 1D and trapezoid runs in 2D") {
    auto g1 = SpaceTimeGrid::interval(0.0, 1.0, 5, 4, 1.0);
    auto b1 = ComplexField::on_boundary(g1, BoundaryPortion::full().resolve(g1), 1.0);
    CHECK(norm(b1, NormSpace::L2Sigma) == doctest::Approx(std::sqrt(2.0)));
    auto g2 = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 2.0}, 5, 5, 4, 1.0);
    auto b2 = Field::on_boundary(g2, BoundaryPortion::full().resolve(g2), 1.0);
    CHECK(integrate(b2) == doctest::Approx(6.0));
}

TEST_CASE("field CSV round trip") {
    auto g = SpaceTimeGrid::rectangle({0.0, 0.0}, {1.0, 1.0}, 4, 3, 2, 1.0);
    auto f = Field::sample_q(g, [](Point x, double t) { return std::sin(x[0] + 3 * x[1]) / 3.0 + t; });
    std::stringstream ss;
    write_field_csv(ss, f);
    CHECK(ss.str().rfind("# shape: 4,3,3\n", 0) == 0);
    auto back = read_field_csv(ss, g);
    CHECK(back.values() == f.values());
    std::stringstream bad("# shape: 5,3,3\n");
    CHECK_THROWS_AS(read_field_csv(bad, g), InvalidInput);
}
