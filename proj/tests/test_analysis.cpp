#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pipl/analysis.hpp"

using namespace pipl;

namespace {

constexpr double pi = std::numbers::pi;

Field ramp_on_left(const SpaceTimeGrid& g, double ramp) {
    return Field::sample_q(g, [&](Point x, double t) { return x[0] == g.lower(0) ? std::min(1.0, t / ramp) : 0.0; });
}

double relative_change(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

}  // namespace

TEST_CASE("weight base: positive, nondegenerate, sign condition reported") {
    auto g = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 17, 17, 8, 1.0);
    auto full = default_weight_base(g, DiffusionTensor::identity(), BoundaryPortion::full());
    CHECK(full.admissible);
    CHECK(full.min_interior > 0.0);
    CHECK(full.min_grad > 0.0);
    CHECK(full.sup == doctest::Approx(1.0));
    // observing the right face only leaves the left face with a favourable sign, but not top and bottom
    auto right = default_weight_base(g, DiffusionTensor::identity(), BoundaryPortion::neighborhood({Face::Right}));
    CHECK_FALSE(right.admissible);
    CHECK(!right.notes.empty());
    auto three = default_weight_base(g, DiffusionTensor::identity(),
                                     BoundaryPortion::neighborhood({Face::Right, Face::Top, Face::Bottom}));
    CHECK(three.admissible);
}

TEST_CASE("interior estimate: zero state gives ratio 0") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    auto r = carleman_check_1(Field::on_q(g), Field::on_q(g), {}, 2.0, 1.0);
    CHECK(r.ratio == 0.0);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == 0.0);
}

TEST_CASE("interior estimate: heat oracle ratios finite and stable under refinement") {
    auto coarse = SpaceTimeGrid::interval(0, 1, 33, 32, 1.0);
    auto fine = SpaceTimeGrid::interval(0, 1, 65, 64, 1.0);
    CarlemanConfig cfg;
    auto a = carleman_sweep_1(heat_oracle(coarse), Field{}, cfg, {1, 2, 4}, {1, 2});
    auto b = carleman_sweep_1(heat_oracle(fine), Field{}, cfg, {1, 2, 4}, {1, 2});
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::isfinite(a[i].ratio));
        CHECK(a[i].ratio > 0.0);
        CHECK(a[i].lhs >= 0.0);
        CHECK(a[i].rhs >= 0.0);
        CHECK(relative_change(a[i].ratio, b[i].ratio) < 0.2);
    }
}

TEST_CASE("interior estimate: ratio invariant under joint scaling") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> c(-50.0, 50.0);
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    Field u = heat_oracle(g);
    Field F = Field::sample_q(g, [](Point x, double t) { return x[0] * (1 - x[0]) * t; });
    auto base = carleman_check_1(u, F, {}, 2.0, 1.0);
    for (int i = 0; i < 5; ++i) {
        double s = c(rng);
        Field us = u, Fs = F;
        us *= s;
        Fs *= s;
        auto r = carleman_check_1(us, Fs, {}, 2.0, 1.0);
        CHECK(r.ratio == doctest::Approx(base.ratio).epsilon(1e-10));
        CHECK(r.log_scale == doctest::Approx(base.log_scale + std::log(s * s)).epsilon(1e-10));
    }
}

TEST_CASE("initial-layer estimate: heat oracle across lambda") {
    auto coarse = SpaceTimeGrid::interval(0, 1, 33, 32, 1.0);
    auto fine = SpaceTimeGrid::interval(0, 1, 65, 64, 1.0);
    CarlemanConfig cfg;
    cfg.K = 0.1;
    cfg.t0 = 0.25;
    cfg.L = 1.0;
    auto a = carleman_sweep_2(heat_oracle(coarse), Field{}, cfg, {1, 2, 4});
    auto b = carleman_sweep_2(heat_oracle(fine), Field{}, cfg, {1, 2, 4});
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::isfinite(a[i].ratio));
        CHECK(relative_change(a[i].ratio, b[i].ratio) < 0.2);
    }
}

TEST_CASE("initial-layer estimate: large lambda stays finite in log space") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 32, 1.0);
    CarlemanConfig cfg;
    auto r = carleman_check_2(heat_oracle(g), Field{}, cfg, 400.0);
    CHECK(std::isfinite(r.ratio));
    CHECK(r.dynamic_range > 300.0);
    CHECK(!r.notes.empty());
}

TEST_CASE("initial-layer estimate: zero state and the parameter gate") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    CarlemanConfig cfg;
    CHECK(carleman_check_2(Field::on_q(g), Field{}, cfg, 2.0).ratio == 0.0);
    cfg.L = 2.0;  // 1/(2L) = 0.25 < K + t0 = 0.3
    CHECK_THROWS_AS(carleman_check_2(heat_oracle(g), Field{}, cfg, 2.0), InvalidInput);
    cfg.L = 1.0;
    cfg.K = 0.0;
    CHECK_THROWS_AS(cfg.validate(1.0), InvalidInput);
}

TEST_CASE("report json carries the parameter point") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    auto j = report_json(carleman_check_1(heat_oracle(g), Field{}, {}, 2.0, 1.0));
    CHECK(j["lemma"] == "interior");
    CHECK(j["lambda"] == 2.0);
    CHECK(j["mu"] == 1.0);
}

TEST_CASE("maximum principle: zero data gives zero") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    auto c = max_principle_check(g, DiffusionTensor::identity(), Field::on_q(g), Field::on_q(g));
    CHECK(c.nonnegative);
    CHECK(c.min_value == 0.0);
    CHECK_FALSE(c.positive_beyond_first);
}

TEST_CASE("maximum principle: ramped data on one face") {
    auto g = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 17, 17, 32, 0.5);
    auto c = max_principle_check(g, DiffusionTensor::identity(), Field::on_q(g), ramp_on_left(g, 0.05));
    CHECK(c.nonnegative);
    CHECK(c.positive_beyond_first);
    CHECK(c.min_value >= -1e-8 * c.sup_norm);
}

TEST_CASE("maximum principle: random nonnegative potentials") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> amp(0.0, 200.0), freq(0.5, 4.0);
    auto g = SpaceTimeGrid::interval(0, 1, 33, 32, 1.0);
    for (int i = 0; i < 6; ++i) {
        const double a = amp(rng), w = freq(rng);
        Field q = Field::sample_q(g, [&](Point x, double t) { return a * (1 + std::sin(w * pi * x[0] + t)); });
        auto c = max_principle_check(g, DiffusionTensor::identity(), q, ramp_on_left(g, 0.05));
        CHECK(c.nonnegative);
    }
    Field big = Field::on_q(g, 1e4);
    CHECK(max_principle_check(g, DiffusionTensor::identity(), big, ramp_on_left(g, 0.05)).nonnegative);
}

TEST_CASE("maximum principle: negative boundary data rejected") {
    auto g = SpaceTimeGrid::interval(0, 1, 17, 16, 1.0);
    Field f = ramp_on_left(g, 0.1);
    f *= -1.0;
    CHECK_THROWS_AS(max_principle_check(g, DiffusionTensor::identity(), Field::on_q(g), f), InvalidInput);
}

TEST_CASE("non-uniqueness: distinct initial data with vanishing traces") {
    auto g = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 33, 33, 16, 0.5);
    auto d = nonuniqueness_demo(g);
    CHECK(d.valid);
    CHECK(d.trace_sup1 < 1e-10);
    CHECK(d.trace_sup2 < 1e-10);
    CHECK(d.g_diff > 0.1);
    CHECK(d.reproduction < 1e-10);

    NonuniquenessOptions half;
    half.collar = 0.05;
    half.radius = 0.2;
    half.centers = {{0.3, 0.5}, {0.7, 0.5}};
    auto fine = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 65, 65, 16, 0.5);
    auto h = nonuniqueness_demo(fine, half);
    CHECK(h.valid);

    NonuniquenessOptions same;
    same.centers = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK_THROWS_AS(nonuniqueness_demo(g, same), InvalidInput);
    NonuniquenessOptions wide;
    wide.radius = 0.45;
    CHECK_THROWS_AS(nonuniqueness_demo(g, wide), InvalidInput);
}

TEST_CASE("non-uniqueness: variable diffusion") {
    auto g = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 33, 33, 16, 0.5);
    auto gamma = DiffusionTensor::scalar(Expr::parse("1 + 0.5*x"), 0.5);
    auto d = nonuniqueness_demo(g, {}, gamma);
    CHECK(d.valid);
}

TEST_CASE("stability audit: equal data gives zero sides") {
    auto g = SpaceTimeGrid::interval(0, 1, 33, 32, 0.5);
    Field g1 = Field::sample_omega(g, [](Point x) { return std::sin(pi * x[0]); });
    Field h = Field::sample_omega(g, [](Point x) { return std::sin(2 * pi * x[0]); });
    auto a = stability_audit(g, DiffusionTensor::identity(), Nonlinearity(), g1, h, {0.0}, BoundaryPortion::full());
    REQUIRE(a.points.size() == 1);
    CHECK(a.points[0].lhs == 0.0);
    CHECK(a.points[0].dn_diff == 0.0);
}

TEST_CASE("stability audit: monotone family dominated by the fitted bound") {
    auto g = SpaceTimeGrid::interval(0, 1, 33, 32, 0.5);
    Field g1 = Field::sample_omega(g, [](Point x) { return std::sin(pi * x[0]); });
    Field h = Field::sample_omega(g, [](Point x) { return std::sin(2 * pi * x[0]); });
    auto a = stability_audit(g, DiffusionTensor::identity(), Nonlinearity(), g1, h, {1e-1, 1e-2, 1e-3, 1e-4},
                             BoundaryPortion::neighborhood({Face::Left}));
    CHECK(a.monotone_lhs);
    CHECK(a.monotone_dn);
    CHECK(a.bound_dominates);
    CHECK(a.C > 0.0);
    CHECK(a.delta0 > 0.0);
    CHECK(a.delta0 <= 0.5);
    for (const auto& p : a.points) CHECK(p.bound >= p.lhs);
}
