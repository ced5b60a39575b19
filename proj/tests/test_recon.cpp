#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pipl/recon.hpp"

using namespace pipl;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<ProfileMeasurement> measurements(const SpaceTimeGrid& g, const Field& q_truth, double rho, DataMode mode) {
    std::vector<ProfileMeasurement> out;
    for (const auto& p : probe_lattice(g, rho, 4, mode)) out.push_back(measure_profile(g, q_truth, p, mode));
    return out;
}

Field separable_bump(const SpaceTimeGrid& g) {
    return Field::sample_q(g, [](Point x, double t) { return std::exp(-8 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + 0.5 * t); });
}

Field sine_initial(const SpaceTimeGrid& g) {
    return Field::sample_omega(g, [](Point x) { return std::sin(pi * x[0]); });
}

}  // namespace

TEST_CASE("potential recovery: identical models give a zero difference") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
    Field q = Field::sample_q(g, [](Point x, double) { return 0.3 * x[0]; });
    auto r = recover_potential(g, q, measurements(g, q, 4, DataMode::Full), {});
    CHECK(norm(r.result.recovered, NormSpace::L2Q) <= 1e-6);
}

TEST_CASE("potential recovery: smooth bump within 20 percent") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 1.0);
    Field q_ref = Field::on_q(g);
    Field diff = separable_bump(g);
    Field q_truth = q_ref - diff;
    auto r = recover_potential(g, q_ref, measurements(g, q_truth, 4, DataMode::Full), {}, &diff);
    CHECK(r.result.has_truth);
    CHECK(r.result.truth_error <= 0.2);
    CHECK(r.samples.conjugate_defect() <= 1e-3);
    CHECK(r.result.residuals.size() >= 2);
    CHECK(r.result.residuals.back() < r.result.residuals.front());
}

TEST_CASE("potential recovery: constant difference keeps its mean") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
    const double c = 0.5;
    Field q_truth = Field::on_q(g, -c);
    auto r = recover_potential(g, Field::on_q(g), measurements(g, q_truth, 4, DataMode::Full), {});
    CHECK(std::abs(integrate(r.result.recovered) - c) <= 0.1 * c);
}

TEST_CASE("potential recovery: partial data with a known region") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 49, 96, 1.0);
    Field diff = Field::sample_q(g, [](Point x, double t) {
        double s = x[0] - 0.3;
        return std::abs(s) < 0.25 ? std::pow(std::cos(2 * pi * s), 2) * (1 + t) : 0.0;
    });
    Field q_truth = Field::on_q(g) - diff;
    PotentialOptions o;
    o.mode = DataMode::Partial;
    o.known_lo = 0.6;
    o.known_hi = 1.0;
    auto r = recover_potential(g, Field::on_q(g), measurements(g, q_truth, 4, DataMode::Partial), o, &diff);
    CHECK(r.result.truth_error <= 0.3);
    CHECK(r.samples.conjugate_defect() <= 1e-3);
    Field wrong = separable_bump(g);
    CHECK_THROWS_AS(recover_potential(g, Field::on_q(g), measurements(g, q_truth, 4, DataMode::Partial), o, &wrong),
                    InvalidInput);
}

TEST_CASE("potential recovery rejects an under-resolved lattice") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 17, 32, 1.0);
    auto data = measurements(g, Field::on_q(g), 4, DataMode::Full);
    data.resize(3);
    CHECK_THROWS_AS(recover_potential(g, Field::on_q(g), data, {}), InvalidInput);
}

TEST_CASE("integral identity holds to discretization level") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 128, 128, 1.0);
    Field q_ref = Field::on_q(g);
    Field q_truth = q_ref - separable_bump(g);
    for (double tau : {0.0, pi, -2 * pi}) {
        CGOParameters p;
        p.rho = 2;
        p.tau = tau;
        auto c = identity_check(g, q_truth, q_ref, p);
        CHECK(c.relative_gap <= 0.05);
    }
    CGOParameters p;
    p.rho = 2;
    p.carrier = CarrierKind::ComplexExponential;
    p.xi = {pi};
    p.tau = pi;
    CHECK(identity_check(g, q_truth, q_ref, p).relative_gap <= 0.05);
}

TEST_CASE("positive solutions") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
    Field f = ramped_probe(g, [](Point, double) { return 1.0; }, 0.05);
    auto s = positive_solution(g, DiffusionTensor::identity(), Field::on_q(g), f);
    CHECK(s.min_interior > 0.0);
    CHECK_THROWS_AS(positive_solution(g, DiffusionTensor::identity(), Field::on_q(g), Field::on_q(g)), DomainError);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 5.0);
    for (int trial = 0; trial < 5; ++trial) {
        double a = U(rng), b = U(rng);
        Field q = Field::sample_q(g, [&](Point x, double t) { return a * x[0] * x[0] + b * t; });
        CHECK(positive_solution(g, DiffusionTensor::identity(), q, f).min_interior > 0.0);
    }
}

TEST_CASE("Taylor recovery of a cubic coefficient") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
    Nonlinearity truth(Expr::parse("exp(-4*(x-0.5)^2)*(1+0.5*t)*u^3"));
    Field d3 = Field::sample_q(g, [](Point x, double t) { return 6 * std::exp(-4 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + 0.5 * t); });
    auto r = recover_taylor(g, truth, Nonlinearity(), {}, &d3);
    CHECK(r.truth_error <= 0.25);
    CHECK(r.regularization.rule.find("weighted-ls") != std::string::npos);
    auto same = recover_taylor(g, truth, truth, {});
    CHECK(same.recovered.max_abs() <= 1e-8);
}

TEST_CASE("Taylor recovery of a constant quadratic coefficient") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
    const double c = 0.7;
    TaylorOptions o;
    o.order = 2;
    auto r = recover_taylor(g, Nonlinearity(Expr::parse("0.7*u^2")), Nonlinearity(), o);
    CHECK(std::abs(integrate(r.recovered) - 2 * c) <= 0.15 * 2 * c);
}

TEST_CASE("Taylor division masks small products") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 17, 32, 1.0);
    TaylorOptions o;
    o.method = TaylorMethod::Division;
    auto r = recover_taylor(g, Nonlinearity(Expr::parse("u^3")), Nonlinearity(), o);
    CHECK_FALSE(r.masked.empty());
    for (int i : r.masked) CHECK(r.recovered.values()[static_cast<std::size_t>(i)] == 0.0);
    CHECK_THROWS_AS(recover_taylor(g, Nonlinearity(Expr::parse("1+u^3")), Nonlinearity(), o), InvalidInput);
}

TEST_CASE("initial data recovery") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
    const auto id = DiffusionTensor::identity();
    auto truth = sine_initial(g);
    auto zero = recover_initial(g, id, Nonlinearity(), passive_map(g, id, Nonlinearity(), Field::on_omega(g),
                                                                   BoundaryPortion::full()), {});
    CHECK(norm(zero.recovered, NormSpace::L2Omega) <= 1e-12);

    auto lin = recover_initial(g, id, Nonlinearity(), passive_map(g, id, Nonlinearity(), truth, BoundaryPortion::full()),
                               {}, &truth);
    CHECK(lin.truth_error <= 0.1);
    Nonlinearity cubic(Expr::parse("0.1*u^3"));
    auto non = recover_initial(g, id, cubic, passive_map(g, id, cubic, truth, BoundaryPortion::full()), {}, &truth);
    CHECK(non.truth_error <= std::max(2 * lin.truth_error, 1e-3));

    auto coarse = SpaceTimeGrid::interval(0.0, 1.0, 17, 32, 0.5);
    auto tc = sine_initial(coarse);
    auto rc = recover_initial(coarse, id, Nonlinearity(),
                              passive_map(coarse, id, Nonlinearity(), tc, BoundaryPortion::full()), {}, &tc);
    CHECK(lin.truth_error < rc.truth_error);
}

TEST_CASE("initial data recovery from one endpoint with noise") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 0.5);
    const auto id = DiffusionTensor::identity();
    auto truth = sine_initial(g);
    auto gamma0 = BoundaryPortion::named({0});
    auto clean = passive_map(g, id, Nonlinearity(), truth, gamma0);
    auto noisy = add_noise(clean, NoiseModel::GaussianRelative, 1e-2, 5);
    DNMeasurement diff = noisy;
    diff.values -= clean.values;
    InitialOptions o;
    o.noise_level = measurement_norm(diff);
    auto r = recover_initial(g, id, Nonlinearity(), noisy, o, &truth);
    CHECK(r.converged);
    CHECK(r.regularization.rule == "morozov discrepancy");
    CHECK(r.residuals.back() <= o.tau * o.noise_level);
    CHECK(r.truth_error <= 0.2);
}

TEST_CASE("stability curve shape") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
    auto truth = sine_initial(g);
    auto c = stability_curve(g, DiffusionTensor::identity(), Nonlinearity(), truth, BoundaryPortion::full(),
                             {1e-1, 1e-2, 1e-3, 1e-4}, 5, 7);
    CHECK(c.points.size() == 20);
    CHECK(c.spearman >= 0.9);
    CHECK(c.two_term_residual <= c.linear_residual);
    CHECK(c.delta0 > 0.0);
    for (const auto& p : c.points) CHECK(c.delta0 * p.dn_diff_norm < 1.0);
    CHECK(c.floor_error <= c.points.back().error * 10);
}

TEST_CASE("spearman rank correlation") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 1, 2, 2}, {1, 2, 3, 4}) == doctest::Approx(2.0 / std::sqrt(5.0)));
}

TEST_CASE("null control") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
    const auto id = DiffusionTensor::identity();
    auto zero = null_control(g, id, Nonlinearity(), Field::on_omega(g), 0.4, BoundaryPortion::full());
    CHECK(zero.terminal_norm == 0.0);
    CHECK(zero.control.max_abs() == 0.0);

    auto r = null_control(g, id, Nonlinearity(), sine_initial(g), 0.4, BoundaryPortion::full());
    CHECK(r.uncontrolled_norm >= 100 * r.terminal_norm);
    CHECK_FALSE(r.partial_steering);
    for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] * (1 + 1e-12));
    for (int k = r.switch_level + 1; k < g.time_levels(); ++k)
        for (int n : g.boundary_nodes()) CHECK(r.control.at(k, n) == 0.0);
    for (int n = 0; n < g.space_nodes(); ++n) CHECK(r.control.at(0, n) == 0.0);

    auto glued = Nonlinearity::glued(Expr::parse("0.5*u^3"), Expr::parse("u^3+2*u"), 0.4);
    auto b = null_control(g, id, glued, sine_initial(g), 0.4, BoundaryPortion::full());
    CHECK(b.uncontrolled_norm >= 100 * b.terminal_norm);
    CHECK(b.continuation_max <= 10 * b.terminal_norm);

    auto one = null_control(g, id, Nonlinearity(), sine_initial(g), 0.4, BoundaryPortion::named({0}));
    CHECK(one.terminal_norm < one.uncontrolled_norm);
}

TEST_CASE("Runge approximation") {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
    Field q = Field::on_q(g);
    CGOParameters p;
    p.rho = 2;
    p.tau = 2 * pi;
    auto v = materialize(build(g, q, p));
    Field target = Field::on_q(g);
    for (std::size_t i = 0; i < target.values().size(); ++i) target.values()[i] = v.values()[i].real();
    for (auto mode : {DataMode::Full, DataMode::Partial}) {
        RungeOptions o;
        o.mode = mode;
        if (mode == DataMode::Partial) o.region_lo = 0.6;
        auto fits = runge_fit(g, DiffusionTensor::identity(), q, target, {4, 8, 16, 32}, o);
        for (std::size_t i = 1; i < fits.size(); ++i) CHECK(fits[i].gap < fits[i - 1].gap);
        if (mode == DataMode::Partial)
            for (int l = 0; l < g.time_levels(); ++l) CHECK(fits.back().data.at(l, 0) == 0.0);
    }
    // a target that is itself a basis solution
    Field f = Field::on_q(g);
    for (int l = 0; l < g.time_levels(); ++l) f.at(l, 0) = std::sin(0.5 * pi * g.time(l) / g.horizon());
    auto member = solve_linear(g, DiffusionTensor::identity(), q, f, Field{}, Field{}).solution;
    auto fit = runge_fit(g, DiffusionTensor::identity(), q, member, {1, 2}, {});
    CHECK(fit[0].gap <= 1e-10);
}
