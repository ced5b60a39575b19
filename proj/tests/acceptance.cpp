// One PASS/FAIL line per acceptance criterion; exit status 1 when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "pipl/analysis.hpp"
#include "pipl/recon.hpp"

using namespace pipl;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
    bool pass = false;
    std::string detail;
};

class Report {
public:
    void add(int id, const std::string& name, const std::function<Verdict()>& fn) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %2d %s: %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(), secs);
        std::fflush(stdout);
        failures_ += v.pass ? 0 : 1;
    }
    int failures() const { return failures_; }

private:
    int failures_ = 0;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Field sine_initial(const SpaceTimeGrid& g) {
    return Field::sample_omega(g, [](Point x) { return std::sin(pi * x[0]); });
}

Field bump_potential(const SpaceTimeGrid& g) {
    return Field::sample_q(g, [](Point x, double t) { return 2.0 * std::exp(-20 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + t); });
}

Field separable_bump(const SpaceTimeGrid& g) {
    return Field::sample_q(g, [](Point x, double t) { return std::exp(-8 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + 0.5 * t); });
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

double relative_change(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

// Crank-Nicolson heat oracle with dt = h on T = 0.1.
struct HeatRun {
    double h, l2q, dn_left;
};

HeatRun heat_run(int n) {
    auto g = SpaceTimeGrid::interval(0.0, 1.0, n + 1, n, 0.1);
    SolverSettings s;
    s.scheme = TimeScheme::CrankNicolson;
    auto rep = solve_linear(g, DiffusionTensor::identity(), Field{}, Field{}, sine_initial(g), Field{}, s);
    auto exact = Field::sample_q(g, [](Point x, double t) { return std::exp(-pi * pi * t) * std::sin(pi * x[0]); });
    auto m = measure(rep.solution, BoundaryPortion::neighborhood({Face::Left}));
    double worst = 0.0;
    for (int k = 0; k < g.time_levels(); ++k)
        worst = std::max(worst, std::abs(m.values.at(k, 0) + pi * std::exp(-pi * pi * g.time(k))));
    return {g.spacing(0), norm(rep.solution - exact, NormSpace::L2Q), worst};
}

std::vector<HeatRun> heat_runs() {
    std::vector<HeatRun> runs;
    for (int n : {32, 64, 128, 256}) runs.push_back(heat_run(n));
    return runs;
}

}  // namespace

int main() {
    Report r;

    r.add(1, "forward convergence", [] {
        const auto start = std::chrono::steady_clock::now();
        auto runs = heat_runs();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::vector<double> h, e;
        for (const auto& x : runs) {
            h.push_back(x.h);
            e.push_back(x.l2q);
        }
        const double order = loglog_slope(h, e);
        return Verdict{order >= 1.8 && secs < 10.0, fmt("L2(Q) order %.3f (>= 1.8), runtime %.2fs (< 10s)", order, secs)};
    });

    r.add(2, "DN trace accuracy", [] {
        auto runs = heat_runs();
        std::vector<double> h, e;
        for (const auto& x : runs) {
            h.push_back(x.h);
            e.push_back(x.dn_left);
        }
        double worst_pair = 1e300;
        for (std::size_t i = 1; i < runs.size(); ++i) worst_pair = std::min(worst_pair, std::log2(e[i - 1] / e[i]));
        const double order = loglog_slope(h, e);
        return Verdict{order >= 1.8 && strictly_decreasing(e),
                       fmt("max-norm order at x=0 %.3f (>= 1.8), smallest pairwise %.3f", order, worst_pair)};
    });

    r.add(3, "CGO remainder decay", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 128, 256, 1.0);
        auto q = bump_potential(g);
        bool ok = true;
        std::ostringstream d;
        for (auto dir : {Direction::Forward, Direction::Backward}) {
            CGOParameters p;
            p.direction = dir;
            p.tau = 2 * pi;
            auto sweep = remainder_sweep(g, q, p, {8, 16, 32, 64});
            std::vector<double> z;
            double worst = 0.0;
            for (const auto& e : sweep) {
                z.push_back(e.remainder_norm);
                worst = std::max(worst, e.max_materialized);
            }
            const double ratio = z.back() / z.front();
            ok = ok && strictly_decreasing(z) && ratio < 0.5 && worst < kMaterializeLimit;
            d << (dir == Direction::Forward ? "forward" : "backward") << " final/initial " << ratio
              << (strictly_decreasing(z) ? " strictly decreasing" : " NOT decreasing") << "; ";
        }
        d << "(< 0.5, no overflow)";
        return Verdict{ok, d.str()};
    });

    r.add(4, "Fourier pairing", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 1.0);
        auto f = Field::sample_q(g, [](Point x, double t) {
            return std::exp(-30 * (x[0] - 0.5) * (x[0] - 0.5) - 30 * (t - 0.5) * (t - 0.5));
        });
        auto q1 = bump_potential(g);
        auto q2 = Field::on_q(g, 0.5);
        int monotone = 0, points = 0;
        for (double tau : {0.0, pi, -pi, 2 * pi, -2 * pi, 3 * pi}) {
            ++points;
            auto fhat = fourier_sample(f, {0.0}, tau);
            std::vector<double> gaps;
            for (double rho : {8.0, 16.0, 32.0, 64.0}) {
                CGOParameters a, b;
                a.rho = b.rho = rho;
                a.tau = tau;
                b.direction = Direction::Backward;
                gaps.push_back(std::abs(pairing(f, build(g, q1, a), build(g, q2, b)).value - fhat));
            }
            monotone += strictly_decreasing(gaps) ? 1 : 0;
        }
        return Verdict{points >= 6 && monotone == points,
                       fmt("%d of %d lattice points monotone along rho {8,16,32,64}", monotone, points)};
    });

    r.add(5, "integral-identity reciprocity", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 128, 128, 1.0);
        Field q_ref = Field::on_q(g);
        Field q_truth = q_ref - separable_bump(g);
        double worst = 0.0;
        for (double tau : {0.0, pi, -2 * pi}) {
            CGOParameters p;
            p.rho = 2;
            p.tau = tau;
            worst = std::max(worst, identity_check(g, q_truth, q_ref, p).relative_gap);
        }
        CGOParameters p;
        p.rho = 2;
        p.carrier = CarrierKind::ComplexExponential;
        p.xi = {pi};
        p.tau = pi;
        worst = std::max(worst, identity_check(g, q_truth, q_ref, p).relative_gap);
        return Verdict{worst <= 0.05, fmt("largest relative gap %.4f (<= 0.05)", worst)};
    });

    r.add(6, "linearization rates", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 32, 0.5);
        LinearizationModel m;
        m.grid = &g;
        m.nl = Nonlinearity(Expr::parse("u^3"));
        ProbeFamily fam;
        fam.probes.push_back(ramped_probe(g, [](Point x, double) { return x[0] < 0.5 ? 1.0 : 0.0; }, 0.1));
        fam.probes.push_back(ramped_probe(g, [](Point x, double t) { return x[0] > 0.5 ? 1.0 + t : 0.0; }, 0.1));
        fam.probes.push_back(ramped_probe(g, [](Point x, double t) { return x[0] < 0.5 ? 0.5 : std::cos(3 * t); }, 0.1));
        fam.base_initial = Field::sample_omega(g, [](Point x) { return 0.8 * std::sin(pi * x[0]); });
        fam.schedule = {1e-1, 1e-2, 1e-3};
        auto v = first_order(m, fam, 0);
        auto w = second_order(m, fam, 0, 1);
        auto z = higher_order(m, fam, {0, 1, 2});
        bool ok = true;
        for (const auto* f : {&v, &w, &z}) ok = ok && f->report.slope >= 0.8 && f->report.slope <= 1.2;
        return Verdict{ok, fmt("slopes %.3f, %.3f, %.3f (in [0.8, 1.2])", v.report.slope, w.report.slope,
                               z.report.slope)};
    });

    r.add(7, "potential recovery", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 1.0);
        Field q_ref = Field::on_q(g);
        Field diff = separable_bump(g);
        Field q_truth = q_ref - diff;
        auto measure_all = [](const SpaceTimeGrid& gr, const Field& q) {
            std::vector<ProfileMeasurement> out;
            for (const auto& p : probe_lattice(gr, 4, 4, DataMode::Full)) out.push_back(measure_profile(gr, q, p, DataMode::Full));
            return out;
        };
        auto rec = recover_potential(g, q_ref, measure_all(g, q_truth), {}, &diff);
        auto gz = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
        Field q = Field::sample_q(gz, [](Point x, double) { return 0.3 * x[0]; });
        auto zero = recover_potential(gz, q, measure_all(gz, q), {});
        const double z = norm(zero.result.recovered, NormSpace::L2Q);
        return Verdict{rec.result.truth_error <= 0.2 && z <= 1e-6,
                       fmt("relative L2(Q) error %.4f (<= 0.2), zero-difference norm %.2e (<= 1e-6)",
                           rec.result.truth_error, z)};
    });

    r.add(8, "Taylor coefficient recovery", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 33, 64, 1.0);
        Nonlinearity truth(Expr::parse("exp(-4*(x-0.5)^2)*(1+0.5*t)*u^3"));
        Field d3 = Field::sample_q(g, [](Point x, double t) {
            return 6 * std::exp(-4 * (x[0] - 0.5) * (x[0] - 0.5)) * (1 + 0.5 * t);
        });
        auto rec = recover_taylor(g, truth, Nonlinearity(), {}, &d3);
        return Verdict{rec.truth_error <= 0.25, fmt("relative error %.4f (<= 0.25)", rec.truth_error)};
    });

    r.add(9, "initial data recovery and stability shape", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
        const auto id = DiffusionTensor::identity();
        auto truth = sine_initial(g);
        auto rec = recover_initial(g, id, Nonlinearity(), passive_map(g, id, Nonlinearity(), truth, BoundaryPortion::full()),
                                   {}, &truth);
        auto c = stability_curve(g, id, Nonlinearity(), truth, BoundaryPortion::full(), {1e-1, 1e-2, 1e-3, 1e-4}, 5, 7);
        const bool ok = rec.truth_error <= 0.1 && c.points.size() == 20 && c.spearman >= 0.9 &&
                        c.two_term_residual <= c.linear_residual;
        return Verdict{ok, fmt("error %.2e (<= 0.1), rank correlation %.3f (>= 0.9), two-term residual %.3e <= linear %.3e",
                               rec.truth_error, c.spearman, c.two_term_residual, c.linear_residual)};
    });

    r.add(10, "Carleman ratio stability", [] {
        auto coarse = SpaceTimeGrid::interval(0.0, 1.0, 33, 32, 1.0);
        auto fine = SpaceTimeGrid::interval(0.0, 1.0, 65, 64, 1.0);
        CarlemanConfig cfg;
        cfg.K = 0.1;
        cfg.t0 = 0.25;
        cfg.L = 1.0;
        auto a = carleman_sweep_1(heat_oracle(coarse), Field{}, cfg, {1, 2, 4}, {1, 2});
        auto b = carleman_sweep_1(heat_oracle(fine), Field{}, cfg, {1, 2, 4}, {1, 2});
        auto a2 = carleman_sweep_2(heat_oracle(coarse), Field{}, cfg, {1, 2, 4});
        auto b2 = carleman_sweep_2(heat_oracle(fine), Field{}, cfg, {1, 2, 4});
        a.insert(a.end(), a2.begin(), a2.end());
        b.insert(b.end(), b2.begin(), b2.end());
        bool finite = a.size() == b.size() && a.size() == 9;
        double worst = 0.0;
        for (std::size_t i = 0; finite && i < a.size(); ++i) {
            finite = std::isfinite(a[i].ratio) && std::isfinite(b[i].ratio) && !a[i].degenerate && !b[i].degenerate;
            worst = std::max(worst, relative_change(a[i].ratio, b[i].ratio));
        }
        return Verdict{finite && worst < 0.2,
                       fmt("%zu ratios finite: %s, largest change under refinement %.4f (< 0.2)", a.size(),
                           finite ? "yes" : "no", worst)};
    });

    r.add(11, "maximum principle", [] {
        bool ok = true;
        double worst = 0.0;
        auto ramp = [](const SpaceTimeGrid& g) {
            return Field::sample_q(g, [&](Point x, double t) { return x[0] == g.lower(0) ? smooth_ramp(t, 0.05) : 0.0; });
        };
        auto g1 = SpaceTimeGrid::interval(0.0, 1.0, 65, 64, 0.5);
        auto g2 = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 17, 17, 32, 0.5);
        Field q1 = Field::sample_q(g1, [](Point x, double t) { return 50 * (1 + std::sin(3 * x[0] + t)); });
        for (auto [g, q] : {std::pair{&g1, Field{}}, std::pair{&g1, q1}, std::pair{&g2, Field{}}}) {
            auto c = max_principle_check(*g, DiffusionTensor::identity(), q.empty() ? Field::on_q(*g) : q, ramp(*g));
            ok = ok && c.min_value >= -1e-8 * c.sup_norm && c.positive_beyond_first;
            worst = std::min(worst, c.min_value / c.sup_norm);
        }
        return Verdict{ok, fmt("smallest min/sup %.2e (>= -1e-8), positive beyond the first level: %s", worst,
                               ok ? "yes" : "no")};
    });

    r.add(12, "non-uniqueness", [] {
        auto g = SpaceTimeGrid::rectangle({0, 0}, {1, 1}, 33, 33, 16, 0.5);
        auto d = nonuniqueness_demo(g);
        const bool ok = d.g_diff >= 0.1 && d.trace_sup1 <= 1e-8 * (1 + d.state_sup1) &&
                        d.trace_sup2 <= 1e-8 * (1 + d.state_sup2);
        return Verdict{ok, fmt("||g1-g2|| %.3f (>= 0.1), trace sups %.2e, %.2e (<= 1e-8 (1+||u||))", d.g_diff,
                               d.trace_sup1, d.trace_sup2)};
    });

    r.add(13, "null control", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
        const auto id = DiffusionTensor::identity();
        auto lin = null_control(g, id, Nonlinearity(), sine_initial(g), 0.4, BoundaryPortion::full());
        auto glued = Nonlinearity::glued(Expr::parse("0.5*u^3"), Expr::parse("u^3+2*u"), 0.4);
        auto b = null_control(g, id, glued, sine_initial(g), 0.4, BoundaryPortion::full());
        const double red = lin.uncontrolled_norm / lin.terminal_norm;
        const bool ok = lin.uncontrolled_norm >= 100 * lin.terminal_norm && b.continuation_max <= 10 * b.terminal_norm;
        return Verdict{ok, fmt("linear reduction %.3e (>= 100), glued continuation %.2e vs terminal %.2e (<= 10x)", red,
                               b.continuation_max, b.terminal_norm)};
    });

    r.add(14, "Runge fit", [] {
        auto g = SpaceTimeGrid::interval(0.0, 1.0, 65, 128, 0.5);
        Field q = Field::on_q(g);
        CGOParameters p;
        p.rho = 2;
        p.tau = 2 * pi;
        auto v = materialize(build(g, q, p));
        Field target = Field::on_q(g);
        for (std::size_t i = 0; i < target.values().size(); ++i) target.values()[i] = v.values()[i].real();
        bool ok = true;
        std::ostringstream d;
        for (auto mode : {DataMode::Full, DataMode::Partial}) {
            RungeOptions o;
            o.mode = mode;
            if (mode == DataMode::Partial) o.region_lo = 0.6;
            std::vector<double> gaps;
            for (const auto& f : runge_fit(g, DiffusionTensor::identity(), q, target, {4, 8, 16, 32}, o))
                gaps.push_back(f.gap);
            ok = ok && gaps.size() == 4 && strictly_decreasing(gaps);
            d << (mode == DataMode::Full ? "full" : "; partial") << " gaps " << gaps.front() << " -> " << gaps.back()
              << (strictly_decreasing(gaps) ? " strictly decreasing" : " NOT decreasing");
        }
        return Verdict{ok, d.str()};
    });

    std::printf("%d criteria failed\n", r.failures());
    return r.failures() == 0 ? 0 : 1;
}
