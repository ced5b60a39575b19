#include <algorithm>
#include <cmath>
#include <set>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace {

using Vec = Eigen::VectorXd;

/// Clamped cubic B-spline basis on [0, end] with n functions, evaluated by Cox-de Boor.
class CubicSplines {
public:
    CubicSplines(int n, double end) : n_(n) {
        const int pieces = n - 3;
        for (int i = 0; i < 4; ++i) knots_.push_back(0.0);
        for (int i = 1; i < pieces; ++i) knots_.push_back(end * i / pieces);
        for (int i = 0; i < 4; ++i) knots_.push_back(end);
    }
    int size() const { return n_; }
    double operator()(int i, double t) const {
        if (t < knots_.front() || t > knots_.back()) return 0.0;
        // degree-0 indicator, closing the last interval on the right
        std::vector<double> N(knots_.size() - 1, 0.0);
        for (std::size_t j = 0; j + 1 < knots_.size(); ++j) {
            bool last = knots_[j + 1] == knots_.back() && knots_[j] < knots_[j + 1];
            if ((t >= knots_[j] && t < knots_[j + 1]) || (last && t == knots_.back())) N[j] = 1.0;
        }
        for (int p = 1; p <= 3; ++p)
            for (std::size_t j = 0; j + p + 1 < knots_.size(); ++j) {
                double a = 0.0, b = 0.0;
                double d1 = knots_[j + p] - knots_[j], d2 = knots_[j + p + 1] - knots_[j + 1];
                if (d1 > 0.0) a = (t - knots_[j]) / d1 * N[j];
                if (d2 > 0.0) b = (knots_[j + p + 1] - t) / d2 * N[j + 1];
                N[j] = a + b;
            }
        return N[static_cast<std::size_t>(i)];
    }

private:
    int n_;
    std::vector<double> knots_;
};

Field linearization_potential(const Nonlinearity& nl, const Field& u) {
    const auto& g = u.grid();
    Field q = Field::on_q(g);
    if (nl.is_zero()) return q;
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n = 0; n < g.space_nodes(); ++n) q.at(k, n) = nl.evaluate(g.coord(n), g.time(k), u.at(k, n), 1);
    return q;
}

}  // namespace

ControlResult null_control(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                           const Field& g, double switch_time, const BoundaryPortion& gamma0,
                           const ControlOptions& opt) {
    if (!(switch_time > 0.0) || !(switch_time < grid.horizon()))
        throw InvalidInput("switch time must lie strictly inside (0, T)");
    if (opt.time_splines < 3) throw InvalidInput("at least three time splines are required");
    if (opt.cgls_iterations < 1 || opt.gauss_newton < 1) throw InvalidInput("iteration counts must be positive");
    const int S = std::clamp(static_cast<int>(std::lround(switch_time / grid.dt())), 1, grid.time_steps() - 1);
    const double Ts = grid.time(S);

    std::set<int> unique;
    for (const auto& e : gamma0.resolve(grid)) unique.insert(e.node);
    const std::vector<int> nodes(unique.begin(), unique.end());
    // the first clamped spline is the only one nonzero at t = 0 and is dropped
    CubicSplines splines(opt.time_splines + 1, Ts);
    Eigen::MatrixXd profile(S + 1, opt.time_splines);
    for (int k = 0; k <= S; ++k)
        for (int j = 0; j < opt.time_splines; ++j) profile(k, j) = splines(j + 1, grid.time(k));
    const std::size_t ncoef = nodes.size() * static_cast<std::size_t>(opt.time_splines);

    auto control_of = [&](const Vec& c) {
        Field f = Field::on_q(grid);
        for (int k = 0; k <= S; ++k)
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                double v = 0.0;
                for (int j = 0; j < opt.time_splines; ++j) v += profile(k, j) * c(static_cast<Eigen::Index>(i * opt.time_splines + j));
                f.at(k, nodes[i]) = v;
            }
        return f;
    };
    auto sw = space_weights(grid);
    std::vector<double> wsq;
    for (double w : sw) wsq.push_back(std::sqrt(w));
    auto terminal = [&](const Field& u) {
        Vec y(grid.space_nodes());
        for (int n = 0; n < grid.space_nodes(); ++n) y(n) = wsq[static_cast<std::size_t>(n)] * u.at(S, n);
        return y;
    };
    auto solve = [&](const Field& f) {
        auto rep = solve_semilinear(grid, gamma, nl, f, g, Strategy::Newton, opt.settings);
        if (!rep.converged) throw SolverError("state solve did not converge during null control");
        return rep.solution;
    };

    ControlResult out;
    out.switch_level = S;
    Field u = solve(Field{});
    out.uncontrolled_norm = terminal(u).norm();
    Vec c = Vec::Zero(static_cast<Eigen::Index>(ncoef));
    if (out.uncontrolled_norm == 0.0 || ncoef == 0) {
        if (ncoef == 0) out.notes.push_back("control portion has no boundary nodes");
        out.control = Field::on_q(grid);
        out.history.push_back(out.uncontrolled_norm);
    } else {
        const bool linear = nl.is_linear();
        out.history.push_back(out.uncontrolled_norm);
        for (int it = 0; it < (linear ? 1 : opt.gauss_newton); ++it) {
            TangentSolver T(grid, gamma, linearization_potential(nl, u));
            detail::LinearMap B = [&](const Vec& x) {
                Field f = control_of(x);
                return terminal(T.forward(nullptr, nullptr, &f));
            };
            detail::LinearMap Bt = [&](const Vec& y) {
                Field G = Field::on_q(grid);
                for (int n = 0; n < grid.space_nodes(); ++n) G.at(S, n) = wsq[static_cast<std::size_t>(n)] * y(n);
                auto cot = T.adjoint(G);
                Vec x = Vec::Zero(static_cast<Eigen::Index>(ncoef));
                for (int k = 0; k <= S; ++k)
                    for (std::size_t i = 0; i < nodes.size(); ++i) {
                        double v = cot.dirichlet.at(k, nodes[i]);
                        for (int j = 0; j < opt.time_splines; ++j)
                            x(static_cast<Eigen::Index>(i * opt.time_splines + j)) += profile(k, j) * v;
                    }
                return x;
            };
            const double alpha = opt.alpha * detail::largest_eigenvalue(B, Bt, static_cast<Eigen::Index>(ncoef));
            Vec y = B(c) - terminal(u);
            Vec prev = c;
            detail::cgls(B, Bt, y, alpha, opt.cgls_iterations, c, [&](double r) {
                if (linear) out.history.push_back(r);
            });
            u = solve(control_of(c));
            if (!linear) out.history.push_back(terminal(u).norm());
            if ((c - prev).norm() <= 1e-10 * std::max(1.0, c.norm())) break;
        }
        out.control = control_of(c);
    }
    out.coefficients.assign(c.data(), c.data() + c.size());
    out.terminal_norm = terminal(u).norm();
    for (int k = S; k < grid.time_levels(); ++k) out.continuation_max = std::max(out.continuation_max, norm(u.slice(k), NormSpace::L2Omega));
    if (out.terminal_norm * opt.target_reduction > out.uncontrolled_norm) {
        out.partial_steering = true;
        out.notes.push_back("terminal norm above the target reduction");
    }
    return out;
}

}  // namespace pipl
