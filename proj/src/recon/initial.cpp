#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace {

using Vec = Eigen::VectorXd;

Field linearization_potential(const Nonlinearity& nl, const Field& u) {
    const auto& g = u.grid();
    Field q = Field::on_q(g);
    if (nl.is_zero()) return q;
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n = 0; n < g.space_nodes(); ++n) q.at(k, n) = nl.evaluate(g.coord(n), g.time(k), u.at(k, n), 1);
    return q;
}

/// Weighted forward map x -> sqrt(W) D T(M^{-1/2} x) on the interior nodes of Omega.
class WeightedTangent {
public:
    WeightedTangent(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                    const std::vector<BoundaryEntry>& entries)
        : grid_(grid), solver_(grid, gamma, q), entries_(entries), inner_(grid.interior_nodes()) {
        auto sw = space_weights(grid);
        for (int n : inner_) msq_.push_back(std::sqrt(sw[static_cast<std::size_t>(n)]));
        for (double w : detail::sigma_weights(grid, entries)) wsq_.push_back(std::sqrt(w));
    }

    std::size_t cols() const { return inner_.size(); }
    std::size_t rows() const { return wsq_.size(); }

    Field to_field(const Vec& x) const {
        Field g = Field::on_omega(grid_);
        for (std::size_t i = 0; i < inner_.size(); ++i) g.at(0, inner_[i]) = x(i) / msq_[i];
        return g;
    }
    Vec from_field(const Field& g) const {
        Vec x(inner_.size());
        for (std::size_t i = 0; i < inner_.size(); ++i) x(i) = g.at(0, inner_[i]) * msq_[i];
        return x;
    }
    Vec weigh(const Field& trace) const {
        Vec y(wsq_.size());
        for (std::size_t i = 0; i < wsq_.size(); ++i) y(i) = wsq_[i] * trace.values()[i];
        return y;
    }

    detail::LinearMap map() const {
        return [this](const Vec& x) { return apply(x); };
    }
    detail::LinearMap map_t() const {
        return [this](const Vec& y) { return apply_transpose(y); };
    }

    Vec apply(const Vec& x) const {
        Field g = to_field(x);
        Field u = solver_.forward(&g, nullptr, nullptr);
        return weigh(normal_derivative(u, entries_));
    }
    Vec apply_transpose(const Vec& y) const {
        std::vector<double> v(wsq_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = wsq_[i] * y(i);
        auto c = solver_.adjoint(detail::normal_derivative_transpose(grid_, entries_, v));
        Vec x(inner_.size());
        for (std::size_t i = 0; i < inner_.size(); ++i) x(i) = c.initial.at(0, inner_[i]) / msq_[i];
        return x;
    }

private:
    const SpaceTimeGrid& grid_;
    TangentSolver solver_;
    std::vector<BoundaryEntry> entries_;
    std::vector<int> inner_;
    std::vector<double> msq_, wsq_;
};

}  // namespace

double measurement_norm(const DNMeasurement& m) {
    const auto& g = m.values.grid();
    auto w = detail::sigma_weights(g, m.values.entries());
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * m.values.values()[i] * m.values.values()[i];
    return std::sqrt(s);
}

ReconstructionResult recover_initial(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                                     const Nonlinearity& nl, const DNMeasurement& data,
                                     const InitialOptions& opt, const Field* truth) {
    if (!(data.values.grid() == grid) || data.values.support() != Support::Boundary)
        throw InvalidInput("measurement is not a boundary trace on the reconstruction grid");
    if (!(opt.noise_level >= 0.0) || !(opt.tau >= 1.0)) throw InvalidInput("invalid discrepancy settings");
    if (opt.alpha_steps < 1 || opt.gauss_newton < 1 || opt.cgls_iterations < 1)
        throw InvalidInput("iteration counts must be positive");
    const auto& entries = data.values.entries();
    const bool linear = nl.is_linear();

    auto forward = [&](const Field& g) {
        auto rep = solve_semilinear(grid, gamma, nl, Field{}, g, Strategy::Newton, opt.settings);
        if (!rep.converged) throw SolverError("forward solve did not converge during initial-data recovery");
        return rep.solution;
    };

    ReconstructionResult res;
    Field g = Field::on_omega(grid);
    Field u = forward(g);
    auto B = std::make_unique<WeightedTangent>(grid, gamma, linearization_potential(nl, u), entries);
    const Vec d = B->weigh(data.values);
    auto misfit_of = [&](const Field& uu) { return (B->weigh(normal_derivative(uu, entries)) - d).norm(); };

    const double smax2 = detail::largest_eigenvalue(B->map(), B->map_t(), static_cast<Eigen::Index>(B->cols()));
    if (!(smax2 > 0.0)) throw DomainError("measurement portion does not see the initial data");
    const double target = opt.tau * opt.noise_level;
    Vec x = B->from_field(g);
    double chosen = 0.0, misfit = misfit_of(u);
    bool hit = false;
    for (int i = 0; i < opt.alpha_steps; ++i) {
        const double rel = std::pow(10.0, -0.5 * i);
        if (rel < opt.alpha_floor) break;
        const double alpha = rel * smax2;
        for (int it = 0; it < (linear ? 1 : opt.gauss_newton); ++it) {
            Vec y = d - B->weigh(normal_derivative(u, entries)) + B->apply(x);
            Vec prev = x;
            detail::cgls(B->map(), B->map_t(), y, alpha, opt.cgls_iterations, x);
            g = B->to_field(x);
            u = forward(g);
            if (!linear) B = std::make_unique<WeightedTangent>(grid, gamma, linearization_potential(nl, u), entries);
            if ((x - prev).norm() <= 1e-8 * std::max(1.0, x.norm())) break;
        }
        misfit = misfit_of(u);
        res.residuals.push_back(misfit);
        chosen = alpha;
        if (opt.noise_level > 0.0 && misfit <= target) {
            hit = true;
            break;
        }
    }
    res.recovered = g;
    res.regularization = {"tikhonov", chosen,
                          opt.noise_level > 0.0 ? "morozov discrepancy" : "noiseless: regularization floor"};
    if (opt.noise_level > 0.0 && !hit) {
        res.converged = false;
        res.notes.push_back("discrepancy level not reached; returning the smallest-alpha iterate");
    }
    if (truth) {
        res.has_truth = true;
        res.truth_error = relative_error(res.recovered, *truth);
    }
    return res;
}

StabilityCurve stability_curve(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                               const Field& truth, const BoundaryPortion& gamma0, const std::vector<double>& deltas,
                               int trials, std::uint64_t seed, const InitialOptions& options) {
    if (deltas.empty() || trials < 1) throw InvalidInput("stability curve needs noise levels and trials");
    auto clean = passive_map(grid, gamma, nl, truth, gamma0, Strategy::Newton, options.settings);
    StabilityCurve out;
    {
        auto opt = options;
        opt.noise_level = 0.0;
        auto r = recover_initial(grid, gamma, nl, clean, opt);
        out.floor_error = norm(r.recovered - truth, NormSpace::L2Omega);
    }
    for (std::size_t i = 0; i < deltas.size(); ++i)
        for (int t = 0; t < trials; ++t) {
            auto noisy = add_noise(clean, NoiseModel::GaussianRelative, deltas[i],
                                   seed + 1000003ULL * i + static_cast<std::uint64_t>(t));
            auto opt = options;
            DNMeasurement diff = noisy;
            diff.values -= clean.values;
            opt.noise_level = measurement_norm(diff);
            auto r = recover_initial(grid, gamma, nl, noisy, opt);
            StabilityPoint p;
            p.delta = deltas[i];
            p.trial = t;
            p.error = norm(r.recovered - truth, NormSpace::L2Omega);
            auto m = passive_map(grid, gamma, nl, r.recovered, gamma0, Strategy::Newton, options.settings);
            m.values -= clean.values;
            p.dn_diff_norm = measurement_norm(m);
            out.points.push_back(p);
        }

    std::vector<double> dl, el;
    double mmax = 0.0;
    for (const auto& p : out.points) {
        dl.push_back(p.delta);
        el.push_back(p.error);
        mmax = std::max(mmax, p.dn_diff_norm);
    }
    out.spearman = spearman(dl, el);
    out.delta0 = mmax > 0.0 ? std::min(0.5, 0.5 / mmax) : 0.5;
    // squared error against C1 m + C2 / |ln(delta0 m)|, and against c m alone
    std::vector<const StabilityPoint*> fit;
    for (const auto& p : out.points)
        if (p.dn_diff_norm > 0.0) fit.push_back(&p);
    if (fit.size() >= 2) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(fit.size()), 2);
        Vec y(static_cast<Eigen::Index>(fit.size()));
        for (std::size_t i = 0; i < fit.size(); ++i) {
            double m = fit[i]->dn_diff_norm;
            A(i, 0) = m;
            A(i, 1) = 1.0 / std::abs(std::log(out.delta0 * m));
            y(i) = fit[i]->error * fit[i]->error;
        }
        Vec c = A.colPivHouseholderQr().solve(y);
        out.c1 = c(0);
        out.c2 = c(1);
        out.two_term_residual = (A * c - y).norm();
        Vec a = A.col(0);
        out.linear_coefficient = a.dot(y) / a.squaredNorm();
        out.linear_residual = (out.linear_coefficient * a - y).norm();
    }
    return out;
}

}  // namespace pipl
