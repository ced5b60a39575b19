#include <cmath>
#include <numbers>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace {

using cd = std::complex<double>;

CGOParameters backward_of(const CGOParameters& p) {
    auto b = p;
    b.direction = Direction::Backward;
    return b;
}

cd integrate_q(const std::vector<double>& w, const ComplexField& f) {
    cd s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f.values()[i];
    return s;
}

void check_q(const Field& q, const SpaceTimeGrid& grid, const char* what) {
    if (q.empty()) return;
    if (q.support() != Support::Interior || !(q.grid() == grid))
        throw InvalidInput(std::string(what) + " must be a field on Q of the reconstruction grid");
}

/// Boundary functional -int_Sigma cp P_b (meas - d_nu P_ref) over the entries of meas.
cd boundary_functional(const ComplexField& cp, const ComplexField& Pb, const ComplexField& meas,
                       const ComplexField& Pref) {
    const auto& g = cp.grid();
    const auto& entries = meas.entries();
    auto dref = normal_derivative(Pref, entries);
    auto w = detail::sigma_weights(g, entries);
    cd s = 0.0;
    const int E = static_cast<int>(entries.size());
    for (int k = 0; k < g.time_levels(); ++k)
        for (int e = 0; e < E; ++e) {
            int n = entries[e].node;
            s -= w[static_cast<std::size_t>(k) * E + e] * cp.at(k, n) * Pb.at(k, n) * (meas.at(k, e) - dref.at(k, e));
        }
    return s;
}

}  // namespace

double FourierSampleSet::conjugate_defect() const {
    double worst = 0.0;
    for (const auto& a : samples)
        for (const auto& b : samples) {
            if (a.carrier != b.carrier || a.xi.size() != b.xi.size() || a.rho != b.rho || a.omega != b.omega) continue;
            bool mirror = std::abs(a.tau + b.tau) < 1e-12 * (1 + std::abs(a.tau));
            for (std::size_t i = 0; i < a.xi.size(); ++i)
                mirror = mirror && std::abs(a.xi[i] + b.xi[i]) < 1e-12 * (1 + std::abs(a.xi[i]));
            if (!mirror) continue;
            double scale = std::max(std::abs(a.value), std::abs(b.value));
            if (scale == 0.0) continue;
            worst = std::max(worst, std::abs(a.value - std::conj(b.value)) / scale);
        }
    return worst;
}

BoundaryPortion measured_portion(const SpaceTimeGrid& grid, const CGOParameters& params, DataMode mode) {
    if (mode == DataMode::Full) return BoundaryPortion::full();
    std::vector<Face> faces;
    for (Face f : grid.faces()) {
        Point nu = grid.normal(f);
        double s = nu[0] * params.omega[0] + (grid.dim() == 2 ? nu[1] * params.omega[1] : 0.0);
        bool vanish = params.aperture == 0.0 ? s >= 0.0 : s > params.aperture;
        if (!vanish) faces.push_back(f);
    }
    if (faces.empty()) throw InvalidInput("partial data leaves no measured face");
    return BoundaryPortion::neighborhood(faces);
}

std::vector<CGOParameters> probe_lattice(const SpaceTimeGrid& grid, double rho, int max_mode, DataMode mode,
                                        int max_space_mode) {
    if (max_mode < 0 || max_space_mode < 0) throw InvalidInput("mode bounds must be nonnegative");
    const double pi = std::numbers::pi, T = grid.horizon();
    std::vector<CGOParameters> out;
    auto base = [&] {
        CGOParameters p;
        p.rho = rho;
        p.partial = mode == DataMode::Partial;
        return p;
    };
    if (grid.dim() == 1) {
        for (double w : {1.0, -1.0})
            for (int k = -max_mode; k <= max_mode; ++k) {
                auto p = base();
                p.omega = {w};
                p.xi = {0.0};
                p.tau = pi * k / T;
                out.push_back(p);
            }
        const double L = grid.upper(0) - grid.lower(0);
        for (int j = -max_space_mode; j <= max_space_mode; ++j) {
            if (j == 0) continue;
            for (int k = -max_mode; k <= max_mode; ++k) {
                auto p = base();
                p.carrier = CarrierKind::ComplexExponential;
                p.omega = {1.0};
                p.xi = {pi * j / L};
                p.tau = pi * k / T;
                out.push_back(p);
            }
        }
        return out;
    }
    const std::vector<std::vector<double>> axes{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& w : axes) {
        int perp = w[0] != 0.0 ? 1 : 0;
        double L = grid.upper(perp) - grid.lower(perp);
        for (int j = -max_space_mode; j <= max_space_mode; ++j)
            for (int k = -max_mode; k <= max_mode; ++k) {
                auto p = base();
                p.omega = w;
                p.xi = {0.0, 0.0};
                p.xi[perp] = pi * j / L;
                p.tau = pi * k / T;
                out.push_back(p);
            }
    }
    return out;
}

ProfileMeasurement measure_profile(const SpaceTimeGrid& grid, const Field& q, const CGOParameters& params,
                                   DataMode mode, const SolverSettings& settings) {
    check_q(q, grid, "potential");
    auto sol = build(grid, q, params, settings);
    ProfileMeasurement m;
    m.params = params;
    m.values = normal_derivative(sol.profile, measured_portion(grid, params, mode).resolve(grid));
    return m;
}

IdentityCheck identity_check(const SpaceTimeGrid& grid, const Field& q_truth, const Field& q_reference,
                             const CGOParameters& params, DataMode mode, const SolverSettings& settings) {
    check_q(q_truth, grid, "truth potential");
    check_q(q_reference, grid, "reference potential");
    auto P1 = build(grid, q_truth, params, settings).profile;
    auto P2 = build(grid, q_reference, params, settings).profile;
    auto Pb = build(grid, q_reference, backward_of(params), settings).profile;
    auto cp = carrier_product(grid, params, backward_of(params));
    auto w = detail::q_weights(grid);
    IdentityCheck r;
    auto vol = ComplexField::on_q(grid);
    for (std::size_t i = 0; i < vol.values().size(); ++i) {
        double dq = (q_reference.empty() ? 0.0 : q_reference.values()[i]) - (q_truth.empty() ? 0.0 : q_truth.values()[i]);
        vol.values()[i] = dq * cp.values()[i] * P1.values()[i] * Pb.values()[i];
    }
    r.volume = integrate_q(w, vol);
    auto meas = normal_derivative(P1, measured_portion(grid, params, mode).resolve(grid));
    r.boundary = boundary_functional(cp, Pb, meas, P2);
    double scale = std::max(std::abs(r.volume), std::abs(r.boundary));
    r.relative_gap = scale > 0.0 ? std::abs(r.volume - r.boundary) / scale : 0.0;
    return r;
}

PotentialRecovery recover_potential(const SpaceTimeGrid& grid, const Field& q_reference,
                                    const std::vector<ProfileMeasurement>& data, const PotentialOptions& opt,
                                    const Field* truth_difference) {
    check_q(q_reference, grid, "reference potential");
    if (data.empty()) throw InvalidInput("no measurements supplied");
    if (opt.born_iterations < 1) throw InvalidInput("at least one Born iteration is required");
    auto basis = detail::cosine_basis(grid, opt.modes_x, opt.modes_t);
    const bool partial = opt.mode == DataMode::Partial;
    auto known = [&](Point x) { return partial && x[0] >= opt.known_lo && x[0] <= opt.known_hi; };
    if (partial && truth_difference) {
        for (int k = 0; k < grid.time_levels(); ++k)
            for (int n = 0; n < grid.space_nodes(); ++n)
                if (known(grid.coord(n)) && truth_difference->at(k, n) != 0.0)
                    throw InvalidInput("partial mode needs the difference to vanish on the known region");
    }
    if (partial)
        for (auto& b : basis)
            for (int k = 0; k < grid.time_levels(); ++k)
                for (int n = 0; n < grid.space_nodes(); ++n)
                    if (known(grid.coord(n))) b.at(k, n) = 0.0;
    const std::size_t rows = data.size(), cols = basis.size();
    if (2 * rows < cols) throw InvalidInput("probe lattice has fewer samples than basis functions");
    for (const auto& m : data)
        if (!(m.values.grid() == grid) || m.values.support() != Support::Boundary)
            throw InvalidInput("measurement is not a boundary trace on the reconstruction grid");

    const auto w = detail::q_weights(grid);
    PotentialRecovery out;
    auto& res = out.result;
    res.regularization = {"tikhonov", opt.alpha, "fixed relative weight, distorted Born iteration"};
    Field delta = Field::on_q(grid);
    for (int it = 0; it < opt.born_iterations; ++it) {
        Field q = q_reference.empty() ? Field::on_q(grid) : q_reference;
        q -= delta;
        Eigen::MatrixXd A(2 * rows, cols);
        Eigen::VectorXd b(2 * rows);
        double bnorm = 0.0;
        for (std::size_t j = 0; j < rows; ++j) {
            const auto& p = data[j].params;
            auto fwd = build(grid, q, p, opt.settings);
            auto bwd = build(grid, q, backward_of(p), opt.settings);
            auto cp = carrier_product(grid, p, backward_of(p));
            auto K = ComplexField::on_q(grid);
            for (std::size_t i = 0; i < K.values().size(); ++i)
                K.values()[i] = cp.values()[i] * fwd.profile.values()[i] * bwd.profile.values()[i];
            cd B = boundary_functional(cp, bwd.profile, data[j].values, fwd.profile);
            if (it == 0) {
                FourierSample s;
                s.xi = p.xi;
                s.omega = p.omega;
                s.tau = p.tau;
                s.rho = p.rho;
                s.carrier = p.carrier;
                s.value = B;
                s.remainder_forward = fwd.remainder_norm;
                s.remainder_backward = bwd.remainder_norm;
                out.samples.samples.push_back(s);
                for (const auto& wmsg : fwd.warnings) res.notes.push_back("probe " + std::to_string(j) + ": " + wmsg);
            }
            double kn2 = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) kn2 += w[i] * std::norm(K.values()[i]);
            double kn = std::sqrt(kn2);
            if (kn == 0.0) kn = 1.0;
            for (std::size_t m = 0; m < cols; ++m) {
                cd a = 0.0;
                const auto& phi = basis[m].values();
                for (std::size_t i = 0; i < phi.size(); ++i) a += w[i] * phi[i] * K.values()[i];
                A(2 * j, m) = a.real() / kn;
                A(2 * j + 1, m) = a.imag() / kn;
            }
            b(2 * j) = B.real() / kn;
            b(2 * j + 1) = B.imag() / kn;
            bnorm = std::max(bnorm, std::abs(B) / kn);
        }
        res.residuals.push_back(b.norm());
        if (bnorm == 0.0 || b.norm() <= 1e-12 * res.residuals.front()) break;
        double alpha_abs = 0.0;
        Eigen::VectorXd c = detail::tikhonov(A, b, opt.alpha, &alpha_abs);
        res.regularization.parameter = alpha_abs;
        for (std::size_t m = 0; m < cols; ++m) delta.axpy(c(m), basis[m]);
    }
    res.recovered = std::move(delta);
    if (truth_difference) {
        res.has_truth = true;
        res.truth_error = relative_error(res.recovered, *truth_difference);
    }
    double defect = out.samples.conjugate_defect();
    if (defect > 1e-3) res.notes.push_back("Fourier samples deviate from conjugate symmetry: " + std::to_string(defect));
    return out;
}

}  // namespace pipl
