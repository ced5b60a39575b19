#include "pipl/cgo.hpp"

#include <cmath>
#include <sstream>

namespace pipl {

namespace {

using cd = std::complex<double>;
constexpr cd I{0.0, 1.0};

double dot(const std::vector<double>& a, Point x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
}

template <class S>
BasicField<S> flip(const BasicField<S>& f) {
    auto out = f;
    int L = f.levels();
    for (int k = 0; k < L; ++k) std::copy(f.level(L - 1 - k), f.level(L - 1 - k) + f.width(), out.level(k));
    return out;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-14 * (1.0 + std::abs(a[i]))) return false;
    return true;
}

void check_pair(const CGOParameters& f, const CGOParameters& b) {
    if (f.direction != Direction::Forward || b.direction != Direction::Backward)
        throw InvalidInput("pairing needs a forward and a backward solution");
    if (f.carrier != b.carrier) throw InvalidInput("carrier kinds differ");
    if (std::abs(f.rho - b.rho) > 1e-14 * f.rho) throw InvalidInput("rho differs between the pair");
    if (!same(f.omega, b.omega)) throw InvalidInput("omega differs between the pair");
    if (f.carrier == CarrierKind::ComplexExponential &&
        (!same(f.xi, b.xi) || std::abs(f.tau - b.tau) > 1e-14 * (1.0 + std::abs(f.tau))))
        throw InvalidInput("frequency differs between the pair");
}

cd carrier_exponent(const CGOParameters& p, Point x, double t) {
    auto z = p.zeta();
    cd zz = z[0] * z[0] + z[1] * z[1];
    double s = p.direction == Direction::Forward ? 1.0 : -1.0;
    return z[0] * x[0] + z[1] * x[1] + s * zz * t;
}

}  // namespace

void CGOParameters::validate(int dim) const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw InvalidInput("rho must be positive");
    if (static_cast<int>(omega.size()) != dim || static_cast<int>(xi.size()) != dim)
        throw InvalidInput("omega and xi must match the space dimension");
    double n = 0.0;
    for (double w : omega) n += w * w;
    if (std::abs(std::sqrt(n) - 1.0) > 1e-12) throw InvalidInput("omega must be a unit vector");
    if (aperture < 0.0) throw InvalidInput("aperture must be nonnegative");
    if (carrier == CarrierKind::Real) {
        double d = 0.0;
        for (int i = 0; i < dim; ++i) d += xi[i] * omega[i];
        if (std::abs(d) > 1e-12) throw InvalidInput("xi must be orthogonal to omega");
    } else {
        if (dim != 1) throw InvalidInput("complex-exponential carriers are one-dimensional");
        if (xi[0] == 0.0) throw InvalidInput("complex-exponential carriers need xi != 0");
    }
}

double CGOParameters::ramp() const { return std::pow(rho, 0.75); }

std::array<cd, 2> CGOParameters::zeta() const {
    std::array<cd, 2> z{};
    if (carrier == CarrierKind::Real) {
        double s = direction == Direction::Forward ? rho : -rho;
        for (std::size_t i = 0; i < omega.size(); ++i) z[i] = s * omega[i];
    } else {
        double r = tau / xi[0];
        z[0] = direction == Direction::Forward ? cd(r, -xi[0]) / 2.0 : cd(-r, -xi[0]) / 2.0;
    }
    return z;
}

cd theta(const CGOParameters& p, Point x, double t, double T) {
    double k = p.ramp();
    if (p.direction == Direction::Backward) return 1.0 - std::exp(-k * (T - t));
    double ramp = 1.0 - std::exp(-k * t);
    if (p.carrier == CarrierKind::ComplexExponential) return ramp;
    return ramp * std::exp(-I * (dot(p.xi, x) + p.tau * t));
}

double phi_rho(double rho, double t, double T) {
    double k = std::pow(rho, 0.75);
    return 1.0 - std::exp(-k * t) - std::exp(-k * (T - t)) + std::exp(-k * T);
}

CGOSolution build(const SpaceTimeGrid& grid, const Field& q, const CGOParameters& params,
                  const SolverSettings& settings) {
    params.validate(grid.dim());
    if (!q.empty() && (q.support() != Support::Interior || !(q.grid() == grid)))
        throw InvalidInput("potential must live on the CGO grid");
    const double T = grid.horizon();
    const bool fwd = params.direction == Direction::Forward;
    CGOSolution sol;
    sol.params = params;

    auto th = ComplexField::sample_q(grid, [&](Point x, double t) { return theta(params, x, t, T); });
    auto lateral = th;
    std::vector<int> vanish;
    if (params.partial) {
        auto portion = BoundaryPortion::directional(params.omega, params.aperture, fwd ? -1 : 1);
        vanish = classify_boundary(grid, portion);
        for (int k = 0; k < grid.time_levels(); ++k)
            for (int b : vanish) lateral.at(k, b) = 0.0;
        std::ostringstream os;
        os << "profile = 0 on " << portion.describe() << ", z = 0 on the rest of the lateral boundary";
        sol.boundary_record = os.str();
    } else {
        sol.boundary_record = "z = 0 on the full lateral boundary";
    }
    sol.boundary_record += fwd ? ", z(t=0) = 0" : ", z(t=T) = 0";

    auto z = params.zeta();
    Field qr = q.empty() ? q : (fwd ? q : flip(q));
    ComplexField dir = fwd ? lateral : flip(lateral);
    auto init = ComplexField::on_omega(grid);
    ParabolicProblem<cd> P;
    P.grid = &grid;
    P.drift = {2.0 * z[0], 2.0 * z[1]};
    P.potential = qr.empty() ? nullptr : &qr;
    P.dirichlet = &dir;
    P.initial = &init;
    P.theta = settings.scheme == TimeScheme::CrankNicolson ? 0.5 : 1.0;
    P.reversed_time = !fwd;
    auto U = march(P);
    sol.residual = step_residual(P, U);
    sol.profile = fwd ? std::move(U) : flip(U);

    auto rem = sol.profile - th;
    sol.remainder_norm = norm(rem, NormSpace::L2Q);
    sol.max_materialized = std::max(sol.profile.max_abs(), th.max_abs());

    double kdt = params.ramp() * grid.dt();
    if (kdt > 0.5) {
        std::ostringstream os;
        os << "ramp under-resolved: rho^(3/4) dt = " << kdt << " > 0.5";
        sol.warnings.push_back(os.str());
    }
    for (int a = 0; a < grid.dim(); ++a) {
        double pe = std::abs(z[a]) * grid.spacing(a);
        if (pe > 1.0) {
            std::ostringstream os;
            os << "cell Peclet number " << pe << " > 1 on axis " << a;
            sol.warnings.push_back(os.str());
        }
    }
    return sol;
}

ComplexField carrier_product(const SpaceTimeGrid& grid, const CGOParameters& forward,
                             const CGOParameters& backward) {
    check_pair(forward, backward);
    return ComplexField::sample_q(grid, [&](Point x, double t) {
        return std::exp(carrier_exponent(forward, x, t) + carrier_exponent(backward, x, t));
    });
}

ComplexField product_symbol(const SpaceTimeGrid& grid, const CGOParameters& forward,
                            const CGOParameters& backward) {
    check_pair(forward, backward);
    const double T = grid.horizon();
    return ComplexField::sample_q(grid, [&](Point x, double t) {
        return phi_rho(forward.rho, t, T) * std::exp(-I * (dot(forward.xi, x) + forward.tau * t));
    });
}

Pairing pairing(const Field& f, const CGOSolution& forward, const CGOSolution& backward) {
    const auto& g = forward.profile.grid();
    if (!(backward.profile.grid() == g) || !(f.grid() == g) || f.support() != Support::Interior)
        throw InvalidInput("pairing fields must share one grid on Q");
    auto cp = carrier_product(g, forward.params, backward.params);
    auto sym = product_symbol(g, forward.params, backward.params);
    auto w = ComplexField::on_q(g), l = ComplexField::on_q(g);
    for (std::size_t i = 0; i < w.values().size(); ++i) {
        w.values()[i] = f.values()[i] * cp.values()[i] * forward.profile.values()[i] *
                        backward.profile.values()[i];
        l.values()[i] = f.values()[i] * sym.values()[i];
    }
    return {integrate(w), integrate(l)};
}

cd fourier_sample(const Field& f, const std::vector<double>& xi, double tau) {
    if (f.support() != Support::Interior) throw InvalidInput("fourier sample needs a field on Q");
    const auto& g = f.grid();
    auto w = ComplexField::sample_q(g, [&](Point x, double t) { return std::exp(-I * (dot(xi, x) + tau * t)); });
    for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] *= f.values()[i];
    return integrate(w);
}

ComplexField materialize(const CGOSolution& sol) {
    const auto& g = sol.profile.grid();
    auto out = ComplexField::on_q(g);
    const double limit = std::log(kMaterializeLimit);
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n = 0; n < g.space_nodes(); ++n) {
            cd e = carrier_exponent(sol.params, g.coord(n), g.time(k));
            cd p = sol.profile.at(k, n);
            if (p != 0.0 && e.real() + std::log(std::abs(p)) > limit)
                throw SolverError("materialized CGO exceeds e^50", k);
            out.at(k, n) = std::exp(e) * p;
        }
    return out;
}

std::vector<SweepEntry> remainder_sweep(const SpaceTimeGrid& grid, const Field& q, CGOParameters base,
                                        const std::vector<double>& rhos, const SolverSettings& settings) {
    std::vector<SweepEntry> out;
    for (double r : rhos) {
        base.rho = r;
        auto s = build(grid, q, base, settings);
        out.push_back({r, s.remainder_norm, s.residual, s.max_materialized, s.warnings});
    }
    return out;
}

}  // namespace pipl
