#include <cmath>
#include <cstring>
#include <limits>
#include <map>

#include "operator.hpp"

namespace pipl {

using detail::StepMatrix;
using detail::Stencil;

std::string to_string(TimeScheme s) {
    return s == TimeScheme::ImplicitEuler ? "implicit-euler" : "crank-nicolson";
}

std::string to_string(Strategy s) { return s == Strategy::Picard ? "picard" : "newton"; }

namespace {

const DiffusionTensor& identity_tensor() {
    static const DiffusionTensor id = DiffusionTensor::identity();
    return id;
}

/// Stencils per time level, shared when gamma does not depend on t.
template <class S>
class StencilCache {
public:
    StencilCache(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, std::array<S, 2> drift,
                 bool reversed)
        : grid_(grid), gamma_(gamma), drift_(drift), reversed_(reversed),
          tdep_(gamma.time_dependent()) {}

    const Stencil<S>& at(int level) {
        int key = tdep_ ? level : 0;
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        if (tdep_ && cache_.size() > 4) cache_.erase(cache_.begin());
        double t = grid_.time(level);
        if (reversed_) t = grid_.horizon() - t;
        return cache_.emplace(key, detail::assemble(grid_, gamma_, drift_, t)).first->second;
    }

    bool time_dependent() const { return tdep_; }

private:
    const SpaceTimeGrid& grid_;
    const DiffusionTensor& gamma_;
    std::array<S, 2> drift_;
    bool reversed_;
    bool tdep_;
    std::map<int, Stencil<S>> cache_;
};

template <class S>
bool all_finite(const std::vector<S>& v) {
    for (const auto& x : v)
        if (!std::isfinite(std::abs(x))) return false;
    return true;
}

Field reverse_time(const Field& f) {
    Field r = f;
    int L = f.levels();
    for (int k = 0; k < L; ++k) std::copy(f.level(k), f.level(k) + f.width(), r.level(L - 1 - k));
    return r;
}

void check_grid(const Field& f, const SpaceTimeGrid& grid, const char* what) {
    if (!f.empty() && !(f.grid() == grid))
        throw InvalidInput(std::string(what) + " is defined on a different grid");
}

}  // namespace

template <class S>
BasicField<S> dirichlet_nodal(const BasicField<S>& trace, const SpaceTimeGrid& grid) {
    if (!(trace.grid() == grid)) throw InvalidInput("boundary data on a different grid");
    if (trace.support() == Support::Interior) return trace;
    if (trace.support() != Support::Boundary) throw InvalidInput("boundary data must live on Sigma or Q");
    auto out = BasicField<S>::on_q(grid);
    for (int k = 0; k < grid.time_levels(); ++k)
        for (int e = 0; e < trace.width(); ++e) out.at(k, trace.entries()[e].node) = trace.at(k, e);
    return out;
}

template <class S>
BasicField<S> march(const ParabolicProblem<S>& P) {
    const auto& g = *P.grid;
    const auto& gamma = P.gamma ? *P.gamma : identity_tensor();
    const int N = g.space_nodes();
    const double dt = g.dt(), th = P.theta;
    auto U = BasicField<S>::on_q(g);
    if (P.initial) {
        std::copy(P.initial->level(0), P.initial->level(0) + N, U.level(0));
    } else if (P.dirichlet) {
        for (int b : g.boundary_nodes()) U.at(0, b) = P.dirichlet->at(0, b);
    }
    StencilCache<S> stencils(g, gamma, P.drift, P.reversed_time);
    StepMatrix<S> M;
    std::vector<double> last_q;
    bool factored = false;
    std::vector<S> rhs(N), work(N);
    std::vector<int> boundary = g.boundary_nodes();
    for (int n = 0; n < g.time_steps(); ++n) {
        const S* un = U.level(n);
        std::copy(un, un + N, rhs.begin());
        const auto& L1 = stencils.at(n + 1);
        if (th < 1.0) {
            const auto& L0 = stencils.at(n);
            L0.apply(un, work.data());
            const double* q0 = P.potential ? P.potential->level(n) : nullptr;
            for (int i : L0.rows) {
                S lu = work[i] + (q0 ? S(q0[i]) * un[i] : S{});
                rhs[i] -= (1.0 - th) * dt * lu;
            }
        }
        if (P.source) {
            const S* h0 = P.source->level(n);
            const S* h1 = P.source->level(n + 1);
            for (int i : L1.rows) rhs[i] += dt * (th * h1[i] + (1.0 - th) * h0[i]);
        }
        for (int b : boundary) rhs[b] = P.dirichlet ? P.dirichlet->at(n + 1, b) : S{};
        const double* q1 = P.potential ? P.potential->level(n + 1) : nullptr;
        bool need = !factored || stencils.time_dependent();
        if (!need && q1 && std::memcmp(q1, last_q.data(), N * sizeof(double)) != 0) need = true;
        if (need) {
            M.factor(g, L1, th * dt, q1, n + 1);
            if (q1) last_q.assign(q1, q1 + N);
            factored = true;
        }
        M.solve(rhs);
        if (!all_finite(rhs)) throw SolverError("non-finite solution", n + 1);
        for (int b : boundary) rhs[b] = P.dirichlet ? P.dirichlet->at(n + 1, b) : S{};
        std::copy(rhs.begin(), rhs.end(), U.level(n + 1));
    }
    return U;
}

template <class S>
double step_residual(const ParabolicProblem<S>& P, const BasicField<S>& U) {
    const auto& g = *P.grid;
    const auto& gamma = P.gamma ? *P.gamma : identity_tensor();
    const int N = g.space_nodes();
    const double dt = g.dt(), th = P.theta;
    StencilCache<S> stencils(g, gamma, P.drift, P.reversed_time);
    std::vector<S> w0(N), w1(N);
    double worst = 0.0;
    for (int n = 0; n < g.time_steps(); ++n) {
        const S* un = U.level(n);
        const S* u1 = U.level(n + 1);
        const auto& L1 = stencils.at(n + 1);
        const auto& L0 = stencils.at(n);
        L1.apply(u1, w1.data());
        L0.apply(un, w0.data());
        const double* q0 = P.potential ? P.potential->level(n) : nullptr;
        const double* q1 = P.potential ? P.potential->level(n + 1) : nullptr;
        for (int i : L1.rows) {
            S a1 = w1[i] + (q1 ? S(q1[i]) * u1[i] : S{});
            S a0 = w0[i] + (q0 ? S(q0[i]) * un[i] : S{});
            S r = u1[i] - un[i] + dt * (th * a1 + (1.0 - th) * a0);
            if (P.source) r -= dt * (th * P.source->at(n + 1, i) + (1.0 - th) * P.source->at(n, i));
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst / std::max(1.0, U.max_abs());
}

template BasicField<double> march(const ParabolicProblem<double>&);
template BasicField<std::complex<double>> march(const ParabolicProblem<std::complex<double>>&);
template double step_residual(const ParabolicProblem<double>&, const BasicField<double>&);
template double step_residual(const ParabolicProblem<std::complex<double>>&,
                              const BasicField<std::complex<double>>&);
template BasicField<double> dirichlet_nodal(const BasicField<double>&, const SpaceTimeGrid&);
template BasicField<std::complex<double>> dirichlet_nodal(const BasicField<std::complex<double>>&,
                                                          const SpaceTimeGrid&);

SolveReport solve_linear(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                         const Field& f, const Field& g, const Field& h,
                         const SolverSettings& settings) {
    check_grid(q, grid, "potential");
    check_grid(f, grid, "boundary data");
    check_grid(g, grid, "initial data");
    check_grid(h, grid, "source");
    if (!g.empty() && g.support() != Support::Initial) throw InvalidInput("initial data must live on Omega");
    if (!q.empty() && q.support() != Support::Interior) throw InvalidInput("potential must live on Q");
    if (!h.empty() && h.support() != Support::Interior) throw InvalidInput("source must live on Q");
    Field fn;
    if (!f.empty()) fn = dirichlet_nodal(f, grid);
    ParabolicProblem<double> P;
    P.grid = &grid;
    P.gamma = &gamma;
    P.potential = q.empty() ? nullptr : &q;
    P.source = h.empty() ? nullptr : &h;
    P.dirichlet = fn.empty() ? nullptr : &fn;
    P.initial = g.empty() ? nullptr : &g;
    P.theta = settings.scheme == TimeScheme::CrankNicolson ? 0.5 : 1.0;
    SolveReport rep;
    rep.scheme = to_string(settings.scheme);
    rep.solution = march(P);
    rep.iterations = 1;
    rep.residuals.push_back(step_residual(P, rep.solution));
    return rep;
}

SolveReport solve_backward(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                           const Field& terminal, const Field& f, const Field& h,
                           const SolverSettings& settings) {
    Field qr = q.empty() ? q : reverse_time(q);
    Field fr = f.empty() ? f : reverse_time(dirichlet_nodal(f, grid));
    Field hr = h.empty() ? h : reverse_time(h);
    check_grid(terminal, grid, "terminal data");
    ParabolicProblem<double> P;
    P.grid = &grid;
    P.gamma = &gamma;
    P.potential = qr.empty() ? nullptr : &qr;
    P.source = hr.empty() ? nullptr : &hr;
    P.dirichlet = fr.empty() ? nullptr : &fr;
    P.initial = terminal.empty() ? nullptr : &terminal;
    P.theta = settings.scheme == TimeScheme::CrankNicolson ? 0.5 : 1.0;
    P.reversed_time = true;
    SolveReport rep;
    rep.scheme = to_string(settings.scheme) + "/reversed";
    Field w = march(P);
    rep.residuals.push_back(step_residual(P, w));
    rep.solution = reverse_time(w);
    rep.iterations = 1;
    return rep;
}

namespace {

Field derivative_at_zero(const Nonlinearity& nl, const SpaceTimeGrid& grid) {
    Field q = Field::on_q(grid);
    for (int k = 0; k < grid.time_levels(); ++k)
        for (int n = 0; n < grid.space_nodes(); ++n)
            q.at(k, n) = nl.evaluate(grid.coord(n), grid.time(k), 0.0, 1);
    return q;
}

double data_size(const Field& f, const Field& g, const SpaceTimeGrid& grid) {
    double s = g.empty() ? 0.0 : norm(g, NormSpace::L2Omega);
    if (!f.empty()) {
        Field fn = dirichlet_nodal(f, grid);
        auto entries = BoundaryPortion::full().resolve(grid);
        Field trace = Field::on_boundary(grid, entries);
        for (int k = 0; k < grid.time_levels(); ++k)
            for (std::size_t e = 0; e < entries.size(); ++e) trace.at(k, e) = fn.at(k, entries[e].node);
        s += norm(trace, NormSpace::L2Sigma);
    }
    return s;
}

SolveReport picard(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                   const Field* fn, const Field* g, const SolverSettings& settings) {
    Field h0 = zero_level_source(nl, grid);
    bool has_source = h0.max_abs() > 0.0;
    ParabolicProblem<double> P;
    P.grid = &grid;
    P.gamma = &gamma;
    P.dirichlet = fn;
    P.initial = g;
    P.source = has_source ? &h0 : nullptr;
    P.theta = settings.scheme == TimeScheme::CrankNicolson ? 0.5 : 1.0;
    auto Psi = [&](const Field& z) {
        Field q = freeze_quotient(nl, z);
        P.potential = &q;
        Field u = march(P);
        P.potential = nullptr;
        return u;
    };
    auto rel = [](const Field& psi, const Field& z) {
        double d = norm(psi - z, NormSpace::L2Q);
        double s = norm(psi, NormSpace::L2Q);
        return s > 0.0 ? d / s : d;
    };
    SolveReport rep;
    rep.scheme = to_string(settings.scheme) + "/picard";
    Field q0 = derivative_at_zero(nl, grid);
    P.potential = &q0;
    Field z = march(P);
    P.potential = nullptr;
    Field psi = Psi(z);
    double r = rel(psi, z);
    rep.residuals.push_back(r);
    rep.iterations = 1;
    rep.converged = false;
    while (rep.iterations < settings.max_iter) {
        if (!std::isfinite(r)) throw SolverError("fixed-point iteration produced NaN");
        if (r <= settings.tol) {
            rep.converged = true;
            break;
        }
        double w = 1.0;
        Field cand, psi_c;
        double r_c = std::numeric_limits<double>::infinity();
        for (int tries = 0; tries < 8; ++tries) {
            cand = z;
            cand.axpy(w, psi - z);
            psi_c = Psi(cand);
            r_c = rel(psi_c, cand);
            if (r_c <= r) break;
            w *= settings.damping;
        }
        if (!(r_c <= r)) rep.notes.push_back("damping did not reduce the residual at iteration " +
                                             std::to_string(rep.iterations));
        z = std::move(cand);
        psi = std::move(psi_c);
        r = r_c;
        rep.residuals.push_back(r);
        ++rep.iterations;
    }
    if (!rep.converged && r <= settings.tol) rep.converged = true;
    rep.solution = std::move(psi);
    if (!rep.converged) rep.notes.push_back("fixed-point iteration did not converge");
    return rep;
}

SolveReport newton(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                   const Field* fn, const Field* g, const SolverSettings& settings) {
    const int N = grid.space_nodes();
    const double dt = grid.dt();
    const double th = settings.scheme == TimeScheme::CrankNicolson ? 0.5 : 1.0;
    SolveReport rep;
    rep.scheme = to_string(settings.scheme) + "/newton";
    Field U = Field::on_q(grid);
    if (g) std::copy(g->level(0), g->level(0) + N, U.level(0));
    else if (fn)
        for (int b : grid.boundary_nodes()) U.at(0, b) = fn->at(0, b);
    StencilCache<double> stencils(grid, gamma, {0.0, 0.0}, false);
    std::vector<double> base(N), F(N), u(N), trial(N), Ftrial(N), work(N), q(N);
    std::vector<int> boundary = grid.boundary_nodes();
    const int max_newton = 60;
    std::vector<Point> xs(N);
    for (int i = 0; i < N; ++i) xs[i] = grid.coord(i);
    for (int n = 0; n < grid.time_steps(); ++n) {
        const double t0 = grid.time(n), t1 = grid.time(n + 1);
        const double* un = U.level(n);
        const auto& L1 = stencils.at(n + 1);
        std::copy(un, un + N, base.begin());
        if (th < 1.0) {
            stencils.at(n).apply(un, work.data());
            for (int i : L1.rows) base[i] -= (1.0 - th) * dt * (work[i] + nl.evaluate(xs[i], t0, un[i]));
        }
        std::copy(un, un + N, u.begin());
        for (int b : boundary) u[b] = fn ? fn->at(n + 1, b) : 0.0;
        auto residual = [&](const std::vector<double>& v, std::vector<double>& out) {
            L1.apply(v.data(), work.data());
            double m = 0.0;
            std::fill(out.begin(), out.end(), 0.0);
            for (int i : L1.rows) {
                out[i] = v[i] + th * dt * (work[i] + nl.evaluate(xs[i], t1, v[i])) - base[i];
                m = std::max(m, std::abs(out[i]));
            }
            return m;
        };
        double rn = residual(u, F);
        bool ok = false;
        int it = 0;
        for (; it < max_newton; ++it) {
            for (int i : L1.rows) q[i] = nl.evaluate(xs[i], t1, u[i], 1);
            StepMatrix<double> J;
            J.factor(grid, L1, th * dt, q.data(), n + 1);
            std::vector<double> delta(N);
            for (int i = 0; i < N; ++i) delta[i] = -F[i];
            J.solve(delta);
            if (!all_finite(delta)) throw SolverError("Newton update is not finite", n + 1);
            double lam = 1.0, rt = 0.0;
            for (int ls = 0; ls < 30; ++ls) {
                for (int i = 0; i < N; ++i) trial[i] = u[i] + lam * delta[i];
                rt = residual(trial, Ftrial);
                if (rt <= rn || rt == 0.0) break;
                lam *= 0.5;
            }
            double step = 0.0, umax = 0.0;
            for (int i = 0; i < N; ++i) {
                step = std::max(step, std::abs(lam * delta[i]));
                umax = std::max(umax, std::abs(trial[i]));
            }
            u.swap(trial);
            F.swap(Ftrial);
            rn = rt;
            if (!std::isfinite(rn)) throw SolverError("Newton residual is not finite", n + 1);
            if (step <= 1e-14 * (1.0 + umax) || rn == 0.0) {
                ok = true;
                ++it;
                break;
            }
        }
        rep.iterations += it;
        rep.residuals.push_back(rn);
        if (!ok) {
            rep.converged = false;
            rep.notes.push_back("Newton did not converge at time level " + std::to_string(n + 1));
        }
        std::copy(u.begin(), u.end(), U.level(n + 1));
    }
    rep.solution = std::move(U);
    return rep;
}

}  // namespace

SolveReport solve_semilinear(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                             const Nonlinearity& nl, const Field& f, const Field& g, Strategy strategy,
                             const SolverSettings& settings) {
    check_grid(f, grid, "boundary data");
    check_grid(g, grid, "initial data");
    if (!g.empty() && g.support() != Support::Initial) throw InvalidInput("initial data must live on Omega");
    Field fn;
    if (!f.empty()) fn = dirichlet_nodal(f, grid);
    const Field* fp = fn.empty() ? nullptr : &fn;
    const Field* gp = g.empty() ? nullptr : &g;
    SolveReport rep = strategy == Strategy::Picard ? picard(grid, gamma, nl, fp, gp, settings)
                                                   : newton(grid, gamma, nl, fp, gp, settings);
    if (nl.cls() == NonlinearityClass::AdmissibleAnalytic) {
        double size = data_size(f, g, grid);
        if (size > settings.smallness) {
            rep.well_posed_regime = false;
            rep.notes.push_back("data size " + std::to_string(size) + " exceeds smallness gate " +
                                std::to_string(settings.smallness) + "; well-posedness not asserted");
        }
    }
    return rep;
}

struct TangentSolver::Impl {
    SpaceTimeGrid grid;
    DiffusionTensor gamma;
    std::vector<StepMatrix<double>> steps;  ///< indexed by target level - 1 through `which`
    std::vector<int> which;
    std::vector<int> interior;
    std::vector<int> boundary;
};

TangentSolver::TangentSolver(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                             const Field& potential)
    : impl_(std::make_unique<Impl>()) {
    impl_->grid = grid;
    impl_->gamma = gamma;
    impl_->interior = grid.interior_nodes();
    impl_->boundary = grid.boundary_nodes();
    StencilCache<double> stencils(impl_->grid, impl_->gamma, {0.0, 0.0}, false);
    const int N = grid.space_nodes();
    const double* prev_q = nullptr;
    for (int n = 0; n < grid.time_steps(); ++n) {
        const double* q1 = potential.empty() ? nullptr : potential.level(n + 1);
        bool reuse = !impl_->steps.empty() && !stencils.time_dependent() &&
                     (q1 == nullptr || (prev_q && std::memcmp(q1, prev_q, N * sizeof(double)) == 0));
        if (!reuse) {
            StepMatrix<double> M;
            M.factor(grid, stencils.at(n + 1), grid.dt(), q1, n + 1);
            impl_->steps.push_back(std::move(M));
        }
        impl_->which.push_back(static_cast<int>(impl_->steps.size()) - 1);
        prev_q = q1;
    }
}

TangentSolver::~TangentSolver() = default;
TangentSolver::TangentSolver(TangentSolver&&) noexcept = default;
TangentSolver& TangentSolver::operator=(TangentSolver&&) noexcept = default;

const SpaceTimeGrid& TangentSolver::grid() const { return impl_->grid; }

Field TangentSolver::forward(const Field* initial, const Field* source, const Field* dirichlet) const {
    const auto& g = impl_->grid;
    const int N = g.space_nodes();
    const double dt = g.dt();
    Field U = Field::on_q(g);
    if (initial) std::copy(initial->level(0), initial->level(0) + N, U.level(0));
    std::vector<double> r(N);
    for (int n = 0; n < g.time_steps(); ++n) {
        std::copy(U.level(n), U.level(n) + N, r.begin());
        if (source)
            for (int i : impl_->interior) r[i] += dt * source->at(n + 1, i);
        for (int b : impl_->boundary) r[b] = dirichlet ? dirichlet->at(n + 1, b) : 0.0;
        impl_->steps[impl_->which[n]].solve(r);
        std::copy(r.begin(), r.end(), U.level(n + 1));
    }
    return U;
}

TangentSolver::Cotangents TangentSolver::adjoint(const Field& G) const {
    const auto& g = impl_->grid;
    const int N = g.space_nodes();
    const double dt = g.dt();
    Cotangents out{Field::on_omega(g), Field::on_q(g), Field::on_q(g)};
    std::vector<double> lam(G.level(g.time_steps()), G.level(g.time_steps()) + N);
    for (int n = g.time_steps(); n >= 1; --n) {
        impl_->steps[impl_->which[n - 1]].solve_transpose(lam);
        for (int i : impl_->interior) out.source.at(n, i) = dt * lam[i];
        for (int b : impl_->boundary) out.dirichlet.at(n, b) = lam[b];
        std::vector<double> next(G.level(n - 1), G.level(n - 1) + N);
        for (int i : impl_->interior) next[i] += lam[i];
        lam.swap(next);
    }
    std::copy(lam.begin(), lam.end(), out.initial.level(0));
    return out;
}

}  // namespace pipl
