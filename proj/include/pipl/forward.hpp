#pragma once

#include <array>
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "pipl/grid.hpp"
#include "pipl/model.hpp"

namespace pipl {

enum class TimeScheme { ImplicitEuler, CrankNicolson };
enum class Strategy { Picard, Newton };

std::string to_string(TimeScheme s);
std::string to_string(Strategy s);

struct SolverSettings {
    TimeScheme scheme = TimeScheme::ImplicitEuler;
    double tol = 1e-10;       ///< relative L2(Q) update tolerance of the fixed-point iteration
    int max_iter = 200;
    double damping = 0.5;     ///< factor applied to the relaxation weight when the update grows
    double smallness = 1.0;   ///< data size above which well-posedness is not asserted
};

struct SolveReport {
    Field solution;
    int iterations = 0;
    std::vector<double> residuals;
    bool converged = true;
    std::string scheme;
    bool well_posed_regime = true;
    std::vector<std::string> notes;
};

/// Linear problem u_t - div(gamma grad u) - drift . grad u + q u = h with Dirichlet data on
/// the lateral boundary. Null pointers mean zero data.
template <class S>
struct ParabolicProblem {
    const SpaceTimeGrid* grid = nullptr;
    const DiffusionTensor* gamma = nullptr;
    std::array<S, 2> drift{};
    const Field* potential = nullptr;        ///< on Q
    const BasicField<S>* source = nullptr;   ///< on Q
    const BasicField<S>* dirichlet = nullptr;///< on Q; only boundary nodes are read
    const BasicField<S>* initial = nullptr;  ///< on Omega
    double theta = 1.0;                      ///< 1 implicit Euler, 1/2 Crank-Nicolson
    bool reversed_time = false;              ///< coefficients evaluated at T - t
};

/// Theta-scheme time march. Throws SolverError on a singular step system.
template <class S>
BasicField<S> march(const ParabolicProblem<S>& problem);

/// Largest step residual over interior nodes relative to max(1, max |u|), in the
/// form (A u^{n+1} - rhs) that the march solves.
template <class S>
double step_residual(const ParabolicProblem<S>& problem, const BasicField<S>& u);

/// Converts a boundary trace (or a nodal field on Q) to a nodal Dirichlet field on Q.
template <class S>
BasicField<S> dirichlet_nodal(const BasicField<S>& trace, const SpaceTimeGrid& grid);

/// Linear solve with potential q and source h. Empty fields mean zero data.
SolveReport solve_linear(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                         const Field& f, const Field& g, const Field& h,
                         const SolverSettings& settings = {});

/// Backward problem -w_t - div(gamma grad w) + q w = h, w(T) = terminal, via s = T - t.
SolveReport solve_backward(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                           const Field& terminal, const Field& f, const Field& h = Field{},
                           const SolverSettings& settings = {});

/// u_t - div(gamma grad u) + b(x, t, u) = 0 with Dirichlet data f and initial data g.
SolveReport solve_semilinear(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                             const Nonlinearity& nl, const Field& f, const Field& g,
                             Strategy strategy = Strategy::Newton,
                             const SolverSettings& settings = {});

/// Implicit-Euler solution operator with a fixed potential, factored once per step,
/// together with its exact discrete adjoint.
class TangentSolver {
public:
    TangentSolver(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& potential);
    ~TangentSolver();
    TangentSolver(TangentSolver&&) noexcept;
    TangentSolver& operator=(TangentSolver&&) noexcept;

    const SpaceTimeGrid& grid() const;

    /// Null pointers mean zero data; dirichlet is nodal on Q.
    Field forward(const Field* initial, const Field* source, const Field* dirichlet) const;

    struct Cotangents {
        Field initial;    ///< on Omega (all nodes)
        Field source;     ///< on Q
        Field dirichlet;  ///< nodal on Q (boundary nodes meaningful)
    };
    /// Gradient of J with respect to the inputs given dJ/du on every node and level.
    Cotangents adjoint(const Field& dJ_du) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace pipl
