#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "pipl/dnmap.hpp"

namespace pipl {

// ---------------------------------------------------------------- Carleman weights

/// Weight base psi on the space nodes together with its nodal gradient.
struct WeightBase {
    Field psi;                   ///< on Omega
    std::vector<Point> grad;     ///< per space node
    Point x0{0.0, 0.0};          ///< psi(x) = |x - x0|^2 / scale
    double scale = 1.0;
    double sup = 0.0;            ///< max psi over the closure
    double min_interior = 0.0;   ///< min psi over interior nodes
    double min_grad = 0.0;       ///< min |grad psi| over all nodes
    double worst_flux = 0.0;     ///< max of (gamma grad psi) . nu over sampled unobserved boundary nodes
    bool admissible = false;     ///< psi > 0 inside, |grad psi| > 0, flux <= 0 off Gamma0
    std::vector<std::string> notes;
};

/// psi(x) = |x - x0|^2 / s with x0 outside the closure on the side facing away from
/// Gamma0 (so grad psi . nu <= 0 on the rest of the boundary), scaled to max psi = 1.
WeightBase default_weight_base(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const BoundaryPortion& gamma0);

struct CarlemanConfig {
    BoundaryPortion gamma0 = BoundaryPortion::full();
    DiffusionTensor gamma = DiffusionTensor::identity();
    double window = 0.02;  ///< theta_1 evaluated on [window T, (1 - window) T]
    double K = 0.1, t0 = 0.2, L = 1.0;

    /// Throws InvalidInput unless K > 0, 0 < t0 < T and K + t0 < min{1, 1/(2L)}.
    void validate(double horizon) const;
};

/// Both sides of a weighted inequality, stored as value * exp(log_scale) to survive the
/// dynamic range of the weights. Data are interpolated multilinearly between nodes and the
/// weights are sampled exactly on sub-cells sized to their local variation.
struct InequalityReport {
    std::string lemma;  ///< "interior" (theta_1 weights) or "initial" (theta_2 weights)
    double lambda = 0.0;
    double mu = 0.0;  ///< interior check
    double L = 0.0;   ///< initial check
    double lhs = 0.0, rhs = 0.0;
    double log_scale = 0.0;
    double ratio = 0.0;  ///< lhs / rhs; 0 when both vanish
    bool degenerate = false;
    double dynamic_range = 0.0;  ///< log10 of the spread of the weights
    std::vector<std::string> notes;
};

nlohmann::json report_json(const InequalityReport& r);

/// Interior estimate with theta_1 = exp(lambda eta):
/// lhs = int theta_1^2 (lambda mu^2 phi |grad u|^2 + lambda^3 mu^4 phi^3 u^2),
/// rhs = int theta_1^2 F^2 + int_{Gamma0 x (0,T)} theta_1^2 lambda mu phi |d_nu u|^2.
InequalityReport carleman_check_1(const Field& u, const Field& F, const CarlemanConfig& cfg, double lambda, double mu);

/// Initial-layer estimate with theta_2 = 1 / (K + t0 - t) on [0, t0], log-space weights:
/// lhs = int theta_2^{2 lambda} (lambda theta_2^2 u^2 + L grad u . gamma grad u) + lambda/(K+t0)^{2 lambda+1} |u(0)|^2,
/// rhs = lambda/K^{2 lambda+1} |u(t0)|^2 + (K+t0)^{-2 lambda} grad u(0) . gamma grad u(0) + int theta_2^{2 lambda} F^2.
/// t0 is snapped to the nearest time level.
InequalityReport carleman_check_2(const Field& u, const Field& F, const CarlemanConfig& cfg, double lambda);

std::vector<InequalityReport> carleman_sweep_1(const Field& u, const Field& F, const CarlemanConfig& cfg,
                                               const std::vector<double>& lambdas, const std::vector<double>& mus);
std::vector<InequalityReport> carleman_sweep_2(const Field& u, const Field& F, const CarlemanConfig& cfg,
                                               const std::vector<double>& lambdas);

/// Heat solution e^{-pi^2 t} prod sin(pi x_i) sampled on Q (F = 0 for gamma = I, A = 0).
Field heat_oracle(const SpaceTimeGrid& grid);

// ---------------------------------------------------------------- stability audit

struct AuditPoint {
    double scale = 0.0;
    double lhs = 0.0;          ///< |g1 - g2|^2_{L2(Omega)}
    double dn_diff = 0.0;      ///< |d_nu (u1 - u2)|_{L2(Gamma0 x (0,T))}
    double bound = 0.0;        ///< fitted right-hand side at this point
};

struct StabilityAudit {
    std::vector<AuditPoint> points;
    double M = 0.0;       ///< a-priori bound: max discrete H1 norm of g1 - g2 over the family
    double C = 0.0, delta0 = 0.0;
    bool monotone_lhs = false, monotone_dn = false;
    bool bound_dominates = false;
};

/// Family g2 = g1 + s h over the given scales, measured on gamma0 with f = 0.
StabilityAudit stability_audit(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                               const Field& g1, const Field& h, const std::vector<double>& scales,
                               const BoundaryPortion& gamma0, const SolverSettings& settings = {});

nlohmann::json audit_json(const StabilityAudit& a);

// ---------------------------------------------------------------- maximum principle

struct MaxPrincipleCertificate {
    double min_value = 0.0;  ///< over interior nodes, levels >= 1
    int min_level = 0, min_node = 0;
    double min_beyond_first = 0.0;  ///< over interior nodes, levels >= 2
    double sup_norm = 0.0;
    bool nonnegative = false;         ///< min_value >= -1e-8 sup_norm
    bool positive_beyond_first = false;
};

/// Linear solve with potential q, Dirichlet data f and zero initial data; throws DomainError
/// naming the node when nonnegativity fails.
MaxPrincipleCertificate max_principle_check(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                            const Field& f, const SolverSettings& settings = {});

// ---------------------------------------------------------------- non-uniqueness

struct NonuniquenessOptions {
    double collar = 0.1;  ///< width of the boundary layer where both states vanish
    std::vector<Point> centers{{0.35, 0.5}, {0.65, 0.5}};
    double radius = 0.15;
    double amplitude = 1.0;
};

struct NonuniquenessDemo {
    Field u1, u2;            ///< constructed states on Q
    Field g1, g2;            ///< initial data
    Field A1, A2;            ///< sources a_j(x, t, u) = A_j(x, t) on Q
    Field trace1, trace2;    ///< passive DN traces of the forward solves (full boundary)
    double trace_sup1 = 0.0, trace_sup2 = 0.0;
    double state_sup1 = 0.0, state_sup2 = 0.0;
    double reproduction = 0.0;  ///< max |forward solve - constructed state|
    double g_diff = 0.0;        ///< |g1 - g2|_{L2(Omega)}
    bool valid = false;         ///< traces below 1e-8 (1 + sup |u_j|) and g_diff >= 0.1
};

/// Two smooth compactly supported states inside the collar, with A_j the discrete residual
/// of the implicit Euler scheme, so the forward solves reproduce them exactly.
NonuniquenessDemo nonuniqueness_demo(const SpaceTimeGrid& grid, const NonuniquenessOptions& options = {},
                                     const DiffusionTensor& gamma = DiffusionTensor::identity());

}  // namespace pipl
