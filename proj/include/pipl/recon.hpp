#pragma once

#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "pipl/cgo.hpp"
#include "pipl/dnmap.hpp"
#include "pipl/linearize.hpp"

namespace pipl {

struct Regularization {
    std::string method;
    double parameter = 0.0;
    std::string rule;
};

struct ReconstructionResult {
    Field recovered;
    std::vector<double> residuals;  ///< data misfit per outer iteration
    Regularization regularization;
    bool has_truth = false;
    double truth_error = std::numeric_limits<double>::quiet_NaN();  ///< relative L2 error
    bool converged = true;
    std::vector<int> masked;  ///< flat indices excluded from pointwise division
    std::vector<std::string> notes;
};

nlohmann::json result_json(const ReconstructionResult& r);

/// Relative L2 error over the support of the fields (absolute when the truth vanishes).
double relative_error(const Field& estimate, const Field& truth);

// ---------------------------------------------------------------- potential

struct FourierSample {
    std::vector<double> omega;
    std::vector<double> xi;
    double tau = 0.0;
    double rho = 0.0;
    CarrierKind carrier = CarrierKind::Real;
    std::complex<double> value;  ///< boundary functional, approximately the Fourier sample of the difference
    double remainder_forward = 0.0;
    double remainder_backward = 0.0;
};

struct FourierSampleSet {
    std::vector<FourierSample> samples;
    /// Largest relative deviation |s(-xi,-tau) - conj s(xi,tau)| over pairs present in the set
    /// that share carrier, omega and rho.
    double conjugate_defect() const;
};

/// DN trace of the forward CGO of a model, expressed in the profile frame: the physical
/// normal derivative with the known carrier factored out.
struct ProfileMeasurement {
    CGOParameters params;
    ComplexField values;  ///< support Boundary
};

enum class DataMode { Full, Partial };

/// Faces on which the backward partial profile is not forced to vanish (where data is needed).
BoundaryPortion measured_portion(const SpaceTimeGrid& grid, const CGOParameters& params, DataMode mode);

/// Default probe lattice: real carriers along +-axes with xi perpendicular to omega, plus
/// one-dimensional complex-exponential carriers for nonzero spatial frequencies. Temporal
/// frequencies pi k / T for |k| <= max_mode; spatial frequencies pi j / L for |j| <= max_space_mode.
std::vector<CGOParameters> probe_lattice(const SpaceTimeGrid& grid, double rho, int max_mode, DataMode mode,
                                        int max_space_mode = 2);

ProfileMeasurement measure_profile(const SpaceTimeGrid& grid, const Field& q, const CGOParameters& params,
                                   DataMode mode, const SolverSettings& settings = {});

struct PotentialOptions {
    int modes_x = 4;  ///< cosine modes 0..modes_x per space axis
    int modes_t = 4;
    double alpha = 1e-6;  ///< Tikhonov weight relative to the largest squared singular value
    int born_iterations = 6;
    DataMode mode = DataMode::Full;
    double known_lo = 0.0, known_hi = 0.0;  ///< partial mode: x-interval where the difference is known to vanish
    SolverSettings settings{};
};

struct PotentialRecovery {
    ReconstructionResult result;  ///< recovered q_ref - q_truth on Q
    FourierSampleSet samples;
};

PotentialRecovery recover_potential(const SpaceTimeGrid& grid, const Field& q_reference,
                                    const std::vector<ProfileMeasurement>& data, const PotentialOptions& options,
                                    const Field* truth_difference = nullptr);

/// Volume and boundary sides of the integral identity for one twin pair.
struct IdentityCheck {
    std::complex<double> volume;    ///< integral of (q_ref - q_truth) u_truth v_ref
    std::complex<double> boundary;  ///< - integral over Sigma of v_ref d_nu(u_truth - u_ref)
    double relative_gap = 0.0;
};

IdentityCheck identity_check(const SpaceTimeGrid& grid, const Field& q_truth, const Field& q_reference,
                             const CGOParameters& params, DataMode mode = DataMode::Full,
                             const SolverSettings& settings = {});

// ---------------------------------------------------------------- positivity

struct PositiveSolution {
    Field solution;
    double min_interior = 0.0;  ///< over interior nodes and levels >= 1
    int min_level = 0, min_node = 0;
};

/// Linear solve with potential q, data f >= 0 and zero initial data; throws DomainError when
/// the interior minimum beyond level 0 is not positive.
PositiveSolution positive_solution(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                   const Field& f, const SolverSettings& settings = {});

// ---------------------------------------------------------------- Taylor coefficients

enum class TaylorMethod { Division, WeightedLS };
std::string to_string(TaylorMethod m);

struct TaylorOptions {
    int order = 3;
    double eps = 1e-2;  ///< amplitude of the corner-sum quotients
    int modes_x = 2, modes_t = 4;  ///< spatial modes beyond the probe lattice are not seen by the data
    double alpha = 1e-8;
    double mask = 1e-6;  ///< relative threshold on the positive product
    TaylorMethod method = TaylorMethod::WeightedLS;
    double rho = 2.0;
    int max_mode = 4;
    double ramp_time = 0.05;  ///< ramp of the positive auxiliary data, as a fraction of T
    SolverSettings settings{};
    int jobs = 1;
};

/// Recovers d_u^k b_truth(., base) - d_u^k b_ref(., base) at k = order from order-k
/// linearized DN data (corner-sum quotients of the truth model). The base state is zero.
ReconstructionResult recover_taylor(const SpaceTimeGrid& grid, const Nonlinearity& truth,
                                    const Nonlinearity& reference, const TaylorOptions& options,
                                    const Field* truth_difference = nullptr);

// ---------------------------------------------------------------- initial data

struct InitialOptions {
    double noise_level = 0.0;  ///< absolute L2(Gamma0 x (0,T)) noise norm for the discrepancy principle
    double tau = 1.1;          ///< discrepancy factor
    double alpha_floor = 1e-10;
    int alpha_steps = 24;      ///< alpha = alpha_max * 10^{-i/2}
    int gauss_newton = 8;
    int cgls_iterations = 200;
    SolverSettings settings{};
};

/// Tikhonov / Gauss-Newton recovery of g from a passive measurement, with the linearized
/// map applied through the exact discrete tangent and adjoint solvers.
ReconstructionResult recover_initial(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                                     const Nonlinearity& nl, const DNMeasurement& data,
                                     const InitialOptions& options, const Field* truth = nullptr);

/// L2(Gamma x (0,T)) norm of a measurement.
double measurement_norm(const DNMeasurement& m);

struct StabilityPoint {
    double delta = 0.0;
    int trial = 0;
    double error = 0.0;         ///< ||g_rec - g||_{L2(Omega)}
    double dn_diff_norm = 0.0;  ///< m = ||Lambda(g_rec) - Lambda(g)||
};

struct StabilityCurve {
    std::vector<StabilityPoint> points;
    double floor_error = 0.0;  ///< noiseless error
    double c1 = 0.0, c2 = 0.0, delta0 = 0.0;
    double two_term_residual = 0.0;
    double linear_coefficient = 0.0, linear_residual = 0.0;
    double spearman = 0.0;  ///< rank correlation of error against delta
};

StabilityCurve stability_curve(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                               const Field& truth, const BoundaryPortion& gamma0, const std::vector<double>& deltas,
                               int trials, std::uint64_t seed, const InitialOptions& options = {});

double spearman(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------- null control

struct ControlOptions {
    int time_splines = 16;  ///< cubic B-splines on (0, T - eps], the first one dropped
    double alpha = 1e-12;   ///< Tikhonov weight relative to the largest column norm squared
    int cgls_iterations = 200;
    int gauss_newton = 10;
    double target_reduction = 100.0;
    SolverSettings settings{};
};

struct ControlResult {
    Field control;  ///< nodal Dirichlet data on Q, zero after the switch time
    std::vector<double> coefficients;
    int switch_level = 0;
    double uncontrolled_norm = 0.0;
    double terminal_norm = 0.0;
    double continuation_max = 0.0;  ///< max L2(Omega) norm over levels after the switch
    std::vector<double> history;    ///< terminal norms along the iteration
    bool partial_steering = false;
    std::vector<std::string> notes;
};

ControlResult null_control(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                           const Field& g, double switch_time, const BoundaryPortion& gamma0,
                           const ControlOptions& options = {});

// ---------------------------------------------------------------- Runge approximation

struct RungeOptions {
    DataMode mode = DataMode::Full;
    std::vector<double> omega{1.0};  ///< partial mode: data vanish on Gamma_{-,omega,eps}
    double aperture = 0.0;
    double region_lo = 0.0, region_hi = 1.0;  ///< x-interval of the fitting region (first axis)
    double rcond = 1e-13;
    SolverSettings settings{};
};

struct RungeFit {
    int basis_size = 0;
    double gap = 0.0;  ///< relative L2 misfit on the region
    Field data;        ///< fitted nodal Dirichlet data
    std::vector<std::string> notes;
};

/// Least-squares fit of solutions with data from the first N nested boundary basis elements
/// (boundary nodes x sin((k - 1/2) pi t / T)) to the target on the region.
std::vector<RungeFit> runge_fit(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                const Field& target, const std::vector<int>& sizes, const RungeOptions& options);

}  // namespace pipl
