#pragma once

#include <complex>
#include <string>
#include <vector>

#include "pipl/forward.hpp"

namespace pipl {

enum class Direction { Forward, Backward };

/// Exponential carrier family.
///
/// Real: the damped carriers exp(+-(rho w.x + rho^2 t)) with oscillating profile
/// (xi . w = 0 required). ComplexExponential: one-dimensional carriers
/// exp(zeta x +- zeta^2 t) with complex zeta chosen so that the forward/backward product
/// equals exp(-i(xi x + tau t)); rho then only sets the ramp rate rho^{3/4}.
enum class CarrierKind { Real, ComplexExponential };

struct CGOParameters {
    double rho = 8.0;
    std::vector<double> omega{1.0};
    std::vector<double> xi{0.0};
    double tau = 0.0;
    Direction direction = Direction::Forward;
    double aperture = 0.0;
    bool partial = false;  ///< profile vanishes on the outflow portion instead of matching theta
    CarrierKind carrier = CarrierKind::Real;

    /// Throws InvalidInput unless |omega| = 1, xi . omega = 0 (real carriers), dims agree.
    void validate(int dim) const;
    /// Ramp rate rho^{3/4}.
    double ramp() const;
    /// Carrier exponent vector zeta (carrier = exp(zeta.x + s zeta.zeta t), s = +1 forward, -1 backward).
    std::array<std::complex<double>, 2> zeta() const;
};

struct CGOSolution {
    CGOParameters params;
    ComplexField profile;           ///< theta + z on Q; the carrier is kept symbolic
    double remainder_norm = 0.0;    ///< ||z||_{L2(Q)}
    double residual = 0.0;          ///< relative step residual of the profile equation
    double max_materialized = 0.0;  ///< largest magnitude stored anywhere in the construction
    std::string boundary_record;
    std::vector<std::string> warnings;
};

/// theta_+ (forward) or theta_- (backward) at a point.
std::complex<double> theta(const CGOParameters& p, Point x, double t, double T);

/// phi_rho(t) = 1 - e^{-k t} - e^{-k (T - t)} + e^{-k T}, k = rho^{3/4}.
double phi_rho(double rho, double t, double T);

/// Solves the conjugated profile equation for a CGO solution of
/// u_t - div(grad u) + q u = 0 (forward) or -u_t - div(grad u) + q u = 0 (backward).
CGOSolution build(const SpaceTimeGrid& grid, const Field& q, const CGOParameters& params,
                  const SolverSettings& settings = {});

/// phi_rho(t) e^{-i(x,t).(xi,tau)} for a matched forward/backward pair.
ComplexField product_symbol(const SpaceTimeGrid& grid, const CGOParameters& forward,
                            const CGOParameters& backward);

/// Product of the two carriers: identically one for real carriers, the unit-modulus
/// oscillation for complex-exponential carriers.
ComplexField carrier_product(const SpaceTimeGrid& grid, const CGOParameters& forward,
                             const CGOParameters& backward);

struct Pairing {
    std::complex<double> value;    ///< integral of f v1 v2 via the factored form
    std::complex<double> leading;  ///< integral of f phi_rho e^{-i(x,t).(xi,tau)}
};

Pairing pairing(const Field& f, const CGOSolution& forward, const CGOSolution& backward);

/// Discrete Fourier integral of f at (xi, tau) by trapezoidal quadrature.
std::complex<double> fourier_sample(const Field& f, const std::vector<double>& xi, double tau);

/// Carrier times profile on Q. Throws SolverError when a magnitude exceeds e^50.
ComplexField materialize(const CGOSolution& sol);

struct SweepEntry {
    double rho = 0.0;
    double remainder_norm = 0.0;
    double residual = 0.0;
    double max_materialized = 0.0;
    std::vector<std::string> warnings;
};

/// Remainder norms over a list of rho values with the other parameters fixed.
std::vector<SweepEntry> remainder_sweep(const SpaceTimeGrid& grid, const Field& q, CGOParameters base,
                                        const std::vector<double>& rhos,
                                        const SolverSettings& settings = {});

inline constexpr double kMaterializeLimit = 5.184705528587072e21;  // e^50

}  // namespace pipl
