#pragma once

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pipl/dnmap.hpp"

namespace pipl {

/// Boundary data f = base + sum_l eps_l f_l together with the initial data of the base state.
struct ProbeFamily {
    Field base_dirichlet;          ///< nodal on Q, a boundary trace, or empty
    Field base_initial;            ///< on Omega or empty
    std::vector<Field> probes;     ///< nodal Dirichlet fields on Q
    std::vector<double> schedule;  ///< amplitudes, largest first
};

/// Geometric amplitudes {smallest * ratio^(count-1), ..., smallest}.
std::vector<double> default_schedule(int count = 3, double smallest = 1e-4, double ratio = 10.0);

/// C^1 ramp in time: 0 with zero slope at t = 0, 1 from t = ramp_time on.
double smooth_ramp(double t, double ramp_time);

/// Nodal Dirichlet field fn(x, t) * smooth_ramp(t) on the boundary nodes, zero inside.
Field ramped_probe(const SpaceTimeGrid& grid, const std::function<double(Point, double)>& fn,
                   double ramp_time);

struct LinearizationModel {
    const SpaceTimeGrid* grid = nullptr;
    DiffusionTensor gamma = DiffusionTensor::identity();
    Nonlinearity nl;
    Strategy strategy = Strategy::Newton;
    SolverSettings settings{};
    int jobs = 1;
};

struct RateReport {
    std::vector<double> eps;
    std::vector<double> gaps;         ///< relative L2(Q) gap quotient vs direct
    std::vector<double> noise_floor;  ///< estimated rounding floor of the quotient, relative
    double slope = 0.0;               ///< least-squares log-log slope of gaps vs eps
    bool rate_ok = false;             ///< slope in [0.8, 1.2]
    bool noise_floor_exceeded = false;///< some floor above 10% of the quotient magnitude
    double extrapolated_gap = 0.0;    ///< gap of the two-point Richardson extrapolation
    int corner_solves = 0;
    std::vector<std::string> notes;
};

struct LinearizedField {
    int order = 0;
    std::vector<int> probes;  ///< indices into ProbeFamily::probes
    Field quotient;           ///< corner-sum quotient at the smallest amplitude
    Field extrapolated;       ///< Richardson extrapolation over the two smallest amplitudes
    Field direct;             ///< solve of the linearized equation
    RateReport report;
};

/// Nonlinear solution for the base data.
Field base_state(const LinearizationModel& model, const ProbeFamily& family);

/// Mixed derivative d^M u / d eps_{l1} ... d eps_{lM} at eps = 0 by the set-partition
/// recursion: each subset field solves the linearized equation with source
/// -sum over partitions (|pi| >= 2) of b^{(|pi|)}(base) * prod of block fields.
Field direct_mixed(const LinearizationModel& model, const Field& base, const std::vector<Field>& probes);

LinearizedField first_order(const LinearizationModel& model, const ProbeFamily& family, int probe);
LinearizedField second_order(const LinearizationModel& model, const ProbeFamily& family, int p1, int p2);
/// Probes must be distinct indices; M <= max_order.
LinearizedField higher_order(const LinearizationModel& model, const ProbeFamily& family,
                             const std::vector<int>& probes, int max_order = 4);

/// Corner-sum quotient at one amplitude without the direct oracle.
Field mixed_quotient(const LinearizationModel& model, const ProbeFamily& family, const std::vector<int>& probes,
                     double eps);

DNMeasurement linearized_dn(const Field& field, const BoundaryPortion& portion);

/// Least-squares slope of log(y) against log(x) over positive pairs.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

nlohmann::json linearization_report(const std::vector<LinearizedField>& fields);

}  // namespace pipl
