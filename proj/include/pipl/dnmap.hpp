#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "pipl/forward.hpp"

namespace pipl {

enum class NoiseModel { None, GaussianRelative, GaussianAbsolute };

std::string to_string(NoiseModel m);
NoiseModel noise_model_from_string(const std::string& name);

struct NoiseRecord {
    NoiseModel model = NoiseModel::None;
    double level = 0.0;
    std::uint64_t seed = 0;
};

/// Normal-derivative trace on a boundary portion at every time level.
struct DNMeasurement {
    BoundaryPortion portion;
    Field values;  ///< support Boundary
    NoiseRecord noise;
};

/// Second-order one-sided approximation of the outward normal derivative at the entries.
template <class S>
BasicField<S> normal_derivative(const BasicField<S>& u, const std::vector<BoundaryEntry>& entries);

DNMeasurement measure(const Field& u, const BoundaryPortion& portion);

/// Measurement of the solution with Dirichlet data f and initial data g.
DNMeasurement active_map(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                         const Nonlinearity& nl, const Field& f, const Field& g,
                         const BoundaryPortion& portion, Strategy strategy = Strategy::Newton,
                         const SolverSettings& settings = {});

/// Measurement with f = 0 (the field is driven by the initial data only).
DNMeasurement passive_map(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                          const Nonlinearity& nl, const Field& g, const BoundaryPortion& portion,
                          Strategy strategy = Strategy::Newton, const SolverSettings& settings = {});

/// Reproducible Gaussian perturbation; the relative model scales by the rms of the data.
DNMeasurement add_noise(const DNMeasurement& m, NoiseModel model, double level, std::uint64_t seed);

/// Restriction of a measurement to the entries of a sub-portion.
DNMeasurement restrict_to(const DNMeasurement& m, const BoundaryPortion& sub);

/// CSV with columns t,node_id,x[,y],value.
void write_dn_csv(std::ostream& out, const DNMeasurement& m);
nlohmann::json dn_sidecar(const DNMeasurement& m);

}  // namespace pipl
