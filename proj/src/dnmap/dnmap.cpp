#include "pipl/dnmap.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace pipl {

std::string to_string(NoiseModel m) {
    switch (m) {
    case NoiseModel::None: return "none";
    case NoiseModel::GaussianRelative: return "gaussian-relative";
    case NoiseModel::GaussianAbsolute: return "gaussian-absolute";
    }
    return "?";
}

NoiseModel noise_model_from_string(const std::string& name) {
    if (name == "none") return NoiseModel::None;
    if (name == "gaussian-relative") return NoiseModel::GaussianRelative;
    if (name == "gaussian-absolute") return NoiseModel::GaussianAbsolute;
    throw InvalidInput("unknown noise model '" + name + "'");
}

template <class S>
BasicField<S> normal_derivative(const BasicField<S>& u, const std::vector<BoundaryEntry>& entries) {
    if (u.support() != Support::Interior) throw InvalidInput("measurement needs a field on Q");
    if (entries.empty()) throw InvalidInput("measurement portion is empty");
    const auto& g = u.grid();
    auto out = BasicField<S>::on_boundary(g, entries);
    std::vector<int> step(entries.size());
    std::vector<double> inv(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
        switch (entries[e].face) {
        case Face::Left: step[e] = 1; inv[e] = 1.0 / (2.0 * g.spacing(0)); break;
        case Face::Right: step[e] = -1; inv[e] = 1.0 / (2.0 * g.spacing(0)); break;
        case Face::Bottom: step[e] = g.nodes(0); inv[e] = 1.0 / (2.0 * g.spacing(1)); break;
        case Face::Top: step[e] = -g.nodes(0); inv[e] = 1.0 / (2.0 * g.spacing(1)); break;
        }
    }
    for (int k = 0; k < g.time_levels(); ++k) {
        const S* lv = u.level(k);
        for (std::size_t e = 0; e < entries.size(); ++e) {
            int b = entries[e].node, s = step[e];
            out.at(k, static_cast<int>(e)) = (3.0 * lv[b] - 4.0 * lv[b + s] + lv[b + 2 * s]) * inv[e];
        }
    }
    return out;
}

template Field normal_derivative(const Field&, const std::vector<BoundaryEntry>&);
template ComplexField normal_derivative(const ComplexField&, const std::vector<BoundaryEntry>&);

DNMeasurement measure(const Field& u, const BoundaryPortion& portion) {
    DNMeasurement m;
    m.portion = portion;
    m.values = normal_derivative(u, portion.resolve(u.grid()));
    return m;
}

DNMeasurement active_map(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                         const Nonlinearity& nl, const Field& f, const Field& g,
                         const BoundaryPortion& portion, Strategy strategy,
                         const SolverSettings& settings) {
    auto rep = solve_semilinear(grid, gamma, nl, f, g, strategy, settings);
    if (!rep.converged) throw SolverError("forward solve did not converge");
    return measure(rep.solution, portion);
}

DNMeasurement passive_map(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                          const Nonlinearity& nl, const Field& g, const BoundaryPortion& portion,
                          Strategy strategy, const SolverSettings& settings) {
    return active_map(grid, gamma, nl, Field{}, g, portion, strategy, settings);
}

DNMeasurement add_noise(const DNMeasurement& m, NoiseModel model, double level, std::uint64_t seed) {
    if (!(level >= 0.0)) throw InvalidInput("noise level must be nonnegative");
    DNMeasurement out = m;
    out.noise = {model, level, seed};
    if (model == NoiseModel::None || level == 0.0) return out;
    double sigma = level;
    if (model == NoiseModel::GaussianRelative) {
        double s = 0.0;
        for (double v : m.values.values()) s += v * v;
        sigma = level * std::sqrt(s / std::max<std::size_t>(1, m.values.values().size()));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01(0.0, 1.0);
    for (double& v : out.values.values()) v += sigma * N01(rng);
    return out;
}

DNMeasurement restrict_to(const DNMeasurement& m, const BoundaryPortion& sub) {
    const auto& g = m.values.grid();
    auto entries = sub.resolve(g);
    DNMeasurement out;
    out.portion = sub;
    out.noise = m.noise;
    out.values = Field::on_boundary(g, entries);
    const auto& have = m.values.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
        auto it = std::find(have.begin(), have.end(), entries[e]);
        if (it == have.end()) throw InvalidInput("sub-portion is not contained in the measurement");
        int src = static_cast<int>(it - have.begin());
        for (int k = 0; k < g.time_levels(); ++k) out.values.at(k, static_cast<int>(e)) = m.values.at(k, src);
    }
    return out;
}

void write_dn_csv(std::ostream& out, const DNMeasurement& m) {
    const auto& g = m.values.grid();
    out << (g.dim() == 1 ? "t,node_id,x,value\n" : "t,node_id,x,y,value\n");
    char buf[128];
    for (int k = 0; k < g.time_levels(); ++k) {
        for (int e = 0; e < m.values.width(); ++e) {
            int node = m.values.entries()[e].node;
            Point x = g.coord(node);
            if (g.dim() == 1)
                std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g\n", g.time(k), node, x[0],
                              m.values.at(k, e));
            else
                std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g\n", g.time(k), node, x[0],
                              x[1], m.values.at(k, e));
            out << buf;
        }
    }
}

nlohmann::json dn_sidecar(const DNMeasurement& m) {
    const auto& g = m.values.grid();
    nlohmann::json j;
    j["portion"] = m.portion.describe();
    nlohmann::json faces = nlohmann::json::array();
    for (const auto& e : m.values.entries()) faces.push_back({{"face", to_string(e.face)}, {"node", e.node}});
    j["entries"] = faces;
    j["noise"] = {{"model", to_string(m.noise.model)}, {"level", m.noise.level}, {"seed", m.noise.seed}};
    j["grid"] = {{"digest", g.digest()},
                 {"dim", g.dim()},
                 {"nodes", g.dim() == 1 ? nlohmann::json{g.nodes(0)} : nlohmann::json{g.nodes(0), g.nodes(1)}},
                 {"time_steps", g.time_steps()},
                 {"horizon", g.horizon()}};
    return j;
}

}  // namespace pipl
