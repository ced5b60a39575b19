#include "pipl/linearize.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace pipl {

namespace {

using Partition = std::vector<unsigned>;

void partitions(unsigned mask, Partition& cur, std::vector<Partition>& out) {
    if (mask == 0) {
        out.push_back(cur);
        return;
    }
    unsigned low = mask & (~mask + 1u);
    unsigned rest = mask ^ low;
    // every subset of rest joins the block of the lowest element
    for (unsigned sub = rest;; sub = (sub - 1) & rest) {
        cur.push_back(low | sub);
        partitions(rest ^ sub, cur, out);
        cur.pop_back();
        if (sub == 0) break;
    }
}

Field derivative_field(const Nonlinearity& nl, const Field& u, int k) {
    const auto& g = u.grid();
    Field out = Field::on_q(g);
    for (int l = 0; l < g.time_levels(); ++l) {
        double t = g.time(l);
        for (int n = 0; n < g.space_nodes(); ++n) out.at(l, n) = nl.evaluate(g.coord(n), t, u.at(l, n), k);
    }
    return out;
}

struct Corners {
    std::vector<Field> u;  ///< indexed by subset mask of the selected probes
    int solves = 0;
};

Corners corner_solves(const LinearizationModel& m, const ProbeFamily& fam, const std::vector<int>& sel,
                      double eps, const Field& base, const Field& base_f) {
    const unsigned full = (1u << sel.size()) - 1u;
    Corners c;
    c.u.resize(full + 1);
    c.u[0] = base;
    std::vector<unsigned> todo;
    for (unsigned s = 1; s <= full; ++s) todo.push_back(s);
    auto data = [&](unsigned s) {
        Field f = base_f;
        for (std::size_t l = 0; l < sel.size(); ++l)
            if (s & (1u << l)) f.axpy(eps, fam.probes[sel[l]]);
        return f;
    };
    auto run = [&](unsigned s) {
        auto rep = solve_semilinear(*m.grid, m.gamma, m.nl, data(s), fam.base_initial, m.strategy, m.settings);
        if (!rep.converged) throw SolverError("corner solve did not converge");
        c.u[s] = std::move(rep.solution);
    };
    int jobs = std::max(1, std::min<int>(m.jobs, static_cast<int>(todo.size())));
    if (jobs == 1) {
        for (unsigned s : todo) run(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr err;
        std::mutex mu;
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < todo.size(); i = next++) {
                    try {
                        run(todo[i]);
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(mu);
                        if (!err) err = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (err) std::rethrow_exception(err);
    }
    c.solves = static_cast<int>(todo.size());
    return c;
}

Field corner_quotient(const Corners& c, std::size_t M, double eps) {
    const unsigned full = (1u << M) - 1u;
    Field q = Field::on_q(c.u[0].grid());
    for (unsigned s = 0; s <= full; ++s) {
        int sign = ((M - std::popcount(s)) % 2 == 0) ? 1 : -1;
        q.axpy(static_cast<double>(sign), c.u[s]);
    }
    q *= 1.0 / std::pow(eps, static_cast<double>(M));
    return q;
}

double rel_gap(const Field& a, const Field& ref) {
    double d = norm(a - ref, NormSpace::L2Q), r = norm(ref, NormSpace::L2Q);
    return r > 0.0 ? d / r : d;
}

Field nodal_base(const LinearizationModel& m, const ProbeFamily& fam) {
    return fam.base_dirichlet.empty() ? Field::on_q(*m.grid) : dirichlet_nodal(fam.base_dirichlet, *m.grid);
}

void check_family(const LinearizationModel& m, const ProbeFamily& fam, const std::vector<int>& sel) {
    if (!m.grid) throw InvalidInput("linearization model has no grid");
    if (fam.schedule.empty()) throw InvalidInput("amplitude schedule is empty");
    for (double e : fam.schedule)
        if (!(e > 0.0)) throw InvalidInput("amplitudes must be positive");
    for (std::size_t i = 1; i < fam.schedule.size(); ++i)
        if (!(fam.schedule[i] < fam.schedule[i - 1])) throw InvalidInput("schedule must be strictly decreasing");
    for (std::size_t i = 0; i < sel.size(); ++i) {
        if (sel[i] < 0 || sel[i] >= static_cast<int>(fam.probes.size())) throw InvalidInput("probe index out of range");
        for (std::size_t j = 0; j < i; ++j)
            if (sel[i] == sel[j]) throw InvalidInput("probe indices must be distinct");
        const auto& p = fam.probes[sel[i]];
        if (p.support() != Support::Interior || !(p.grid() == *m.grid))
            throw InvalidInput("probes must be nodal fields on the model grid");
    }
}

LinearizedField linearize(const LinearizationModel& m, const ProbeFamily& fam, const std::vector<int>& sel) {
    check_family(m, fam, sel);
    const std::size_t M = sel.size();
    LinearizedField out;
    out.order = static_cast<int>(M);
    out.probes = sel;
    Field base_f = nodal_base(m, fam);
    Field base = base_state(m, fam);
    std::vector<Field> probes;
    for (int i : sel) probes.push_back(fam.probes[i]);
    out.direct = direct_mixed(m, base, probes);
    RateReport& r = out.report;
    r.corner_solves = 1;
    std::vector<Field> quotients;
    const double dnorm = norm(out.direct, NormSpace::L2Q);
    for (double eps : fam.schedule) {
        auto c = corner_solves(m, fam, sel, eps, base, base_f);
        r.corner_solves += c.solves;
        double umax = 0.0;
        for (const auto& u : c.u) umax = std::max(umax, norm(u, NormSpace::L2Q));
        quotients.push_back(corner_quotient(c, M, eps));
        double qn = norm(quotients.back(), NormSpace::L2Q);
        double floor = std::ldexp(1e-14, static_cast<int>(M)) * umax / std::pow(eps, static_cast<double>(M));
        r.eps.push_back(eps);
        r.gaps.push_back(rel_gap(quotients.back(), out.direct));
        r.noise_floor.push_back(dnorm > 0.0 ? floor / dnorm : floor);
        if (qn > 0.0 && floor > 0.1 * qn) r.noise_floor_exceeded = true;
    }
    out.quotient = quotients.back();
    if (quotients.size() >= 2) {
        std::size_t n = quotients.size();
        double ratio = fam.schedule[n - 2] / fam.schedule[n - 1];
        out.extrapolated = (1.0 / (ratio - 1.0)) * (ratio * quotients[n - 1] - quotients[n - 2]);
    } else {
        out.extrapolated = out.quotient;
    }
    r.extrapolated_gap = rel_gap(out.extrapolated, out.direct);
    double biggest = 0.0;
    for (double g : r.gaps) biggest = std::max(biggest, g);
    if (r.eps.size() < 2) {
        r.notes.push_back("single amplitude; no rate in eps");
    } else if (biggest < 1e-10) {
        r.slope = 0.0;
        r.rate_ok = false;
        r.notes.push_back("gaps at rounding level; no rate in eps");
    } else {
        r.slope = loglog_slope(r.eps, r.gaps);
        r.rate_ok = r.slope >= 0.8 && r.slope <= 1.2;
        if (!r.rate_ok) r.notes.push_back("gap is not O(eps) over the schedule");
    }
    if (r.noise_floor_exceeded) r.notes.push_back("rounding floor exceeds 10% of the quotient");
    return out;
}

}  // namespace

std::vector<double> default_schedule(int count, double smallest, double ratio) {
    if (count < 1 || !(smallest > 0.0) || !(ratio > 1.0)) throw InvalidInput("invalid amplitude schedule");
    std::vector<double> s(count);
    for (int i = 0; i < count; ++i) s[i] = smallest * std::pow(ratio, count - 1 - i);
    return s;
}

double smooth_ramp(double t, double ramp_time) {
    if (t <= 0.0) return 0.0;
    if (t >= ramp_time) return 1.0;
    double s = t / ramp_time;
    return s * s * (3.0 - 2.0 * s);
}

Field ramped_probe(const SpaceTimeGrid& grid, const std::function<double(Point, double)>& fn,
                   double ramp_time) {
    Field f = Field::on_q(grid);
    auto bnodes = grid.boundary_nodes();
    for (int k = 0; k < grid.time_levels(); ++k) {
        double t = grid.time(k), r = smooth_ramp(t, ramp_time);
        for (int b : bnodes) f.at(k, b) = r * fn(grid.coord(b), t);
    }
    return f;
}

Field base_state(const LinearizationModel& m, const ProbeFamily& fam) {
    if (!m.grid) throw InvalidInput("linearization model has no grid");
    auto rep = solve_semilinear(*m.grid, m.gamma, m.nl, nodal_base(m, fam), fam.base_initial, m.strategy,
                                m.settings);
    if (!rep.converged) throw SolverError("base-state solve did not converge");
    return rep.solution;
}

Field direct_mixed(const LinearizationModel& m, const Field& base, const std::vector<Field>& probes) {
    const std::size_t M = probes.size();
    if (M == 0 || M > 16) throw InvalidInput("mixed order must be between 1 and 16");
    const auto& g = *m.grid;
    const unsigned full = (1u << M) - 1u;
    std::vector<Field> w(full + 1);
    std::vector<Field> deriv(M + 1);
    auto d = [&](int k) -> const Field& {
        if (deriv[k].empty()) deriv[k] = derivative_field(m.nl, base, k);
        return deriv[k];
    };
    const Field& q = d(1);
    std::vector<unsigned> order;
    for (unsigned s = 1; s <= full; ++s) order.push_back(s);
    std::stable_sort(order.begin(), order.end(),
                     [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });
    for (unsigned s : order) {
        Field f, h;
        if (std::popcount(s) == 1) {
            f = probes[std::countr_zero(s)];
        } else {
            h = Field::on_q(g);
            std::vector<Partition> parts;
            Partition cur;
            partitions(s, cur, parts);
            for (const auto& p : parts) {
                if (p.size() < 2) continue;
                const Field& bk = d(static_cast<int>(p.size()));
                if (bk.max_abs() == 0.0) continue;
                for (std::size_t i = 0; i < h.values().size(); ++i) {
                    double prod = bk.values()[i];
                    for (unsigned blk : p) prod *= w[blk].values()[i];
                    h.values()[i] -= prod;
                }
            }
        }
        auto rep = solve_linear(g, m.gamma, q, f, Field{}, h, m.settings);
        w[s] = std::move(rep.solution);
    }
    return w[full];
}

LinearizedField first_order(const LinearizationModel& model, const ProbeFamily& family, int probe) {
    return linearize(model, family, {probe});
}

LinearizedField second_order(const LinearizationModel& model, const ProbeFamily& family, int p1, int p2) {
    return linearize(model, family, {p1, p2});
}

LinearizedField higher_order(const LinearizationModel& model, const ProbeFamily& family,
                             const std::vector<int>& probes, int max_order) {
    if (probes.empty() || static_cast<int>(probes.size()) > max_order)
        throw InvalidInput("linearization order must be between 1 and " + std::to_string(max_order));
    return linearize(model, family, probes);
}

Field mixed_quotient(const LinearizationModel& model, const ProbeFamily& family, const std::vector<int>& probes,
                     double eps) {
    ProbeFamily f = family;
    f.schedule = {eps};
    check_family(model, f, probes);
    auto c = corner_solves(model, f, probes, eps, base_state(model, f), nodal_base(model, f));
    return corner_quotient(c, probes.size(), eps);
}

DNMeasurement linearized_dn(const Field& field, const BoundaryPortion& portion) {
    return measure(field, portion);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw InvalidInput("slope fit needs two positive samples");
    double den = n * sxx - sx * sx;
    if (den == 0.0) throw InvalidInput("slope fit needs distinct abscissae");
    return (n * sxy - sx * sy) / den;
}

nlohmann::json linearization_report(const std::vector<LinearizedField>& fields) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& f : fields) {
        const auto& r = f.report;
        j.push_back({{"order", f.order},
                     {"probes", f.probes},
                     {"eps", r.eps},
                     {"gaps", r.gaps},
                     {"noise_floor", r.noise_floor},
                     {"slope", r.slope},
                     {"rate_ok", r.rate_ok},
                     {"noise_floor_exceeded", r.noise_floor_exceeded},
                     {"extrapolated_gap", r.extrapolated_gap},
                     {"corner_solves", r.corner_solves},
                     {"notes", r.notes}});
    }
    return j;
}

}  // namespace pipl
