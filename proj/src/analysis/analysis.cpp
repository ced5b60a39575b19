#include "pipl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "../forward/operator.hpp"

namespace pipl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Running log-sum-exp.
struct LogSum {
    double m = kNegInf, s = 0.0;
    void add(double log_term) {
        if (log_term == kNegInf) return;
        if (log_term > m) {
            s = s * std::exp(m - log_term) + 1.0;
            m = log_term;
        } else {
            s += std::exp(log_term - m);
        }
    }
    double value() const { return s > 0.0 ? m + std::log(s) : kNegInf; }
};

/// Second-order nodal gradient of one level: central inside, one-sided on the boundary.
std::vector<Point> gradient(const SpaceTimeGrid& g, const double* u) {
    std::vector<Point> out(static_cast<std::size_t>(g.space_nodes()), Point{0.0, 0.0});
    for (int n = 0; n < g.space_nodes(); ++n) {
        auto ij = g.indices(n);
        for (int a = 0; a < g.dim(); ++a) {
            const int N = g.nodes(a), i = ij[a];
            const int s = a == 0 ? 1 : g.nodes(0);
            const double h = g.spacing(a);
            double d;
            if (i == 0) {
                d = (-3.0 * u[n] + 4.0 * u[n + s] - u[n + 2 * s]) / (2.0 * h);
            } else if (i == N - 1) {
                d = (3.0 * u[n] - 4.0 * u[n - s] + u[n - 2 * s]) / (2.0 * h);
            } else {
                d = (u[n + s] - u[n - s]) / (2.0 * h);
            }
            out[static_cast<std::size_t>(n)][a] = d;
        }
    }
    return out;
}

double quad_form(const DiffusionTensor& gamma, Point x, double t, const Point& a, const Point& b, int dim) {
    auto G = gamma.at(x, t);
    if (dim == 1) return G[0] * a[0] * b[0];
    return G[0] * a[0] * b[0] + G[1] * (a[0] * b[1] + a[1] * b[0]) + G[2] * a[1] * b[1];
}

void check_pair(const Field& u, const Field& F) {
    if (u.support() != Support::Interior) throw InvalidInput("state must be a field on Q");
    if (!F.empty() && (F.support() != Support::Interior || !(F.grid() == u.grid())))
        throw InvalidInput("right-hand side must be a field on Q of the same grid");
}

void finish(InequalityReport& r, const LogSum& lhs, const LogSum& rhs) {
    const double a = lhs.value(), b = rhs.value();
    if (a == kNegInf && b == kNegInf) {
        r.notes.push_back("both sides vanish");
        return;
    }
    r.log_scale = std::max(a, b);
    r.lhs = a == kNegInf ? 0.0 : std::exp(a - r.log_scale);
    r.rhs = b == kNegInf ? 0.0 : std::exp(b - r.log_scale);
    if (b == kNegInf) {
        r.ratio = std::numeric_limits<double>::infinity();
        r.notes.push_back("right-hand side vanishes");
    } else {
        r.ratio = a == kNegInf ? 0.0 : std::exp(a - b);
    }
}

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

}  // namespace

WeightBase default_weight_base(const SpaceTimeGrid& grid, const DiffusionTensor& gamma,
                               const BoundaryPortion& gamma0) {
    WeightBase w;
    const int d = grid.dim();
    Point center{0.0, 0.0}, nbar{0.0, 0.0};
    double diam = 0.0;
    for (int a = 0; a < d; ++a) {
        center[a] = 0.5 * (grid.lower(a) + grid.upper(a));
        diam += std::pow(grid.upper(a) - grid.lower(a), 2);
    }
    diam = std::sqrt(diam);
    auto observed = gamma0.resolve(grid);
    for (const auto& e : observed) {
        Point nu = grid.normal(e.face);
        nbar[0] += nu[0];
        nbar[1] += nu[1];
    }
    double nn = std::hypot(nbar[0], nbar[1]);
    Point dir{1.0, 0.0};
    if (nn > 1e-12) {
        dir = {-nbar[0] / nn, -nbar[1] / nn};
    } else {
        w.notes.push_back("observed portion has no mean normal; x0 placed along the first axis");
    }
    Point x0{center[0] + diam * dir[0], d == 2 ? center[1] + diam * dir[1] : 0.0};
    w.x0 = x0;
    w.psi = Field::on_omega(grid);
    double mx = 0.0;
    for (int n = 0; n < grid.space_nodes(); ++n) {
        Point x = grid.coord(n);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) r2 += (x[a] - x0[a]) * (x[a] - x0[a]);
        w.psi.at(0, n) = r2;
        mx = std::max(mx, r2);
    }
    w.grad.assign(static_cast<std::size_t>(grid.space_nodes()), Point{0.0, 0.0});
    w.min_grad = std::numeric_limits<double>::infinity();
    w.min_interior = std::numeric_limits<double>::infinity();
    for (int n = 0; n < grid.space_nodes(); ++n) {
        Point x = grid.coord(n);
        w.psi.at(0, n) /= mx;
        for (int a = 0; a < d; ++a) w.grad[static_cast<std::size_t>(n)][a] = 2.0 * (x[a] - x0[a]) / mx;
        const auto& gr = w.grad[static_cast<std::size_t>(n)];
        w.min_grad = std::min(w.min_grad, std::hypot(gr[0], gr[1]));
        if (!grid.on_boundary(n)) w.min_interior = std::min(w.min_interior, w.psi.at(0, n));
    }
    w.scale = mx;
    w.sup = 1.0;
    std::set<std::pair<int, int>> seen;
    for (const auto& e : observed) seen.insert({static_cast<int>(e.face), e.node});
    w.worst_flux = kNegInf;
    for (const auto& e : BoundaryPortion::full().resolve(grid)) {
        if (seen.count({static_cast<int>(e.face), e.node})) continue;
        Point nu = grid.normal(e.face);
        double f = quad_form(gamma, grid.coord(e.node), 0.0, w.grad[static_cast<std::size_t>(e.node)], nu, d);
        w.worst_flux = std::max(w.worst_flux, f);
    }
    if (w.worst_flux == kNegInf) w.worst_flux = 0.0;
    w.admissible = w.min_interior > 0.0 && w.min_grad > 0.0 && w.worst_flux <= 1e-12;
    if (w.worst_flux > 1e-12) {
        std::ostringstream os;
        os << "flux sign condition fails off Gamma0 (max " << w.worst_flux << ")";
        w.notes.push_back(os.str());
    }
    return w;
}

void CarlemanConfig::validate(double T) const {
    if (!(K > 0.0)) throw InvalidInput("K must be positive");
    if (!(t0 > 0.0) || !(t0 < T)) throw InvalidInput("t0 must lie in (0, T)");
    if (!(L > 0.0)) throw InvalidInput("L must be positive");
    if (!(K + t0 < std::min(1.0, 1.0 / (2.0 * L)))) throw InvalidInput("parameters violate K + t0 < min{1, 1/(2L)}");
    if (!(window > 0.0) || !(window < 0.5)) throw InvalidInput("weight window must lie in (0, 1/2)");
}

nlohmann::json report_json(const InequalityReport& r) {
    nlohmann::json j{{"lemma", r.lemma}, {"lambda", r.lambda}, {"lhs", r.lhs}, {"rhs", r.rhs},
                     {"log_scale", r.log_scale}, {"degenerate", r.degenerate},
                     {"dynamic_range_log10", r.dynamic_range}, {"notes", r.notes}};
    if (r.lemma == "interior") {
        j["mu"] = r.mu;
    } else {
        j["L"] = r.L;
    }
    j["ratio"] = std::isfinite(r.ratio) ? nlohmann::json(r.ratio) : nlohmann::json("inf");
    return j;
}

InequalityReport carleman_check_1(const Field& u, const Field& F, const CarlemanConfig& cfg, double lambda,
                                  double mu) {
    check_pair(u, F);
    if (!(lambda >= 1.0) || !(mu >= 1.0)) throw InvalidInput("lambda and mu must be at least 1");
    if (!(cfg.window > 0.0) || !(cfg.window < 0.5)) throw InvalidInput("weight window must lie in (0, 1/2)");
    const auto& g = u.grid();
    const int d = g.dim(), nx = g.nodes(0);
    const double T = g.horizon(), ta = cfg.window * T, tb = (1.0 - cfg.window) * T;
    auto base = default_weight_base(g, cfg.gamma, cfg.gamma0);
    InequalityReport r;
    r.lemma = "interior";
    r.lambda = lambda;
    r.mu = mu;
    for (const auto& n : base.notes) r.notes.push_back(n);
    if (!base.admissible) r.notes.push_back("weight base is not admissible for this observation set");

    const double top = std::exp(2.0 * mu * base.sup);
    const double c_grad = lambda * mu * mu, c_val = std::pow(lambda, 3) * std::pow(mu, 4), c_bdy = lambda * mu;
    auto psi = [&](Point x) {
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) r2 += (x[a] - base.x0[a]) * (x[a] - base.x0[a]);
        return r2 / base.scale;
    };
    // log theta_1^2 and log phi
    auto weight = [&](Point x, double t, double& lphi) {
        const double e = std::exp(mu * psi(x)), den = t * t * (T - t) * (T - t);
        lphi = std::log(e / den);
        return 2.0 * lambda * (e - top) / den;
    };
    std::vector<std::vector<Point>> grads;
    for (int k = 0; k < g.time_levels(); ++k) grads.push_back(gradient(g, u.level(k)));
    auto entries = cfg.gamma0.resolve(g);
    auto dn = normal_derivative(u, entries);

    // time cells clipped to the window
    struct Span { int k; double t0, t1; };
    std::vector<Span> spans;
    for (int k = 0; k < g.time_steps(); ++k) {
        const double t0 = std::max(g.time(k), ta), t1 = std::min(g.time(k + 1), tb);
        if (t1 > t0) spans.push_back({k, t0, t1});
    }
    if (spans.empty()) {
        r.degenerate = true;
        r.notes.push_back("no time cell inside the weight window");
        return r;
    }

    // space cells as corner node lists with local multilinear shape functions
    std::vector<std::vector<int>> cells;
    if (d == 1) {
        for (int i = 0; i + 1 < nx; ++i) cells.push_back({i, i + 1});
    } else {
        for (int j = 0; j + 1 < g.nodes(1); ++j)
            for (int i = 0; i + 1 < nx; ++i) cells.push_back({g.node(i, j), g.node(i + 1, j), g.node(i, j + 1), g.node(i + 1, j + 1)});
    }
    const double vol = d == 1 ? g.spacing(0) : g.spacing(0) * g.spacing(1);

    // integrand sample: interpolate u, grad u and F in space and time, weight exactly
    struct Sample { double lhs, rhs; };
    auto interp = [&](const std::vector<int>& nodes, const double* shape, int k, double s, double& uu, double& gg, double& ff) {
        double uv = 0.0, fv = 0.0;
        Point gv{0.0, 0.0};
        for (std::size_t c = 0; c < nodes.size(); ++c) {
            const int n = nodes[c];
            const double w0 = shape[c] * (1.0 - s), w1 = shape[c] * s;
            uv += w0 * u.at(k, n) + w1 * u.at(k + 1, n);
            if (!F.empty()) fv += w0 * F.at(k, n) + w1 * F.at(k + 1, n);
            for (int a = 0; a < d; ++a) gv[a] += w0 * grads[k][n][a] + w1 * grads[k + 1][n][a];
        }
        uu = uv * uv;
        ff = fv * fv;
        gg = gv[0] * gv[0] + gv[1] * gv[1];
    };
    auto corner_shape = [&](std::size_t c, double xi, double eta, double* out) {
        (void)c;
        if (d == 1) {
            out[0] = 1.0 - xi;
            out[1] = xi;
        } else {
            out[0] = (1.0 - xi) * (1.0 - eta);
            out[1] = xi * (1.0 - eta);
            out[2] = (1.0 - xi) * eta;
            out[3] = xi * eta;
        }
    };
    auto sub_count = [](double spread) { return std::clamp(static_cast<int>(std::ceil(2.0 * spread)) + 2, 2, 64); };

    LogSum lhs, rhs;
    double wmin = std::numeric_limits<double>::infinity(), wmax = kNegInf;
    // corner estimates first, so negligible cells can be skipped
    struct Plan { std::size_t cell; std::size_t span; int ms, mt; double est; };
    std::vector<Plan> plans;
    double best = kNegInf;
    for (std::size_t si = 0; si < spans.size(); ++si) {
        const auto& sp = spans[si];
        for (std::size_t ci = 0; ci < cells.size(); ++ci) {
            const auto& nodes = cells[ci];
            double lo_s = std::numeric_limits<double>::infinity(), hi_s = kNegInf, spread_t = 0.0, mag = 0.0;
            for (int n : nodes) {
                double lp0, lp1;
                const double w0 = weight(g.coord(n), sp.t0, lp0), w1 = weight(g.coord(n), sp.t1, lp1);
                lo_s = std::min({lo_s, w0, w1});
                hi_s = std::max({hi_s, w0, w1});
                spread_t = std::max(spread_t, std::abs(w1 - w0));
                for (int kk : {sp.k, sp.k + 1}) {
                    const double lp = std::max(lp0, lp1), phi = std::exp(lp);
                    const auto& gr = grads[kk][n];
                    const double v = u.at(kk, n);
                    mag = std::max(mag, c_grad * phi * (gr[0] * gr[0] + gr[1] * gr[1]) + c_val * phi * phi * phi * v * v);
                    if (!F.empty()) mag = std::max(mag, F.at(kk, n) * F.at(kk, n));
                }
            }
            wmin = std::min(wmin, lo_s);
            wmax = std::max(wmax, hi_s);
            if (mag == 0.0) continue;
            const double est = hi_s + std::log(mag * vol * (sp.t1 - sp.t0));
            best = std::max(best, est);
            plans.push_back({ci, si, sub_count(hi_s - lo_s - spread_t), sub_count(spread_t), est});
        }
    }
    constexpr double kNegligible = 60.0;
    for (const auto& p : plans) {
        if (p.est < best - kNegligible) continue;
        const auto& sp = spans[p.span];
        const auto& nodes = cells[p.cell];
        const Point xa = g.coord(nodes.front()), xb = g.coord(nodes.back());
        const int my = d == 1 ? 1 : p.ms;
        const double lq = std::log(vol * (sp.t1 - sp.t0) / (static_cast<double>(p.ms) * my * p.mt));
        double shape[4];
        for (int it = 0; it < p.mt; ++it) {
            const double t = sp.t0 + (it + 0.5) * (sp.t1 - sp.t0) / p.mt;
            const double s = (t - g.time(sp.k)) / g.dt();
            for (int iy = 0; iy < my; ++iy)
                for (int ix = 0; ix < p.ms; ++ix) {
                    const double xi = (ix + 0.5) / p.ms, eta = (iy + 0.5) / my;
                    Point x{xa[0] + xi * (xb[0] - xa[0]), d == 2 ? xa[1] + eta * (xb[1] - xa[1]) : 0.0};
                    corner_shape(0, xi, eta, shape);
                    double uu, gg, ff, lphi;
                    interp(nodes, shape, sp.k, s, uu, gg, ff);
                    const double lw = weight(x, t, lphi) + lq, phi = std::exp(lphi);
                    lhs.add(lw + safe_log(c_grad * phi * gg + c_val * phi * phi * phi * uu));
                    if (!F.empty()) rhs.add(lw + safe_log(ff));
                }
        }
    }

    // boundary term over contiguous runs of observed nodes on each face
    std::map<std::pair<int, int>, int> entry_of;
    for (std::size_t e = 0; e < entries.size(); ++e) {
        auto ij = g.indices(entries[e].node);
        const bool vertical = entries[e].face == Face::Left || entries[e].face == Face::Right;
        entry_of[{static_cast<int>(entries[e].face), d == 1 ? 0 : (vertical ? ij[1] : ij[0])}] = static_cast<int>(e);
    }
    std::vector<std::pair<int, int>> segments;  // entry pairs; a repeated entry marks a point in 1D
    for (const auto& [key, e] : entry_of) {
        if (d == 1) {
            segments.push_back({e, e});
            continue;
        }
        auto next = entry_of.find({key.first, key.second + 1});
        if (next != entry_of.end()) segments.push_back({e, next->second});
    }
    for (const auto& sp : spans)
        for (const auto& [ea, eb] : segments) {
            const Point xa = g.coord(entries[static_cast<std::size_t>(ea)].node);
            const Point xb = g.coord(entries[static_cast<std::size_t>(eb)].node);
            const double len = d == 1 ? 1.0 : std::hypot(xb[0] - xa[0], xb[1] - xa[1]);
            double lp;
            const double w00 = weight(xa, sp.t0, lp), w01 = weight(xa, sp.t1, lp);
            const double w10 = weight(xb, sp.t0, lp), w11 = weight(xb, sp.t1, lp);
            const int ms = d == 1 ? 1 : sub_count(std::max(std::abs(w10 - w00), std::abs(w11 - w01)));
            const int mt = sub_count(std::max(std::abs(w01 - w00), std::abs(w11 - w10)));
            const double lq = std::log(len * (sp.t1 - sp.t0) / (static_cast<double>(ms) * mt));
            for (int it = 0; it < mt; ++it) {
                const double t = sp.t0 + (it + 0.5) * (sp.t1 - sp.t0) / mt;
                const double s = (t - g.time(sp.k)) / g.dt();
                for (int ix = 0; ix < ms; ++ix) {
                    const double xi = d == 1 ? 0.0 : (ix + 0.5) / ms;
                    Point x{xa[0] + xi * (xb[0] - xa[0]), xa[1] + xi * (xb[1] - xa[1])};
                    auto at = [&](int e) { return (1.0 - s) * dn.at(sp.k, e) + s * dn.at(sp.k + 1, e); };
                    const double v = (1.0 - xi) * at(ea) + xi * at(eb);
                    double lphi;
                    const double lw = weight(x, t, lphi);
                    rhs.add(lq + lw + std::log(c_bdy) + lphi + safe_log(v * v));
                }
            }
        }

    r.dynamic_range = (wmax - wmin) / std::log(10.0);
    finish(r, lhs, rhs);
    return r;
}

InequalityReport carleman_check_2(const Field& u, const Field& F, const CarlemanConfig& cfg, double lambda) {
    check_pair(u, F);
    const auto& g = u.grid();
    cfg.validate(g.horizon());
    if (!(lambda >= 1.0)) throw InvalidInput("lambda must be at least 1");
    InequalityReport r;
    r.lemma = "initial";
    r.lambda = lambda;
    r.L = cfg.L;
    const int k0 = std::clamp(static_cast<int>(std::lround(cfg.t0 / g.dt())), 1, g.time_steps());
    const double t0 = g.time(k0);
    if (std::abs(t0 - cfg.t0) > 1e-12 * std::max(1.0, cfg.t0)) {
        std::ostringstream os;
        os << "t0 snapped to " << t0;
        r.notes.push_back(os.str());
    }
    const double K = cfg.K, KT = K + t0;
    if (!(KT < std::min(1.0, 1.0 / (2.0 * cfg.L)))) throw InvalidInput("snapped t0 violates K + t0 < min{1, 1/(2L)}");

    // log moments of (KT - t)^{-p} against the two hat functions of a time cell
    auto moments = [&](int k, double p, double& l0, double& l1) {
        const double a = g.time(k), c0 = KT - a, c1 = KT - g.time(k + 1);
        const int m = std::clamp(static_cast<int>(std::ceil(4.0 * p * std::log(c0 / c1))) + 2, 2, 4096);
        LogSum s0, s1;
        for (int i = 0; i < m; ++i) {
            const double s = (i + 0.5) / m;
            const double lw = -p * std::log(KT - a - s * g.dt()) + std::log(g.dt() / m);
            s0.add(lw + std::log(1.0 - s));
            s1.add(lw + std::log(s));
        }
        l0 = s0.value();
        l1 = s1.value();
    };

    auto sw = space_weights(g);
    std::vector<double> val(static_cast<std::size_t>(k0 + 1)), grd(val.size()), src(val.size());
    for (int k = 0; k <= k0; ++k) {
        auto grad = gradient(g, u.level(k));
        double a = 0.0, b = 0.0, c = 0.0;
        for (int n = 0; n < g.space_nodes(); ++n) {
            const auto& gr = grad[static_cast<std::size_t>(n)];
            a += sw[n] * u.at(k, n) * u.at(k, n);
            b += sw[n] * quad_form(cfg.gamma, g.coord(n), g.time(k), gr, gr, g.dim());
            if (!F.empty()) c += sw[n] * F.at(k, n) * F.at(k, n);
        }
        val[static_cast<std::size_t>(k)] = a;
        grd[static_cast<std::size_t>(k)] = b;
        src[static_cast<std::size_t>(k)] = c;
    }
    LogSum lhs, rhs;
    for (int k = 0; k < k0; ++k) {
        const auto i = static_cast<std::size_t>(k);
        double a0, a1, b0, b1;
        moments(k, 2.0 * lambda + 2.0, a0, a1);
        moments(k, 2.0 * lambda, b0, b1);
        const double ll = std::log(lambda), lL = std::log(cfg.L);
        lhs.add(a0 + ll + safe_log(val[i]));
        lhs.add(a1 + ll + safe_log(val[i + 1]));
        lhs.add(b0 + lL + safe_log(grd[i]));
        lhs.add(b1 + lL + safe_log(grd[i + 1]));
        rhs.add(b0 + safe_log(src[i]));
        rhs.add(b1 + safe_log(src[i + 1]));
    }
    const double l_init = std::log(lambda) - (2.0 * lambda + 1.0) * std::log(KT);
    const double l_term = std::log(lambda) - (2.0 * lambda + 1.0) * std::log(K);
    const double l_grad = -2.0 * lambda * std::log(KT);
    lhs.add(l_init + safe_log(val[0]));
    rhs.add(l_term + safe_log(val[static_cast<std::size_t>(k0)]));
    rhs.add(l_grad + safe_log(grd[0]));
    const double wmax = std::max({-(2.0 * lambda + 2.0) * std::log(K), l_term, l_init, l_grad});
    const double wmin = std::min({-2.0 * lambda * std::log(KT), l_term, l_init, l_grad});
    r.dynamic_range = (wmax - wmin) / std::log(10.0);
    if (r.dynamic_range > 300.0) r.notes.push_back("weight dynamic range exceeds 1e300; sums kept in log space");
    finish(r, lhs, rhs);
    return r;
}

std::vector<InequalityReport> carleman_sweep_1(const Field& u, const Field& F, const CarlemanConfig& cfg,
                                               const std::vector<double>& lambdas, const std::vector<double>& mus) {
    std::vector<InequalityReport> out;
    for (double l : lambdas)
        for (double m : mus) out.push_back(carleman_check_1(u, F, cfg, l, m));
    return out;
}

std::vector<InequalityReport> carleman_sweep_2(const Field& u, const Field& F, const CarlemanConfig& cfg,
                                               const std::vector<double>& lambdas) {
    std::vector<InequalityReport> out;
    for (double l : lambdas) out.push_back(carleman_check_2(u, F, cfg, l));
    return out;
}

Field heat_oracle(const SpaceTimeGrid& grid) {
    const double pi = std::numbers::pi;
    double rate = 0.0;
    for (int a = 0; a < grid.dim(); ++a) rate += std::pow(pi / (grid.upper(a) - grid.lower(a)), 2);
    return Field::sample_q(grid, [&](Point x, double t) {
        double v = std::exp(-rate * t);
        for (int a = 0; a < grid.dim(); ++a)
            v *= std::sin(pi * (x[a] - grid.lower(a)) / (grid.upper(a) - grid.lower(a)));
        return v;
    });
}

StabilityAudit stability_audit(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Nonlinearity& nl,
                               const Field& g1, const Field& h, const std::vector<double>& scales,
                               const BoundaryPortion& gamma0, const SolverSettings& settings) {
    if (scales.empty()) throw InvalidInput("audit needs at least one perturbation scale");
    for (double s : scales)
        if (!(s >= 0.0)) throw InvalidInput("perturbation scales must be nonnegative");
    std::vector<double> sorted(scales);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    auto entries = gamma0.resolve(grid);
    auto solve = [&](const Field& g) {
        auto rep = solve_semilinear(grid, gamma, nl, Field{}, g, Strategy::Newton, settings);
        if (!rep.converged) throw SolverError("forward solve did not converge in the stability audit");
        return rep.solution;
    };
    const Field u1 = solve(g1);
    auto sw = space_weights(g1.grid());
    auto sigma = [&](const Field& tr) {
        auto bw = boundary_weights(grid, entries);
        auto tw = time_weights(grid);
        double s = 0.0;
        for (int k = 0; k < grid.time_levels(); ++k)
            for (std::size_t e = 0; e < entries.size(); ++e) {
                double v = tr.at(k, static_cast<int>(e));
                s += tw[k] * bw[e] * v * v;
            }
        return std::sqrt(s);
    };
    // discrete H1 norm of h
    double h1 = 0.0;
    {
        auto grad = gradient(grid, h.level(0));
        for (int n = 0; n < grid.space_nodes(); ++n) {
            const auto& gr = grad[static_cast<std::size_t>(n)];
            h1 += sw[n] * (h.at(0, n) * h.at(0, n) + gr[0] * gr[0] + gr[1] * gr[1]);
        }
        h1 = std::sqrt(h1);
    }
    StabilityAudit a;
    a.M = sorted.front() * h1;
    double mmax = 0.0;
    for (double s : sorted) {
        Field g2 = g1;
        g2.axpy(s, h);
        Field u2 = solve(g2);
        AuditPoint p;
        p.scale = s;
        p.lhs = std::pow(norm(g2 - g1, NormSpace::L2Omega), 2);
        p.dn_diff = sigma(normal_derivative(u1 - u2, entries));
        mmax = std::max(mmax, p.dn_diff);
        a.points.push_back(p);
    }
    auto shape = [&](double m, double d0) {
        if (m <= 0.0) return 0.0;
        return (a.M + 1.0) / d0 * m - a.M * a.M / std::log(d0 * m);
    };
    a.C = std::numeric_limits<double>::infinity();
    if (mmax > 0.0) {
        for (int j = 0; j <= 12; ++j) {
            const double d0 = std::min(0.5, 0.5 / mmax) * std::pow(10.0, -0.5 * j);
            double C = 0.0;
            for (const auto& p : a.points) {
                double sh = shape(p.dn_diff, d0);
                if (p.lhs > 0.0) C = sh > 0.0 ? std::max(C, p.lhs / sh) : std::numeric_limits<double>::infinity();
            }
            if (C < a.C) {
                a.C = C;
                a.delta0 = d0;
            }
        }
    } else {
        a.C = 0.0;
        a.delta0 = 0.5;
    }
    a.bound_dominates = std::isfinite(a.C);
    for (auto& p : a.points) {
        p.bound = a.C * shape(p.dn_diff, a.delta0);
        if (!(p.lhs <= p.bound * (1.0 + 1e-9) + 1e-300)) a.bound_dominates = false;
    }
    a.monotone_lhs = a.monotone_dn = true;
    for (std::size_t i = 1; i < a.points.size(); ++i) {
        if (!(a.points[i].lhs < a.points[i - 1].lhs)) a.monotone_lhs = false;
        if (!(a.points[i].dn_diff < a.points[i - 1].dn_diff)) a.monotone_dn = false;
    }
    return a;
}

nlohmann::json audit_json(const StabilityAudit& a) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : a.points)
        pts.push_back({{"scale", p.scale}, {"lhs", p.lhs}, {"dn_diff", p.dn_diff}, {"bound", p.bound}});
    return {{"points", pts},
            {"M", a.M},
            {"C", std::isfinite(a.C) ? nlohmann::json(a.C) : nlohmann::json("inf")},
            {"delta0", a.delta0},
            {"monotone_lhs", a.monotone_lhs},
            {"monotone_dn", a.monotone_dn},
            {"bound_dominates", a.bound_dominates}};
}

MaxPrincipleCertificate max_principle_check(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                            const Field& f, const SolverSettings& settings) {
    Field fn = f.empty() ? Field::on_q(grid) : dirichlet_nodal(f, grid);
    for (double v : fn.values())
        if (v < 0.0) throw InvalidInput("boundary data must be nonnegative");
    auto v = solve_linear(grid, gamma, q, fn, Field{}, Field{}, settings).solution;
    MaxPrincipleCertificate c;
    c.sup_norm = v.max_abs();
    c.min_value = std::numeric_limits<double>::infinity();
    c.min_beyond_first = std::numeric_limits<double>::infinity();
    auto inner = grid.interior_nodes();
    for (int k = 1; k < grid.time_levels(); ++k)
        for (int n : inner) {
            double x = v.at(k, n);
            if (x < c.min_value) {
                c.min_value = x;
                c.min_level = k;
                c.min_node = n;
            }
            if (k >= 2) c.min_beyond_first = std::min(c.min_beyond_first, x);
        }
    c.nonnegative = c.min_value >= -1e-8 * c.sup_norm;
    c.positive_beyond_first = c.min_beyond_first > 0.0;
    if (!c.nonnegative) {
        std::ostringstream os;
        os << "maximum principle violated: " << c.min_value << " at level " << c.min_level << ", node " << c.min_node;
        throw DomainError(os.str());
    }
    return c;
}

NonuniquenessDemo nonuniqueness_demo(const SpaceTimeGrid& grid, const NonuniquenessOptions& opt,
                                     const DiffusionTensor& gamma) {
    if (opt.centers.size() != 2) throw InvalidInput("the construction needs exactly two centers");
    if (!(opt.radius > 0.0) || !(opt.collar > 0.0)) throw InvalidInput("radius and collar must be positive");
    const int d = grid.dim();
    double sep = 0.0;
    for (int a = 0; a < d; ++a) sep += std::pow(opt.centers[0][a] - opt.centers[1][a], 2);
    if (sep == 0.0 || opt.amplitude == 0.0) throw InvalidInput("the two states must differ at t = 0");
    for (int a = 0; a < d; ++a) {
        if (opt.collar < 2.0 * grid.spacing(a)) throw InvalidInput("collar must span at least two cells");
        for (const auto& c : opt.centers)
            if (c[a] - opt.radius < grid.lower(a) + opt.collar || c[a] + opt.radius > grid.upper(a) - opt.collar)
                throw InvalidInput("bump support leaves the region inside the collar");
    }
    auto bump = [&](const Point& c) {
        return [&, c](Point x, double t) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) r2 += (x[a] - c[a]) * (x[a] - c[a]);
            double s = r2 / (opt.radius * opt.radius);
            if (s >= 1.0) return 0.0;
            return opt.amplitude * std::exp(1.0 - 1.0 / (1.0 - s)) * std::exp(-t);
        };
    };
    NonuniquenessDemo out;
    out.u1 = Field::sample_q(grid, bump(opt.centers[0]));
    out.u2 = Field::sample_q(grid, bump(opt.centers[1]));
    // A = -(u^{n+1} - u^n)/dt - L u^{n+1}, the residual of the implicit Euler step
    auto residual = [&](const Field& u) {
        Field A = Field::on_q(grid);
        std::vector<double> Lu(static_cast<std::size_t>(grid.space_nodes()));
        for (int k = 1; k < grid.time_levels(); ++k) {
            auto L = detail::assemble<double>(grid, gamma, {0.0, 0.0}, grid.time(k));
            L.apply(u.level(k), Lu.data());
            for (int n : grid.interior_nodes())
                A.at(k, n) = -(u.at(k, n) - u.at(k - 1, n)) / grid.dt() - Lu[static_cast<std::size_t>(n)];
        }
        for (int n = 0; n < grid.space_nodes(); ++n) A.at(0, n) = A.at(1, n);
        return A;
    };
    out.A1 = residual(out.u1);
    out.A2 = residual(out.u2);
    out.g1 = out.u1.slice(0);
    out.g2 = out.u2.slice(0);
    SolverSettings ie;
    ie.scheme = TimeScheme::ImplicitEuler;
    auto entries = BoundaryPortion::full().resolve(grid);
    auto run = [&](const Field& g, const Field& A, const Field& target, Field& trace, double& tsup, double& usup) {
        Field h = A;
        h *= -1.0;
        auto v = solve_linear(grid, gamma, Field{}, Field{}, g, h, ie).solution;
        out.reproduction = std::max(out.reproduction, (v - target).max_abs());
        trace = normal_derivative(v, entries);
        tsup = trace.max_abs();
        usup = v.max_abs();
    };
    run(out.g1, out.A1, out.u1, out.trace1, out.trace_sup1, out.state_sup1);
    run(out.g2, out.A2, out.u2, out.trace2, out.trace_sup2, out.state_sup2);
    out.g_diff = norm(out.g1 - out.g2, NormSpace::L2Omega);
    out.valid = out.trace_sup1 <= 1e-8 * (1.0 + out.state_sup1) && out.trace_sup2 <= 1e-8 * (1.0 + out.state_sup2) &&
                out.g_diff >= 0.1;
    return out;
}

}  // namespace pipl
