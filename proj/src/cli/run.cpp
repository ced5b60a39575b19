#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pipl/analysis.hpp"
#include "pipl/cli.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace fs = std::filesystem;

namespace {

constexpr double pi = std::numbers::pi;

/// Per-run state: configuration, output directory and the accumulated manifest parts.
struct Context {
    const Config& cfg;
    RunOptions opt;
    fs::path out;
    std::uint64_t seed = 0;
    nlohmann::json results = nlohmann::json::object();
    nlohmann::json checks = nlohmann::json::array();
    std::vector<std::string> outputs;

    void check(const std::string& name, double value, const std::string& relation, double threshold) {
        bool pass = false;
        if (relation == "<=") pass = value <= threshold;
        if (relation == ">=") pass = value >= threshold;
        if (relation == "<") pass = value < threshold;
        if (relation == ">") pass = value > threshold;
        checks.push_back({{"name", name}, {"value", value}, {"relation", relation}, {"threshold", threshold}, {"pass", pass}});
    }
    void check(const std::string& name, bool pass) {
        checks.push_back({{"name", name}, {"value", pass}, {"relation", "=="}, {"threshold", true}, {"pass", pass}});
    }
    std::ofstream open(const std::string& name) {
        outputs.push_back(name);
        std::ofstream f(out / name);
        if (!f) throw InvalidInput("cannot write '" + (out / name).string() + "'");
        return f;
    }
    void table(const std::string& name, const CsvTable& t) {
        auto f = open(name);
        t.write(f);
    }
    void field(const std::string& name, const Field& v) {
        auto f = open(name);
        write_field_csv(f, v);
    }
    void json(const std::string& name, const nlohmann::json& j) {
        auto f = open(name);
        f << j.dump(2) << '\n';
    }
};

std::string num(double v) { return format_number(v); }

// ---------------------------------------------------------------- config readers

SpaceTimeGrid read_grid(const Config& c, int refine = 0) {
    const int dim = c.integer("grid", "dim", 1);
    if (dim != 1 && dim != 2) throw ConfigError("[grid] dim must be 1 or 2");
    auto lower = c.numbers("grid", "lower", dim == 1 ? std::vector<double>{0.0} : std::vector<double>{0.0, 0.0});
    auto upper = c.numbers("grid", "upper", dim == 1 ? std::vector<double>{1.0} : std::vector<double>{1.0, 1.0});
    auto nodes = c.numbers("grid", "nodes", dim == 1 ? std::vector<double>{33} : std::vector<double>{17, 17});
    const int nt0 = c.integer("grid", "time_steps", 32);
    const double T = c.number("grid", "horizon", 1.0);
    if (static_cast<int>(lower.size()) != dim || static_cast<int>(upper.size()) != dim ||
        static_cast<int>(nodes.size()) != dim)
        throw ConfigError("[grid] lower, upper and nodes need one entry per dimension");
    const int f = 1 << refine;
    auto n = [&](int a) { return (static_cast<int>(nodes[static_cast<std::size_t>(a)]) - 1) * f + 1; };
    if (dim == 1) return SpaceTimeGrid::interval(lower[0], upper[0], n(0), nt0 * f, T);
    return SpaceTimeGrid::rectangle({lower[0], lower[1]}, {upper[0], upper[1]}, n(0), n(1), nt0 * f, T);
}

Field sample_q(const SpaceTimeGrid& g, const Expr& e) {
    return Field::sample_q(g, [&](Point x, double t) { return e.eval({x[0], x[1], t, 0.0}); });
}

Field sample_omega(const SpaceTimeGrid& g, const Expr& e) {
    return Field::sample_omega(g, [&](Point x) { return e.eval({x[0], x[1], 0.0, 0.0}); });
}

DiffusionTensor read_gamma(const Config& c) {
    const double rho0 = c.number("model", "rho0", 0.5);
    if (c.has("model", "gamma11")) {
        return DiffusionTensor(c.expr("model", "gamma11"), c.expr("model", "gamma12", "0"), c.expr("model", "gamma22"),
                               rho0);
    }
    if (!c.has("model", "gamma")) {
        c.text("model", "gamma", "identity");
        return DiffusionTensor::identity();
    }
    if (c.text("model", "gamma") == "identity") return DiffusionTensor::identity();
    return DiffusionTensor::scalar(c.expr("model", "gamma"), rho0);
}

Nonlinearity read_nonlinearity(const Config& c, const SpaceTimeGrid& g, const std::string& key = "nonlinearity") {
    Expr e = c.expr("model", key, "0");
    auto cls = nonlinearity_class_from_string(c.text("model", "class", "A_T"));
    if (cls == NonlinearityClass::B_T) {
        auto nl = Nonlinearity::glued(e, c.expr("model", "tail"), c.number("model", "switch_time"));
        nl.validate(g);
        return nl;
    }
    return Nonlinearity::checked(e, cls, g);
}

SolverSettings read_settings(const Config& c) {
    SolverSettings s;
    const auto scheme = c.text("solver", "scheme", "implicit-euler");
    if (scheme == "implicit-euler") {
        s.scheme = TimeScheme::ImplicitEuler;
    } else if (scheme == "crank-nicolson") {
        s.scheme = TimeScheme::CrankNicolson;
    } else {
        throw ConfigError("unknown time scheme '" + scheme + "'");
    }
    s.tol = c.number("solver", "tol", s.tol);
    s.max_iter = c.integer("solver", "max_iter", s.max_iter);
    s.smallness = c.number("solver", "smallness", s.smallness);
    return s;
}

Strategy read_strategy(const Config& c) {
    const auto s = c.text("solver", "strategy", "newton");
    if (s == "newton") return Strategy::Newton;
    if (s == "picard") return Strategy::Picard;
    throw ConfigError("unknown strategy '" + s + "'");
}

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string t;
    while (is >> t) {
        std::string cur;
        for (char ch : t) {
            if (ch == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

/// "full", face names ("left right"), "nodes 0 12", or
/// "directional omega=1,0 aperture=0 sign=1".
BoundaryPortion parse_portion(const std::string& text) {
    if (text.rfind("directional", 0) == 0) {
        std::vector<double> omega{1.0};
        double aperture = 0.0;
        int sign = 1;
        std::istringstream is(text.substr(11));
        std::string kv;
        while (is >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("directional portion expects key=value pairs");
            std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
            try {
                if (k == "omega") {
                    omega.clear();
                    for (const auto& t : tokens(v)) omega.push_back(std::stod(t));
                } else if (k == "aperture") {
                    aperture = std::stod(v);
                } else if (k == "sign") {
                    sign = std::stoi(v);
                } else {
                    throw ConfigError("unknown directional key '" + k + "'");
                }
            } catch (const std::logic_error&) {
                throw ConfigError("bad value in directional portion '" + kv + "'");
            }
        }
        return BoundaryPortion::directional(omega, aperture, sign);
    }
    auto t = tokens(text);
    if (t.empty() || (t.size() == 1 && t[0] == "full")) return BoundaryPortion::full();
    if (t[0] == "nodes") {
        std::vector<int> nodes;
        try {
            for (std::size_t i = 1; i < t.size(); ++i) nodes.push_back(std::stoi(t[i]));
        } catch (const std::logic_error&) {
            throw ConfigError("bad node list in portion '" + text + "'");
        }
        return BoundaryPortion::named(nodes);
    }
    std::vector<Face> faces;
    for (const auto& s : t) faces.push_back(face_from_string(s));
    return BoundaryPortion::neighborhood(faces);
}

BoundaryPortion read_portion(const Config& c, const std::string& section, const std::string& key = "portion") {
    return parse_portion(c.text(section, key, "full"));
}

DataMode read_mode(const Config& c, const std::string& section) {
    const auto m = c.text(section, "mode", "full");
    if (m == "full") return DataMode::Full;
    if (m == "partial") return DataMode::Partial;
    throw ConfigError("unknown data mode '" + m + "'");
}

bool strictly_decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(num(v)); }

// ---------------------------------------------------------------- experiments

void run_forward(Context& ctx) {
    const auto& c = ctx.cfg;
    const int levels = c.integer("forward", "levels", 1);
    if (levels < 1 || levels > 6) throw ConfigError("[forward] levels must lie in 1..6");
    const bool has_oracle = c.has("data", "oracle");
    Expr g_expr = c.expr("data", "initial", "0");
    Expr f_expr = c.expr("data", "dirichlet", "0");
    Expr oracle = has_oracle ? c.expr("data", "oracle") : Expr();
    const bool has_dn = c.has("data", "dn_oracle");
    Expr dn_oracle = has_dn ? c.expr("data", "dn_oracle") : Expr();
    auto portion = read_portion(c, "forward", "dn_portion");
    auto settings = read_settings(c);
    auto strategy = read_strategy(c);

    CsvTable conv{{"h", "dt", "l2q_error", "dn_max_error", "iterations"}, {}};
    std::vector<double> hs, errs, dn_errs;
    for (int r = 0; r < levels; ++r) {
        auto g = read_grid(c, r);
        auto gamma = read_gamma(c);
        auto nl = read_nonlinearity(c, g);
        auto rep = solve_semilinear(g, gamma, nl, sample_q(g, f_expr), sample_omega(g, g_expr), strategy, settings);
        if (!rep.converged) throw SolverError("forward solve did not converge");
        double err = std::numeric_limits<double>::quiet_NaN(), dn_err = err;
        if (has_oracle) err = norm(rep.solution - sample_q(g, oracle), NormSpace::L2Q);
        if (has_dn) {
            auto entries = portion.resolve(g);
            auto m = measure(rep.solution, portion);
            dn_err = 0.0;
            for (int k = 0; k < g.time_levels(); ++k)
                for (std::size_t e = 0; e < entries.size(); ++e) {
                    Point x = g.coord(entries[e].node);
                    double exact = dn_oracle.eval({x[0], x[1], g.time(k), 0.0});
                    dn_err = std::max(dn_err, std::abs(m.values.at(k, static_cast<int>(e)) - exact));
                }
        }
        if (r == 0) {
            ctx.field("solution.csv", rep.solution);
            ctx.results["iterations"] = rep.iterations;
            ctx.results["scheme"] = rep.scheme;
            ctx.results["well_posed_regime"] = rep.well_posed_regime;
            ctx.results["notes"] = rep.notes;
            if (has_oracle) ctx.results["oracle_l2q_error"] = err;
            if (has_dn) ctx.results["dn_max_error"] = dn_err;
        }
        hs.push_back(g.spacing(0));
        errs.push_back(err);
        dn_errs.push_back(dn_err);
        conv.add({num(g.spacing(0)), num(g.dt()), num(err), num(dn_err), std::to_string(rep.iterations)});
    }
    ctx.table("convergence.csv", conv);
    if (levels >= 2 && has_oracle) {
        const double order = loglog_slope(hs, errs);
        ctx.results["l2q_order"] = order;
        ctx.check("l2q_order", order, ">=", c.number("forward", "min_order", 1.8));
    }
    if (levels >= 2 && has_dn) {
        const double order = loglog_slope(hs, dn_errs);
        ctx.results["dn_order"] = order;
        ctx.check("dn_order", order, ">=", c.number("forward", "min_order", 1.8));
    }
    if (levels == 1 && has_oracle) ctx.check("oracle_l2q_error", errs[0], "<=", c.number("forward", "tolerance", 1e-2));
}

void run_dnmap(Context& ctx) {
    const auto& c = ctx.cfg;
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    auto nl = read_nonlinearity(c, g);
    auto portion = read_portion(c, "dnmap");
    const bool active = c.text("dnmap", "map", "passive") == "active";
    auto settings = read_settings(c);
    Field g0 = sample_omega(g, c.expr("data", "initial", "0"));
    DNMeasurement m = active ? active_map(g, gamma, nl, sample_q(g, c.expr("data", "dirichlet", "0")), g0, portion,
                                          read_strategy(c), settings)
                             : passive_map(g, gamma, nl, g0, portion, read_strategy(c), settings);
    auto model = noise_model_from_string(c.text("dnmap", "noise", "none"));
    if (model != NoiseModel::None) m = add_noise(m, model, c.number("dnmap", "noise_level"), ctx.seed);
    {
        auto f = ctx.open("dn.csv");
        write_dn_csv(f, m);
    }
    ctx.json("dn.json", dn_sidecar(m));
    ctx.results["measurement_norm"] = measurement_norm(m);
    ctx.results["entries"] = m.values.width();
    if (c.has("data", "dn_oracle")) {
        Expr dn = c.expr("data", "dn_oracle");
        auto entries = portion.resolve(g);
        double worst = 0.0;
        for (int k = 0; k < g.time_levels(); ++k)
            for (std::size_t e = 0; e < entries.size(); ++e) {
                Point x = g.coord(entries[e].node);
                worst = std::max(worst, std::abs(m.values.at(k, static_cast<int>(e)) - dn.eval({x[0], x[1], g.time(k), 0.0})));
            }
        ctx.results["dn_max_error"] = worst;
        ctx.check("dn_max_error", worst, "<=", c.number("dnmap", "tolerance", 1e-2));
    }
}

CGOParameters read_cgo(const Config& c, const std::string& s) {
    CGOParameters p;
    p.rho = c.number(s, "rho", p.rho);
    p.omega = c.numbers(s, "omega", p.omega);
    p.xi = c.numbers(s, "xi", std::vector<double>(p.omega.size(), 0.0));
    p.tau = c.number(s, "tau", 0.0);
    p.direction = c.text(s, "direction", "forward") == "backward" ? Direction::Backward : Direction::Forward;
    p.aperture = c.number(s, "aperture", 0.0);
    p.partial = c.flag(s, "partial", false);
    p.carrier = c.text(s, "carrier", "real") == "complex" ? CarrierKind::ComplexExponential : CarrierKind::Real;
    return p;
}

void run_cgo(Context& ctx) {
    const auto& c = ctx.cfg;
    auto g = read_grid(c);
    Field q = sample_q(g, c.expr("cgo-verify", "q", "0"));
    auto base = read_cgo(c, "cgo-verify");
    auto rhos = c.numbers("cgo-verify", "rhos", {8, 16, 32, 64});
    auto settings = read_settings(c);
    auto sweep = remainder_sweep(g, q, base, rhos, settings);
    CsvTable t{{"rho", "remainder_norm", "residual"}, {}};
    std::vector<double> rem;
    double worst_mat = 0.0;
    nlohmann::json warnings = nlohmann::json::array();
    for (const auto& e : sweep) {
        t.add({num(e.rho), num(e.remainder_norm), num(e.residual)});
        rem.push_back(e.remainder_norm);
        worst_mat = std::max(worst_mat, e.max_materialized);
        for (const auto& w : e.warnings) warnings.push_back(w);
    }
    ctx.table("remainder.csv", t);
    ctx.results["remainders"] = rem;
    ctx.results["max_materialized"] = worst_mat;
    ctx.results["warnings"] = warnings;
    ctx.check("remainder_strictly_decreasing", strictly_decreasing(rem));
    if (!rem.empty()) ctx.check("remainder_final_over_initial", rem.back() / rem.front(), "<", 0.5);
    ctx.check("no_materialized_overflow", worst_mat < kMaterializeLimit);

    if (c.has("cgo-verify", "pairing_f")) {
        Field f = sample_q(g, c.expr("cgo-verify", "pairing_f"));
        Field q2 = sample_q(g, c.expr("cgo-verify", "q_backward", "0"));
        auto taus = c.numbers("cgo-verify", "pairing_taus", {0, pi, -pi, 2 * pi, -2 * pi, 3 * pi});
        CsvTable pt{{"tau", "rho", "pairing_error"}, {}};
        bool all = true;
        for (double tau : taus) {
            std::vector<double> gaps;
            auto fhat = fourier_sample(f, std::vector<double>(base.omega.size(), 0.0), tau);
            for (double r : rhos) {
                CGOParameters a = base, b = base;
                a.rho = b.rho = r;
                a.tau = tau;
                a.direction = Direction::Forward;
                b.tau = 0.0;
                b.direction = Direction::Backward;
                auto s1 = build(g, q, a, settings);
                auto s2 = build(g, q2, b, settings);
                double gap = std::abs(pairing(f, s1, s2).value - fhat);
                gaps.push_back(gap);
                pt.add({num(tau), num(r), num(gap)});
            }
            all = all && strictly_decreasing(gaps);
        }
        ctx.table("pairing.csv", pt);
        ctx.results["pairing_points"] = taus.size();
        ctx.check("pairing_monotone", all);
        ctx.check("pairing_points", static_cast<double>(taus.size()), ">=", 6);
    }
}

void run_linearize(Context& ctx) {
    const auto& c = ctx.cfg;
    auto g = read_grid(c);
    LinearizationModel m;
    m.grid = &g;
    m.gamma = read_gamma(c);
    m.nl = read_nonlinearity(c, g);
    m.strategy = read_strategy(c);
    m.settings = read_settings(c);
    m.jobs = ctx.opt.jobs;
    ProbeFamily fam;
    if (c.has("data", "initial")) fam.base_initial = sample_omega(g, c.expr("data", "initial"));
    const double ramp = c.number("linearize", "ramp_time", 0.1);
    for (int i = 1; c.has("linearize", "probe" + std::to_string(i)); ++i) {
        Expr e = c.expr("linearize", "probe" + std::to_string(i));
        fam.probes.push_back(ramped_probe(g, [e](Point x, double t) { return e.eval({x[0], x[1], t, 0.0}); }, ramp));
    }
    if (fam.probes.empty()) throw ConfigError("[linearize] needs probe1, probe2, ...");
    fam.schedule = c.numbers("linearize", "schedule", {1e-1, 1e-2, 1e-3});
    auto orders = c.numbers("linearize", "orders", {1, 2, 3});
    std::vector<LinearizedField> fields;
    for (double o : orders) {
        const int k = static_cast<int>(o);
        if (k < 1 || k > static_cast<int>(fam.probes.size()))
            throw ConfigError("[linearize] order " + std::to_string(k) + " needs that many probes");
        std::vector<int> idx;
        for (int i = 0; i < k; ++i) idx.push_back(i);
        fields.push_back(k == 1 ? first_order(m, fam, 0) : k == 2 ? second_order(m, fam, 0, 1) : higher_order(m, fam, idx));
    }
    CsvTable t{{"order", "eps", "gap", "noise_floor"}, {}};
    for (const auto& f : fields)
        for (std::size_t i = 0; i < f.report.eps.size(); ++i)
            t.add({std::to_string(f.order), num(f.report.eps[i]), num(f.report.gaps[i]), num(f.report.noise_floor[i])});
    ctx.table("rates.csv", t);
    ctx.results["report"] = linearization_report(fields);
    for (const auto& f : fields) {
        ctx.check("slope_order_" + std::to_string(f.order) + "_min", f.report.slope, ">=", 0.8);
        ctx.check("slope_order_" + std::to_string(f.order) + "_max", f.report.slope, "<=", 1.2);
    }
}

void run_recover_q(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "recover-q";
    auto g = read_grid(c);
    Field q_ref = sample_q(g, c.expr(s, "q_reference", "0"));
    Field q_truth = sample_q(g, c.expr(s, "q_truth"));
    PotentialOptions o;
    o.mode = read_mode(c, s);
    o.modes_x = c.integer(s, "modes_x", o.modes_x);
    o.modes_t = c.integer(s, "modes_t", o.modes_t);
    o.alpha = c.number(s, "alpha", o.alpha);
    o.born_iterations = c.integer(s, "born_iterations", o.born_iterations);
    o.known_lo = c.number(s, "known_lo", o.known_lo);
    o.known_hi = c.number(s, "known_hi", o.known_hi);
    o.settings = read_settings(c);
    const double rho = c.number(s, "rho", 4.0);
    const int max_mode = c.integer(s, "max_mode", 4);
    std::vector<ProfileMeasurement> data;
    for (const auto& p : probe_lattice(g, rho, max_mode, o.mode)) data.push_back(measure_profile(g, q_truth, p, o.mode, o.settings));
    Field diff = q_ref - q_truth;
    auto r = recover_potential(g, q_ref, data, o, &diff);
    ctx.field("recovered.csv", r.result.recovered);
    CsvTable st{{"carrier", "xi", "tau", "rho", "re", "im"}, {}};
    for (const auto& smp : r.samples.samples)
        st.add({smp.carrier == CarrierKind::Real ? "real" : "complex", num(smp.xi.empty() ? 0.0 : smp.xi[0]), num(smp.tau),
                num(smp.rho), num(smp.value.real()), num(smp.value.imag())});
    ctx.table("samples.csv", st);
    ctx.results["result"] = result_json(r.result);
    ctx.results["conjugate_defect"] = r.samples.conjugate_defect();
    const double dn = norm(diff, NormSpace::L2Q);
    if (dn == 0.0) {
        ctx.check("zero_difference_norm", norm(r.result.recovered, NormSpace::L2Q), "<=", 1e-6);
    } else {
        ctx.check("relative_error", r.result.truth_error, "<=", c.number(s, "tolerance", 0.2));
    }
}

void run_recover_b(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "recover-b";
    auto g = read_grid(c);
    auto truth = read_nonlinearity(c, g);
    Nonlinearity ref(c.expr(s, "reference", "0"));
    TaylorOptions o;
    o.order = c.integer(s, "order", o.order);
    o.eps = c.number(s, "eps", o.eps);
    o.modes_x = c.integer(s, "modes_x", o.modes_x);
    o.modes_t = c.integer(s, "modes_t", o.modes_t);
    o.alpha = c.number(s, "alpha", o.alpha);
    o.rho = c.number(s, "rho", o.rho);
    o.max_mode = c.integer(s, "max_mode", o.max_mode);
    const auto method = c.text(s, "method", "weighted-ls");
    if (method == "division") {
        o.method = TaylorMethod::Division;
    } else if (method != "weighted-ls") {
        throw ConfigError("unknown Taylor method '" + method + "'");
    }
    o.settings = read_settings(c);
    o.jobs = ctx.opt.jobs;
    Field d = Field::sample_q(g, [&](Point x, double t) {
        return truth.evaluate(x, t, 0.0, o.order) - ref.evaluate(x, t, 0.0, o.order);
    });
    auto r = recover_taylor(g, truth, ref, o, &d);
    ctx.field("recovered.csv", r.recovered);
    ctx.results["result"] = result_json(r);
    if (norm(d, NormSpace::L2Q) == 0.0) {
        ctx.check("zero_difference_max", r.recovered.max_abs(), "<=", 1e-6);
    } else {
        ctx.check("relative_error", r.truth_error, "<=", c.number(s, "tolerance", 0.25));
    }
}

InitialOptions read_initial_options(const Config& c, const std::string& s) {
    InitialOptions o;
    o.tau = c.number(s, "discrepancy", o.tau);
    o.alpha_floor = c.number(s, "alpha_floor", o.alpha_floor);
    o.alpha_steps = c.integer(s, "alpha_steps", o.alpha_steps);
    o.gauss_newton = c.integer(s, "gauss_newton", o.gauss_newton);
    o.cgls_iterations = c.integer(s, "cgls_iterations", o.cgls_iterations);
    o.settings = read_settings(c);
    return o;
}

void run_recover_g(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "recover-g";
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    auto nl = read_nonlinearity(c, g);
    Field truth = sample_omega(g, c.expr("data", "initial"));
    auto portion = read_portion(c, s);
    auto o = read_initial_options(c, s);
    auto clean = passive_map(g, gamma, nl, truth, portion, read_strategy(c), o.settings);
    auto model = noise_model_from_string(c.text(s, "noise", "none"));
    DNMeasurement data = clean;
    if (model != NoiseModel::None) {
        data = add_noise(clean, model, c.number(s, "noise_level"), ctx.seed);
        DNMeasurement diff = data;
        diff.values -= clean.values;
        o.noise_level = measurement_norm(diff);
    }
    auto r = recover_initial(g, gamma, nl, data, o, &truth);
    ctx.field("recovered.csv", r.recovered);
    CsvTable t{{"iteration", "residual"}, {}};
    for (std::size_t i = 0; i < r.residuals.size(); ++i) t.add({std::to_string(i), num(r.residuals[i])});
    ctx.table("residuals.csv", t);
    ctx.results["result"] = result_json(r);
    ctx.check("relative_error", r.truth_error, "<=", c.number(s, "tolerance", 0.1));
}

void run_stability(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "stability";
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    auto nl = read_nonlinearity(c, g);
    Field truth = sample_omega(g, c.expr("data", "initial"));
    auto portion = read_portion(c, s);
    auto deltas = c.numbers(s, "deltas", {1e-1, 1e-2, 1e-3, 1e-4});
    const int trials = c.integer(s, "trials", 5);
    auto o = read_initial_options(c, s);
    CsvTable t{{"delta", "trial", "error", "dn_diff_norm"}, {}};
    if (!deltas.empty() && trials > 0) {
        auto curve = stability_curve(g, gamma, nl, truth, portion, deltas, trials, ctx.seed, o);
        for (const auto& p : curve.points) t.add({num(p.delta), std::to_string(p.trial), num(p.error), num(p.dn_diff_norm)});
        ctx.results["curve"] = {{"floor_error", curve.floor_error}, {"c1", curve.c1}, {"c2", curve.c2},
                                {"delta0", curve.delta0}, {"two_term_residual", curve.two_term_residual},
                                {"linear_coefficient", curve.linear_coefficient},
                                {"linear_residual", curve.linear_residual}, {"spearman", curve.spearman}};
        ctx.check("spearman", curve.spearman, ">=", 0.9);
        ctx.check("two_term_residual_minus_linear", curve.two_term_residual - curve.linear_residual, "<=", 0.0);
    }
    ctx.table("stability.csv", t);
    auto scales = c.numbers(s, "audit_scales", {});
    if (!scales.empty()) {
        Field h = sample_omega(g, c.expr(s, "audit_direction", "sin(2*pi*x)"));
        auto a = stability_audit(g, gamma, nl, truth, h, scales, portion, o.settings);
        CsvTable at{{"scale", "lhs", "dn_diff", "bound"}, {}};
        for (const auto& p : a.points) at.add({num(p.scale), num(p.lhs), num(p.dn_diff), num(p.bound)});
        ctx.table("audit.csv", at);
        ctx.results["audit"] = audit_json(a);
        ctx.check("audit_monotone_lhs", a.monotone_lhs);
        ctx.check("audit_monotone_dn", a.monotone_dn);
        ctx.check("audit_bound_dominates", a.bound_dominates);
    }
}

void run_carleman(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "carleman";
    const std::string state = c.text(s, "state", "heat-oracle");
    Expr u_expr, F_expr;
    if (state != "heat-oracle") {
        u_expr = c.expr(s, "state");
        F_expr = c.expr(s, "source", "0");
    }
    CarlemanConfig cfg;
    cfg.gamma0 = read_portion(c, s);
    cfg.gamma = read_gamma(c);
    cfg.window = c.number(s, "window", cfg.window);
    cfg.K = c.number(s, "K", cfg.K);
    cfg.t0 = c.number(s, "t0", cfg.t0);
    cfg.L = c.number(s, "L", cfg.L);
    auto lambdas = c.numbers(s, "lambdas", {1, 2, 4});
    auto mus = c.numbers(s, "mus", {1, 2});
    const bool refine = c.flag(s, "refine", true);
    CsvTable t{{"lemma", "refinement", "lambda", "mu", "L", "ratio", "lhs", "rhs", "log_scale", "dynamic_range"}, {}};
    std::vector<std::vector<InequalityReport>> runs;
    for (int r = 0; r <= (refine ? 1 : 0); ++r) {
        auto g = read_grid(c, r);
        Field u = state == "heat-oracle" ? heat_oracle(g) : sample_q(g, u_expr);
        Field F = state == "heat-oracle" ? Field{} : sample_q(g, F_expr);
        auto reps = carleman_sweep_1(u, F, cfg, lambdas, mus);
        auto second = carleman_sweep_2(u, F, cfg, lambdas);
        reps.insert(reps.end(), second.begin(), second.end());
        for (const auto& rep : reps)
            t.add({rep.lemma, std::to_string(r), num(rep.lambda), num(rep.mu), num(rep.L), num(rep.ratio), num(rep.lhs),
                   num(rep.rhs), num(rep.log_scale), num(rep.dynamic_range)});
        runs.push_back(std::move(reps));
    }
    ctx.table("carleman.csv", t);
    nlohmann::json reports = nlohmann::json::array();
    bool finite = true;
    for (const auto& rep : runs[0]) {
        reports.push_back(report_json(rep));
        finite = finite && std::isfinite(rep.ratio) && !rep.degenerate;
    }
    ctx.results["reports"] = reports;
    ctx.check("ratios_finite", finite);
    if (refine) {
        double worst = 0.0;
        for (std::size_t i = 0; i < runs[0].size(); ++i) {
            const double a = runs[0][i].ratio, b = runs[1][i].ratio, m = std::max(std::abs(a), std::abs(b));
            if (m > 0.0) worst = std::max(worst, std::abs(a - b) / m);
        }
        ctx.results["refinement_change"] = json_number(worst);
        ctx.check("refinement_change", worst, "<", 0.2);
    }
}

void run_maxprin(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "maxprin";
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    Field q = sample_q(g, c.expr(s, "q", "0"));
    Expr value = c.expr(s, "value", "1");
    auto portion = read_portion(c, s);
    const double ramp = c.number(s, "ramp_time", 0.05);
    auto nodes = classify_boundary(g, portion);
    Field f = Field::on_q(g);
    for (int k = 0; k < g.time_levels(); ++k)
        for (int n : nodes) {
            Point x = g.coord(n);
            f.at(k, n) = value.eval({x[0], x[1], g.time(k), 0.0}) * smooth_ramp(g.time(k), ramp);
        }
    auto cert = max_principle_check(g, gamma, q, f, read_settings(c));
    ctx.results["certificate"] = {{"min_value", cert.min_value},   {"min_level", cert.min_level},
                                  {"min_node", cert.min_node},     {"min_beyond_first", cert.min_beyond_first},
                                  {"sup_norm", cert.sup_norm},     {"nonnegative", cert.nonnegative},
                                  {"positive_beyond_first", cert.positive_beyond_first}};
    ctx.check("nonnegative", cert.nonnegative);
    ctx.check("positive_beyond_first", cert.positive_beyond_first);
}

void run_runge(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "runge";
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    Field q = sample_q(g, c.expr(s, "q", "0"));
    Field target;
    if (c.text(s, "target", "cgo") == "cgo") {
        CGOParameters p;
        p.rho = c.number(s, "target_rho", 2.0);
        p.tau = c.number(s, "target_tau", 2 * pi);
        auto v = materialize(build(g, q, p));
        target = Field::on_q(g);
        for (std::size_t i = 0; i < target.values().size(); ++i) target.values()[i] = v.values()[i].real();
    } else {
        target = sample_q(g, c.expr(s, "target"));
    }
    RungeOptions o;
    o.mode = read_mode(c, s);
    o.omega = c.numbers(s, "omega", o.omega);
    o.aperture = c.number(s, "aperture", o.aperture);
    o.region_lo = c.number(s, "region_lo", g.lower(0));
    o.region_hi = c.number(s, "region_hi", g.upper(0));
    o.rcond = c.number(s, "rcond", o.rcond);
    o.settings = read_settings(c);
    std::vector<int> sizes;
    for (double v : c.numbers(s, "sizes", {4, 8, 16, 32})) sizes.push_back(static_cast<int>(v));
    auto fits = runge_fit(g, gamma, q, target, sizes, o);
    CsvTable t{{"basis_size", "gap"}, {}};
    std::vector<double> gaps;
    for (const auto& f : fits) {
        t.add({std::to_string(f.basis_size), num(f.gap)});
        gaps.push_back(f.gap);
    }
    ctx.table("runge.csv", t);
    ctx.results["gaps"] = gaps;
    ctx.check("gaps_strictly_decreasing", strictly_decreasing(gaps));
}

void run_control(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "control";
    auto g = read_grid(c);
    auto gamma = read_gamma(c);
    auto nl = read_nonlinearity(c, g);
    Field g0 = sample_omega(g, c.expr("data", "initial"));
    ControlOptions o;
    o.time_splines = c.integer(s, "time_splines", o.time_splines);
    o.alpha = c.number(s, "alpha", o.alpha);
    o.cgls_iterations = c.integer(s, "cgls_iterations", o.cgls_iterations);
    o.gauss_newton = c.integer(s, "gauss_newton", o.gauss_newton);
    o.target_reduction = c.number(s, "target_reduction", o.target_reduction);
    o.settings = read_settings(c);
    auto r = null_control(g, gamma, nl, g0, c.number(s, "switch_time"), read_portion(c, s), o);
    ctx.field("control.csv", r.control);
    CsvTable t{{"iteration", "terminal_norm"}, {}};
    for (std::size_t i = 0; i < r.history.size(); ++i) t.add({std::to_string(i), num(r.history[i])});
    ctx.table("history.csv", t);
    ctx.results["switch_level"] = r.switch_level;
    ctx.results["uncontrolled_norm"] = r.uncontrolled_norm;
    ctx.results["terminal_norm"] = r.terminal_norm;
    ctx.results["continuation_max"] = r.continuation_max;
    ctx.results["partial_steering"] = r.partial_steering;
    ctx.results["notes"] = r.notes;
    const double reduction = r.terminal_norm > 0.0 ? r.uncontrolled_norm / r.terminal_norm
                                                   : std::numeric_limits<double>::infinity();
    ctx.results["reduction"] = json_number(reduction);
    ctx.check("reduction", reduction, ">=", o.target_reduction);
    if (nl.cls() == NonlinearityClass::B_T)
        ctx.check("continuation_over_terminal", r.continuation_max, "<=", 10.0 * r.terminal_norm);
}

void run_nonunique(Context& ctx) {
    const auto& c = ctx.cfg;
    const std::string s = "nonunique-demo";
    auto g = read_grid(c);
    if (g.dim() != 2) throw ConfigError("nonunique-demo needs a two-dimensional grid");
    auto gamma = read_gamma(c);
    NonuniquenessOptions o;
    o.collar = c.number(s, "collar", o.collar);
    o.radius = c.number(s, "radius", o.radius);
    o.amplitude = c.number(s, "amplitude", o.amplitude);
    auto c1 = c.numbers(s, "center1", {o.centers[0][0], o.centers[0][1]});
    auto c2 = c.numbers(s, "center2", {o.centers[1][0], o.centers[1][1]});
    if (c1.size() != 2 || c2.size() != 2) throw ConfigError("[nonunique-demo] centers need two coordinates");
    o.centers = {{c1[0], c1[1]}, {c2[0], c2[1]}};
    auto d = nonuniqueness_demo(g, o, gamma);
    ctx.field("g1.csv", d.g1);
    ctx.field("g2.csv", d.g2);
    auto entries = BoundaryPortion::full().resolve(g);
    CsvTable t{{"t", "face", "node_id", "trace1", "trace2"}, {}};
    for (int k = 0; k < g.time_levels(); ++k)
        for (std::size_t e = 0; e < entries.size(); ++e)
            t.add({num(g.time(k)), to_string(entries[e].face), std::to_string(entries[e].node),
                   num(d.trace1.at(k, static_cast<int>(e))), num(d.trace2.at(k, static_cast<int>(e)))});
    ctx.table("traces.csv", t);
    ctx.results["trace_sup"] = {d.trace_sup1, d.trace_sup2};
    ctx.results["state_sup"] = {d.state_sup1, d.state_sup2};
    ctx.results["reproduction"] = d.reproduction;
    ctx.results["g_diff"] = d.g_diff;
    ctx.results["valid"] = d.valid;
    ctx.check("trace1", d.trace_sup1, "<=", 1e-8 * (1.0 + d.state_sup1));
    ctx.check("trace2", d.trace_sup2, "<=", 1e-8 * (1.0 + d.state_sup2));
    ctx.check("g_diff", d.g_diff, ">=", 0.1);
}

const std::map<std::string, std::function<void(Context&)>>& registry() {
    static const std::map<std::string, std::function<void(Context&)>> r{
        {"forward", run_forward},     {"dnmap", run_dnmap},       {"cgo-verify", run_cgo},
        {"linearize", run_linearize}, {"recover-q", run_recover_q}, {"recover-b", run_recover_b},
        {"recover-g", run_recover_g}, {"stability", run_stability}, {"carleman", run_carleman},
        {"maxprin", run_maxprin},     {"runge", run_runge},       {"control", run_control},
        {"nonunique-demo", run_nonunique}};
    return r;
}

std::string utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

int fail(const fs::path& out, std::ostream& log, int code, nlohmann::json err) {
    err["exit_code"] = code;
    log << err.dump() << '\n';
    if (!out.empty()) {
        std::error_code ec;
        fs::create_directories(out, ec);
        std::ofstream f(out / "error.json");
        if (f) f << err.dump(2) << '\n';
    }
    return code;
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"forward",   "dnmap",    "cgo-verify", "linearize", "recover-q",
                                                "recover-b", "recover-g", "stability", "carleman",  "maxprin",
                                                "runge",     "control",  "nonunique-demo"};
    return kinds;
}

int run(const RunOptions& options, std::ostream& log) {
    std::string text;
    {
        std::ifstream in(options.config_path);
        if (!in) {
            fs::path out = options.out_dir.empty() ? fs::path{} : fs::path(options.out_dir);
            return fail(out, log, kExitParse,
                        {{"category", "config"}, {"message", "cannot read configuration file '" + options.config_path + "'"}});
        }
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    return run_text(options, text, log);
}

int run_text(const RunOptions& options, std::string_view config_text, std::ostream& log) {
    fs::path out = options.out_dir.empty() ? fs::path{} : fs::path(options.out_dir);
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    try {
        Config cfg = Config::parse(config_text);
        auto it = registry().find(options.kind);
        if (it == registry().end()) throw ConfigError("unknown experiment kind '" + options.kind + "'");
        if (cfg.has("experiment", "kind") && cfg.text("experiment", "kind") != options.kind)
            throw ConfigError("config describes kind '" + cfg.text("experiment", "kind") + "', not '" + options.kind + "'");
        cfg.set("experiment", "kind", options.kind);
        cfg.text("experiment", "kind");
        if (out.empty()) out = fs::path(cfg.text("experiment", "out", "pipl-out/" + options.kind));
        if (options.jobs < 1) throw ConfigError("--jobs must be at least 1");

        Context ctx{cfg, options, out, 0, nlohmann::json::object(), nlohmann::json::array(), {}};
        if (options.seed) {
            ctx.seed = *options.seed;
            cfg.set("experiment", "seed", std::to_string(ctx.seed));
        }
        const double seed = cfg.number("experiment", "seed", 0.0);
        if (seed < 0 || seed != std::floor(seed)) throw ConfigError("seed must be a nonnegative integer");
        ctx.seed = static_cast<std::uint64_t>(seed);
        fs::create_directories(out);
        std::error_code ec;
        fs::remove(out / "error.json", ec);

        it->second(ctx);

        bool all = true;
        for (const auto& ch : ctx.checks) all = all && ch["pass"].get<bool>();
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        nlohmann::json manifest{{"tool", "pipl"},
                                {"version", kToolVersion},
                                {"kind", options.kind},
                                {"seed", ctx.seed},
                                {"jobs", options.jobs},
                                {"check_mode", options.check},
                                {"config", cfg.resolved()},
                                {"source_config", cfg.raw()},
                                {"outputs", ctx.outputs},
                                {"results", ctx.results},
                                {"checks", ctx.checks},
                                {"checks_passed", all},
                                {"timing", {{"started_utc", started_utc}, {"wall_seconds", wall}}}};
        {
            std::ofstream f(out / "manifest.json");
            if (!f) throw InvalidInput("cannot write manifest in '" + out.string() + "'");
            f << manifest.dump(2) << '\n';
        }
        for (const auto& ch : ctx.checks)
            log << (ch["pass"].get<bool>() ? "PASS " : "FAIL ") << ch["name"].get<std::string>() << '\n';
        if (options.check && !all) return kExitCheck;
        return kExitOk;
    } catch (const ConfigExprError& e) {
        return fail(out, log, kExitParse,
                    {{"category", "parse"}, {"message", e.what()}, {"section", e.section()}, {"key", e.key()},
                     {"byte_offset", e.offset()}, {"line", e.line()}});
    } catch (const ConfigError& e) {
        return fail(out, log, kExitParse, {{"category", "config"}, {"message", e.what()}, {"line", e.line()}});
    } catch (const ParseError& e) {
        return fail(out, log, kExitParse, {{"category", "parse"}, {"message", e.what()}, {"byte_offset", e.offset()}});
    } catch (const InvalidInput& e) {
        return fail(out, log, kExitParse, {{"category", "invalid-input"}, {"message", e.what()}});
    } catch (const SolverError& e) {
        return fail(out, log, kExitSolver,
                    {{"category", "solver"}, {"message", e.what()}, {"time_level", e.time_level()}});
    } catch (const DomainError& e) {
        return fail(out, log, kExitSolver, {{"category", "domain"}, {"message", e.what()}});
    } catch (const std::exception& e) {
        return fail(out, log, kExitFailure, {{"category", "internal"}, {"message", e.what()}});
    }
}

}  // namespace pipl
