#include <cmath>
#include <sstream>

#include "detail.hpp"
#include "pipl/recon.hpp"

namespace pipl {

namespace {

using cd = std::complex<double>;

Field derivative_at_zero(const Nonlinearity& nl, const SpaceTimeGrid& g, int k) {
    Field f = Field::on_q(g);
    for (int l = 0; l < g.time_levels(); ++l)
        for (int n = 0; n < g.space_nodes(); ++n) f.at(l, n) = nl.evaluate(g.coord(n), g.time(l), 0.0, k);
    return f;
}

Field boundary_part(const ComplexField& v, bool imag) {
    const auto& g = v.grid();
    Field f = Field::on_q(g);
    auto bn = g.boundary_nodes();
    for (int k = 0; k < g.time_levels(); ++k)
        for (int b : bn) f.at(k, b) = imag ? v.at(k, b).imag() : v.at(k, b).real();
    return f;
}

}  // namespace

std::string to_string(TaylorMethod m) { return m == TaylorMethod::Division ? "division" : "weighted-ls"; }

PositiveSolution positive_solution(const SpaceTimeGrid& grid, const DiffusionTensor& gamma, const Field& q,
                                   const Field& f, const SolverSettings& settings) {
    Field fn = dirichlet_nodal(f, grid);
    for (double v : fn.values())
        if (v < 0.0) throw InvalidInput("positive solution needs nonnegative boundary data");
    auto rep = solve_linear(grid, gamma, q, fn, Field{}, Field{}, settings);
    PositiveSolution out;
    out.solution = std::move(rep.solution);
    out.min_interior = std::numeric_limits<double>::infinity();
    auto inner = grid.interior_nodes();
    for (int k = 1; k < grid.time_levels(); ++k)
        for (int n : inner)
            if (out.solution.at(k, n) < out.min_interior) {
                out.min_interior = out.solution.at(k, n);
                out.min_level = k;
                out.min_node = n;
            }
    if (!(out.min_interior > 0.0)) {
        std::ostringstream os;
        os << "solution is not positive: min " << out.min_interior << " at level " << out.min_level << ", node "
           << out.min_node;
        throw DomainError(os.str());
    }
    return out;
}

ReconstructionResult recover_taylor(const SpaceTimeGrid& grid, const Nonlinearity& truth,
                                    const Nonlinearity& reference, const TaylorOptions& opt,
                                    const Field* truth_difference) {
    const int M = opt.order;
    if (M < 2 || M > 4) throw InvalidInput("Taylor recovery order must be between 2 and 4");
    if (!(opt.eps > 0.0)) throw InvalidInput("quotient amplitude must be positive");
    for (const auto* nl : {&truth, &reference})
        if (derivative_at_zero(*nl, grid, 0).max_abs() != 0.0)
            throw InvalidInput("Taylor recovery about the zero state needs b(x,t,0) = 0");
    const Field q = derivative_at_zero(reference, grid, 1);
    const auto gamma = DiffusionTensor::identity();

    // positive auxiliary solutions v_2..v_M
    Field fpos = ramped_probe(grid, [](Point, double) { return 1.0; }, opt.ramp_time * grid.horizon());
    auto pos = positive_solution(grid, gamma, q, fpos, opt.settings);
    Field prod = Field::on_q(grid, 1.0);
    for (int l = 2; l <= M; ++l)
        for (std::size_t i = 0; i < prod.values().size(); ++i) prod.values()[i] *= pos.solution.values()[i];

    LinearizationModel mt, mr;
    mt.grid = mr.grid = &grid;
    mt.nl = truth;
    mr.nl = reference;
    mt.settings = mr.settings = opt.settings;
    mt.jobs = mr.jobs = opt.jobs;

    auto lattice = probe_lattice(grid, opt.rho, opt.max_mode, DataMode::Full);
    auto basis = detail::cosine_basis(grid, opt.modes_x, opt.modes_t);
    const auto w = detail::q_weights(grid);
    const auto entries = BoundaryPortion::full().resolve(grid);
    const auto ws = detail::sigma_weights(grid, entries);
    const std::size_t rows = lattice.size(), cols = basis.size();
    Eigen::MatrixXd A(2 * rows, cols);
    Eigen::VectorXd b(2 * rows);
    const bool division = opt.method == TaylorMethod::Division;

    for (std::size_t j = 0; j < rows; ++j) {
        auto fp = lattice[j];
        auto bp = fp;
        bp.direction = Direction::Backward;
        auto v1 = materialize(build(grid, q, fp, opt.settings));
        auto v0 = materialize(build(grid, q, bp, opt.settings));
        // order-M response to (f1, v_2 data, ..., v_M data), split into real and imaginary f1
        ComplexField W = ComplexField::on_q(grid);
        for (bool im : {false, true}) {
            Field f1 = boundary_part(v1, im);
            double s = f1.max_abs();
            if (s == 0.0) continue;
            f1 *= 1.0 / s;
            ProbeFamily fam;
            fam.probes.push_back(f1);
            for (int l = 2; l <= M; ++l) fam.probes.push_back(fpos);
            std::vector<int> sel;
            for (int l = 0; l < M; ++l) sel.push_back(l);
            Field d = mixed_quotient(mt, fam, sel, opt.eps);
            d -= mixed_quotient(mr, fam, sel, opt.eps);
            for (std::size_t i = 0; i < d.values().size(); ++i)
                W.values()[i] += (im ? cd(0.0, s) : cd(s, 0.0)) * d.values()[i];
        }
        auto dW = normal_derivative(W, entries);
        cd B = 0.0;
        const int E = static_cast<int>(entries.size());
        for (int k = 0; k < grid.time_levels(); ++k)
            for (int e = 0; e < E; ++e)
                B += ws[static_cast<std::size_t>(k) * E + e] * v0.at(k, entries[e].node) * dW.at(k, e);
        auto K = ComplexField::on_q(grid);
        double kn2 = 0.0;
        for (std::size_t i = 0; i < K.values().size(); ++i) {
            K.values()[i] = v1.values()[i] * v0.values()[i] * (division ? 1.0 : prod.values()[i]);
            kn2 += w[i] * std::norm(K.values()[i]);
        }
        double kn = kn2 > 0.0 ? std::sqrt(kn2) : 1.0;
        for (std::size_t m = 0; m < cols; ++m) {
            cd a = 0.0;
            const auto& phi = basis[m].values();
            for (std::size_t i = 0; i < phi.size(); ++i) a += w[i] * phi[i] * K.values()[i];
            A(2 * j, m) = a.real() / kn;
            A(2 * j + 1, m) = a.imag() / kn;
        }
        b(2 * j) = B.real() / kn;
        b(2 * j + 1) = B.imag() / kn;
    }

    ReconstructionResult res;
    double alpha_abs = 0.0;
    Eigen::VectorXd c = b.norm() == 0.0 ? Eigen::VectorXd::Zero(cols) : detail::tikhonov(A, b, opt.alpha, &alpha_abs);
    res.regularization = {"tikhonov", alpha_abs, to_string(opt.method) + ", fixed relative weight"};
    res.residuals.push_back(b.norm() > 0.0 ? (A * c - b).norm() / b.norm() : 0.0);
    Field F = Field::on_q(grid);
    for (std::size_t m = 0; m < cols; ++m) F.axpy(c(m), basis[m]);
    if (division) {
        const double pmax = prod.max_abs();
        res.recovered = Field::on_q(grid);
        for (std::size_t i = 0; i < F.values().size(); ++i) {
            if (prod.values()[i] > opt.mask * pmax) {
                res.recovered.values()[i] = F.values()[i] / prod.values()[i];
            } else {
                res.masked.push_back(static_cast<int>(i));
            }
        }
        if (!res.masked.empty())
            res.notes.push_back(std::to_string(res.masked.size()) + " nodes masked where the positive product is small");
    } else {
        res.recovered = std::move(F);
    }
    if (truth_difference) {
        res.has_truth = true;
        Field t = *truth_difference;
        for (int i : res.masked) t.values()[static_cast<std::size_t>(i)] = 0.0;
        res.truth_error = relative_error(res.recovered, t);
    }
    return res;
}

}  // namespace pipl
