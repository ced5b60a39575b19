#include <cmath>
#include <limits>

#include "pipl/model.hpp"

namespace pipl {

namespace {

EvalPoint at_point(Point x, double t, double u = 0.0) { return {x[0], x[1], t, u}; }

}  // namespace

DiffusionTensor::DiffusionTensor(Expr g11, Expr g12, Expr g22, double rho0)
    : g11_(std::move(g11)), g12_(std::move(g12)), g22_(std::move(g22)), rho0_(rho0) {
    if (!(rho0 > 0.0 && rho0 < 1.0)) throw InvalidInput("ellipticity constant must lie in (0, 1)");
    for (const Expr* e : {&g11_, &g12_, &g22_})
        if (e->depends_on(Var::U)) throw InvalidInput("diffusion tensor may not depend on u");
    double a, b, c;
    identity_ = g11_.is_constant(&a) && a == 1.0 && g12_.is_constant(&b) && b == 0.0 &&
                g22_.is_constant(&c) && c == 1.0;
}

DiffusionTensor DiffusionTensor::scalar(Expr g, double rho0) {
    return DiffusionTensor(g, Expr::constant(0.0), g, rho0);
}

DiffusionTensor DiffusionTensor::identity() {
    return DiffusionTensor(Expr::constant(1.0), Expr::constant(0.0), Expr::constant(1.0), 0.5);
}

std::array<double, 3> DiffusionTensor::at(Point x, double t) const {
    if (identity_) return {1.0, 0.0, 1.0};
    auto p = at_point(x, t);
    return {g11_.eval(p), g12_.eval(p), g22_.eval(p)};
}

bool DiffusionTensor::time_dependent() const {
    return g11_.depends_on(Var::T) || g12_.depends_on(Var::T) || g22_.depends_on(Var::T);
}

const Expr& DiffusionTensor::entry(int i, int j) const {
    if (i == 0 && j == 0) return g11_;
    if (i == 1 && j == 1) return g22_;
    return g12_;
}

void DiffusionTensor::check_ellipticity(const SpaceTimeGrid& grid) const {
    const double tol = 1e-12;
    for (int k = 0; k < grid.time_levels(); ++k) {
        for (int n = 0; n < grid.space_nodes(); ++n) {
            auto [a, b, c] = at(grid.coord(n), grid.time(k));
            double lo, hi;
            if (grid.dim() == 1) {
                lo = hi = a;
            } else {
                double mean = 0.5 * (a + c);
                double r = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
                lo = mean - r;
                hi = mean + r;
            }
            if (lo < rho0_ - tol || hi > 1.0 / rho0_ + tol) {
                auto x = grid.coord(n);
                throw InvalidInput("diffusion tensor not elliptic with rho0 = " +
                                   std::to_string(rho0_) + " at (x=" + std::to_string(x[0]) +
                                   ", y=" + std::to_string(x[1]) +
                                   ", t=" + std::to_string(grid.time(k)) + ")");
            }
        }
        if (!time_dependent()) break;
    }
}

std::string to_string(NonlinearityClass c) {
    switch (c) {
    case NonlinearityClass::A_T: return "A_T";
    case NonlinearityClass::B_T: return "B_T";
    case NonlinearityClass::AdmissibleAnalytic: return "admissible-analytic";
    case NonlinearityClass::LinearPotential: return "linear-potential";
    }
    return "?";
}

NonlinearityClass nonlinearity_class_from_string(const std::string& name) {
    if (name == "A_T") return NonlinearityClass::A_T;
    if (name == "B_T") return NonlinearityClass::B_T;
    if (name == "admissible-analytic") return NonlinearityClass::AdmissibleAnalytic;
    if (name == "linear-potential") return NonlinearityClass::LinearPotential;
    throw InvalidInput("unknown nonlinearity class '" + name + "'");
}

namespace {

std::vector<Expr> derivative_chain(const Expr& e, int order) {
    std::vector<Expr> d{e};
    for (int k = 1; k <= order; ++k) d.push_back(d.back().derivative(Var::U));
    return d;
}

}  // namespace

Nonlinearity::Nonlinearity() : Nonlinearity(Expr::constant(0.0)) {}

Nonlinearity::Nonlinearity(Expr expr, NonlinearityClass cls, int cached_order)
    : expr_(std::move(expr)), cls_(cls) {
    if (cls == NonlinearityClass::B_T)
        throw InvalidInput("class B_T is built with Nonlinearity::glued");
    head_derivs_ = derivative_chain(expr_, cached_order);
}

Nonlinearity Nonlinearity::glued(Expr head, Expr tail, double switch_time, int cached_order) {
    Nonlinearity nl(std::move(head), NonlinearityClass::A_T, cached_order);
    nl.cls_ = NonlinearityClass::B_T;
    nl.tail_ = std::move(tail);
    nl.switch_time_ = switch_time;
    nl.tail_derivs_ = derivative_chain(*nl.tail_, cached_order);
    return nl;
}

Nonlinearity Nonlinearity::checked(Expr expr, NonlinearityClass cls, const SpaceTimeGrid& grid) {
    Nonlinearity nl(std::move(expr), cls);
    nl.validate(grid);
    return nl;
}

const Expr& Nonlinearity::derivative_at_time(double t, int k) const {
    bool use_tail = tail_ && t >= switch_time_;
    return use_tail ? tail_derivs_[k] : head_derivs_[k];
}

Expr Nonlinearity::derivative_slow(const Expr& base, int k) const {
    Expr e = base;
    for (int i = 0; i < k; ++i) e = e.derivative(Var::U);
    return e;
}

double Nonlinearity::evaluate(Point x, double t, double u, int k) const {
    if (k < 0) throw InvalidInput("derivative order must be nonnegative");
    auto p = at_point(x, t, u);
    if (k < static_cast<int>(head_derivs_.size())) return derivative_at_time(t, k).eval(p);
    bool use_tail = tail_ && t >= switch_time_;
    return derivative_slow(use_tail ? *tail_ : expr_, k).eval(p);
}

bool Nonlinearity::is_zero() const {
    double v;
    bool head = expr_.is_constant(&v) && v == 0.0;
    if (!tail_) return head;
    double w;
    return head && tail_->is_constant(&w) && w == 0.0;
}

bool Nonlinearity::is_linear() const {
    auto second_zero = [](const Expr& e) {
        double v;
        return e.derivative(Var::U).derivative(Var::U).is_constant(&v) && v == 0.0;
    };
    return second_zero(expr_) && (!tail_ || second_zero(*tail_));
}

void Nonlinearity::validate(const SpaceTimeGrid& grid) const {
    const double tol = 1e-14;
    for (int k = 0; k < grid.time_levels(); ++k) {
        double t = grid.time(k);
        for (int n = 0; n < grid.space_nodes(); ++n) {
            Point x = grid.coord(n);
            if (cls_ == NonlinearityClass::AdmissibleAnalytic) {
                double b0 = evaluate(x, t, 0.0);
                if (std::abs(b0) > tol)
                    throw InvalidInput("admissible-analytic nonlinearity must vanish at u = 0; b = " +
                                       std::to_string(b0) + " at (x=" + std::to_string(x[0]) +
                                       ", y=" + std::to_string(x[1]) + ", t=" + std::to_string(t) + ")");
            }
            if (cls_ == NonlinearityClass::B_T && t >= switch_time_) {
                double c0 = tail_->eval(at_point(x, t, 0.0));
                if (std::abs(c0) > tol)
                    throw InvalidInput("B_T tail must vanish at u = 0 at t = " + std::to_string(t));
            }
            if (cls_ == NonlinearityClass::LinearPotential) {
                for (double u : {-1.0, 0.5, 2.0}) {
                    if (std::abs(evaluate(x, t, u, 2)) > tol)
                        throw InvalidInput("linear-potential nonlinearity has nonzero d2b/du2");
                    if (std::abs(evaluate(x, t, 0.0)) > tol)
                        throw InvalidInput("linear-potential nonlinearity must vanish at u = 0");
                }
            }
        }
    }
}

TaylorTable taylor_table(const Nonlinearity& nl, const Field& base, int order) {
    if (base.support() != Support::Interior) throw InvalidInput("Taylor base must be a field on Q");
    TaylorTable table;
    table.base = base;
    const auto& grid = base.grid();
    for (int m = 0; m <= order; ++m) {
        Field c = Field::on_q(grid);
        for (int k = 0; k < grid.time_levels(); ++k)
            for (int n = 0; n < grid.space_nodes(); ++n)
                c.at(k, n) = nl.evaluate(grid.coord(n), grid.time(k), base.at(k, n), m);
        table.coefficients.push_back(std::move(c));
    }
    return table;
}

GrowthReport check_growth(const Nonlinearity& nl, const SpaceTimeGrid& grid, double y_max,
                          int samples) {
    if (!(y_max > std::exp(1.0))) throw InvalidInput("y_max must exceed e");
    if (samples < 6) throw InvalidInput("growth check needs at least 6 samples");
    // Subsample the nodes so the check stays cheap on large grids.
    int sx = std::max(1, grid.space_nodes() / 16);
    int st = std::max(1, grid.time_levels() / 8);
    GrowthReport rep;
    double l0 = 1.0, l1 = std::log(y_max);
    for (int s = 0; s < samples; ++s) {
        double y = std::exp(l0 + (l1 - l0) * s / (samples - 1));
        double sup = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < grid.time_levels(); k += st)
            for (int n = 0; n < grid.space_nodes(); n += sx)
                sup = std::max(sup, nl.evaluate(grid.coord(n), grid.time(k), y, 1));
        rep.curve.emplace_back(y, sup / std::sqrt(std::log(y)));
    }
    int third = samples / 3;
    rep.middle_max = -std::numeric_limits<double>::infinity();
    rep.tail_max = -std::numeric_limits<double>::infinity();
    for (int s = third; s < 2 * third; ++s) rep.middle_max = std::max(rep.middle_max, rep.curve[s].second);
    for (int s = samples - third; s < samples; ++s) rep.tail_max = std::max(rep.tail_max, rep.curve[s].second);
    const double slack = 0.02;
    rep.satisfies = !(rep.tail_max > 1e-12 && rep.tail_max >= (1.0 - slack) * rep.middle_max);
    return rep;
}

Field freeze_quotient(const Nonlinearity& nl, const Field& z) {
    if (z.support() != Support::Interior) throw InvalidInput("freeze_quotient needs a field on Q");
    const auto& grid = z.grid();
    Field q = Field::on_q(grid);
    const double th = kQuotientSwitch;
    for (int k = 0; k < grid.time_levels(); ++k) {
        double t = grid.time(k);
        for (int n = 0; n < grid.space_nodes(); ++n) {
            Point x = grid.coord(n);
            double s = z.at(k, n);
            double b0 = nl.evaluate(x, t, 0.0);
            double v;
            if (std::abs(s) > th) {
                v = (nl.evaluate(x, t, s) - b0) / s;
            } else {
                double sg = s < 0.0 ? -1.0 : 1.0;
                double edge = (nl.evaluate(x, t, sg * th) - b0) / (sg * th);
                double d0 = nl.evaluate(x, t, 0.0, 1);
                v = d0 + (std::abs(s) / th) * (edge - d0);
            }
            if (!std::isfinite(v))
                throw DomainError("non-finite frozen potential at node " + std::to_string(n) +
                                  ", level " + std::to_string(k));
            q.at(k, n) = v;
        }
    }
    return q;
}

Field zero_level_source(const Nonlinearity& nl, const SpaceTimeGrid& grid) {
    Field h = Field::on_q(grid);
    for (int k = 0; k < grid.time_levels(); ++k)
        for (int n = 0; n < grid.space_nodes(); ++n)
            h.at(k, n) = -nl.evaluate(grid.coord(n), grid.time(k), 0.0);
    return h;
}

}  // namespace pipl
