#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pipl/grid.hpp"

namespace pipl {

enum class Var { X, Y, T, U };

struct EvalPoint {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
    double u = 0.0;
};

/// Immutable expression tree over x, y, t, u with exact symbolic differentiation.
///
/// Grammar: infix `+ - * / ^` (right-associative power), unary minus, calls
/// sin cos exp ln tanh abs sqrt, variables x y t u, constant pi.
class Expr {
public:
    struct Node;

    Expr();  ///< constant zero

    static Expr parse(std::string_view text);
    static Expr constant(double value);
    static Expr variable(Var v);

    /// Throws DomainError naming the operator and the evaluation point.
    double eval(const EvalPoint& p) const;
    Expr derivative(Var v) const;
    bool depends_on(Var v) const;
    bool is_constant(double* value = nullptr) const;
    std::string str() const;

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    friend Expr pow(const Expr& a, const Expr& b);

    const std::shared_ptr<const Node>& node() const { return node_; }

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Symmetric matrix field gamma(x, y, t) with ellipticity constant rho0.
class DiffusionTensor {
public:
    DiffusionTensor() : DiffusionTensor(identity()) {}
    DiffusionTensor(Expr g11, Expr g12, Expr g22, double rho0);
    /// Scalar diffusion g(x, y, t) * I.
    static DiffusionTensor scalar(Expr g, double rho0);
    static DiffusionTensor identity();

    /// (g11, g12, g22) at a point.
    std::array<double, 3> at(Point x, double t) const;
    double rho0() const { return rho0_; }
    bool is_identity() const { return identity_; }
    bool time_dependent() const;
    const Expr& entry(int i, int j) const;

    /// Throws InvalidInput when a sampled eigenvalue leaves [rho0, 1/rho0].
    void check_ellipticity(const SpaceTimeGrid& grid) const;

private:
    Expr g11_, g12_, g22_;
    double rho0_ = 0.5;
    bool identity_ = false;
};

enum class NonlinearityClass { A_T, B_T, AdmissibleAnalytic, LinearPotential };

std::string to_string(NonlinearityClass c);
NonlinearityClass nonlinearity_class_from_string(const std::string& name);

/// Nonlinearity b(x, t, u) of the equation u_t - div(gamma grad u) + b = 0.
///
/// For class B_T the expression switches from `expr` (on [0, switch_time)) to `tail`
/// (on [switch_time, T]).
class Nonlinearity {
public:
    Nonlinearity();  ///< b = 0
    explicit Nonlinearity(Expr expr, NonlinearityClass cls = NonlinearityClass::A_T,
                          int cached_order = 8);
    static Nonlinearity glued(Expr head, Expr tail, double switch_time, int cached_order = 8);

    /// Construction followed by the class gate on the grid nodes.
    static Nonlinearity checked(Expr expr, NonlinearityClass cls, const SpaceTimeGrid& grid);

    /// d^k b / du^k at (x, t, u).
    double evaluate(Point x, double t, double u, int k = 0) const;
    const Expr& expr() const { return expr_; }
    const std::optional<Expr>& tail() const { return tail_; }
    double switch_time() const { return switch_time_; }
    NonlinearityClass cls() const { return cls_; }
    /// True when the expression does not contain u (so b is a pure source) or is zero.
    bool is_zero() const;
    /// True when d^2 b/du^2 is identically zero symbolically.
    bool is_linear() const;

    /// Class gate: admissible-analytic and the B_T tail must vanish at u = 0 on every node.
    void validate(const SpaceTimeGrid& grid) const;

private:
    const Expr& derivative_at_time(double t, int k) const;
    Expr derivative_slow(const Expr& base, int k) const;

    Expr expr_;
    std::optional<Expr> tail_;
    double switch_time_ = 0.0;
    NonlinearityClass cls_ = NonlinearityClass::A_T;
    std::vector<Expr> head_derivs_;
    std::vector<Expr> tail_derivs_;
};

/// Base point and coefficient fields d^k b(x, t, ubase(x, t)) for k = 0..M.
struct TaylorTable {
    Field base;
    std::vector<Field> coefficients;
};

TaylorTable taylor_table(const Nonlinearity& nl, const Field& base, int order);

struct GrowthReport {
    bool satisfies = true;  ///< heuristic when true; a sampled violation when false
    std::vector<std::pair<double, double>> curve;  ///< (y, sup_x,t  a_y / sqrt(ln y))
    double tail_max = 0.0;
    double middle_max = 0.0;
};

/// Samples sup over the grid nodes of d a / d y divided by sqrt(ln y) on log-spaced y in [e, y_max].
GrowthReport check_growth(const Nonlinearity& nl, const SpaceTimeGrid& grid, double y_max,
                          int samples);

inline constexpr double kQuotientSwitch = 1e-8;

/// Frozen potential q_z = (b(z) - b(0)) / z, continued across z = 0 by the linear
/// blend towards d b/du (., 0) below kQuotientSwitch.
Field freeze_quotient(const Nonlinearity& nl, const Field& z);
/// Source -b(x, t, 0); zero for admissible nonlinearities.
Field zero_level_source(const Nonlinearity& nl, const SpaceTimeGrid& grid);

}  // namespace pipl
