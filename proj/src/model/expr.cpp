#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "pipl/model.hpp"

namespace pipl {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Func };
enum class Fn { Sin, Cos, Exp, Ln, Tanh, Abs, Sqrt, Sign };

struct Expr::Node {
    Op op = Op::Const;
    double value = 0.0;
    Var var = Var::X;
    Fn fn = Fn::Sin;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

const char* fn_name(Fn f) {
    switch (f) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Exp: return "exp";
    case Fn::Ln: return "ln";
    case Fn::Tanh: return "tanh";
    case Fn::Abs: return "abs";
    case Fn::Sqrt: return "sqrt";
    case Fn::Sign: return "sign";
    }
    return "?";
}

const char* var_name(Var v) {
    switch (v) {
    case Var::X: return "x";
    case Var::Y: return "y";
    case Var::T: return "t";
    case Var::U: return "u";
    }
    return "?";
}

NodePtr make_const(double v) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

NodePtr make_var(Var v) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Var;
    n->var = v;
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

NodePtr make_bin(Op op, NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) {
        double x = a->value, y = b->value;
        switch (op) {
        case Op::Add: return make_const(x + y);
        case Op::Sub: return make_const(x - y);
        case Op::Mul: return make_const(x * y);
        case Op::Div:
            if (y != 0.0) return make_const(x / y);
            break;
        case Op::Pow:
            if (x > 0.0 || std::floor(y) == y) return make_const(std::pow(x, y));
            break;
        default: break;
        }
    }
    switch (op) {
    case Op::Add:
        if (is_const(a, 0.0)) return b;
        if (is_const(b, 0.0)) return a;
        break;
    case Op::Sub:
        if (is_const(b, 0.0)) return a;
        break;
    case Op::Mul:
        if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
        if (is_const(a, 1.0)) return b;
        if (is_const(b, 1.0)) return a;
        break;
    case Op::Div:
        if (is_const(a, 0.0)) return make_const(0.0);
        if (is_const(b, 1.0)) return a;
        break;
    case Op::Pow:
        if (is_const(b, 0.0)) return make_const(1.0);
        if (is_const(b, 1.0)) return a;
        break;
    default: break;
    }
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr make_neg(NodePtr a) {
    if (a->op == Op::Const) return make_const(-a->value);
    if (a->op == Op::Neg) return a->a;
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Neg;
    n->a = std::move(a);
    return n;
}

NodePtr make_fn(Fn f, NodePtr a) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Func;
    n->fn = f;
    n->a = std::move(a);
    return n;
}

std::string point_text(const EvalPoint& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, " at (x=%.6g, y=%.6g, t=%.6g, u=%.6g)", p.x, p.y, p.t, p.u);
    return buf;
}

std::string node_str(const NodePtr& n, int parent_prec);

double eval_node(const NodePtr& n, const EvalPoint& p) {
    switch (n->op) {
    case Op::Const: return n->value;
    case Op::Var:
        switch (n->var) {
        case Var::X: return p.x;
        case Var::Y: return p.y;
        case Var::T: return p.t;
        case Var::U: return p.u;
        }
        return 0.0;
    case Op::Add: return eval_node(n->a, p) + eval_node(n->b, p);
    case Op::Sub: return eval_node(n->a, p) - eval_node(n->b, p);
    case Op::Mul: return eval_node(n->a, p) * eval_node(n->b, p);
    case Op::Div: {
        double d = eval_node(n->b, p);
        if (d == 0.0) throw DomainError("division by zero in '" + node_str(n, 0) + "'" + point_text(p));
        return eval_node(n->a, p) / d;
    }
    case Op::Pow: {
        double base = eval_node(n->a, p);
        double e = eval_node(n->b, p);
        if (base < 0.0 && std::floor(e) != e)
            throw DomainError("non-integer power of negative base in '" + node_str(n, 0) + "'" +
                              point_text(p));
        if (base == 0.0 && e < 0.0)
            throw DomainError("negative power of zero in '" + node_str(n, 0) + "'" + point_text(p));
        return std::pow(base, e);
    }
    case Op::Neg: return -eval_node(n->a, p);
    case Op::Func: {
        double v = eval_node(n->a, p);
        switch (n->fn) {
        case Fn::Sin: return std::sin(v);
        case Fn::Cos: return std::cos(v);
        case Fn::Exp: return std::exp(v);
        case Fn::Ln:
            if (!(v > 0.0))
                throw DomainError("ln of nonpositive argument in '" + node_str(n, 0) + "'" +
                                  point_text(p));
            return std::log(v);
        case Fn::Tanh: return std::tanh(v);
        case Fn::Abs: return std::abs(v);
        case Fn::Sqrt:
            if (v < 0.0)
                throw DomainError("sqrt of negative argument in '" + node_str(n, 0) + "'" +
                                  point_text(p));
            return std::sqrt(v);
        case Fn::Sign: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
    }
    }
    return 0.0;
}

NodePtr diff_node(const NodePtr& n, Var v) {
    switch (n->op) {
    case Op::Const: return make_const(0.0);
    case Op::Var: return make_const(n->var == v ? 1.0 : 0.0);
    case Op::Add: return make_bin(Op::Add, diff_node(n->a, v), diff_node(n->b, v));
    case Op::Sub: return make_bin(Op::Sub, diff_node(n->a, v), diff_node(n->b, v));
    case Op::Neg: return make_neg(diff_node(n->a, v));
    case Op::Mul:
        return make_bin(Op::Add, make_bin(Op::Mul, diff_node(n->a, v), n->b),
                        make_bin(Op::Mul, n->a, diff_node(n->b, v)));
    case Op::Div: {
        auto da = diff_node(n->a, v);
        auto db = diff_node(n->b, v);
        auto first = make_bin(Op::Div, da, n->b);
        auto second = make_bin(Op::Div, make_bin(Op::Mul, n->a, db),
                               make_bin(Op::Pow, n->b, make_const(2.0)));
        return make_bin(Op::Sub, first, second);
    }
    case Op::Pow: {
        auto da = diff_node(n->a, v);
        if (n->b->op == Op::Const) {
            double c = n->b->value;
            return make_bin(Op::Mul,
                            make_bin(Op::Mul, make_const(c), make_bin(Op::Pow, n->a, make_const(c - 1.0))),
                            da);
        }
        auto db = diff_node(n->b, v);
        // d(a^b) = a^b (b' ln a + b a'/a)
        auto term = make_bin(Op::Add, make_bin(Op::Mul, db, make_fn(Fn::Ln, n->a)),
                             make_bin(Op::Div, make_bin(Op::Mul, n->b, da), n->a));
        return make_bin(Op::Mul, n, term);
    }
    case Op::Func: {
        auto da = diff_node(n->a, v);
        if (is_const(da, 0.0)) return make_const(0.0);
        NodePtr outer;
        switch (n->fn) {
        case Fn::Sin: outer = make_fn(Fn::Cos, n->a); break;
        case Fn::Cos: outer = make_neg(make_fn(Fn::Sin, n->a)); break;
        case Fn::Exp: outer = n; break;
        case Fn::Ln: outer = make_bin(Op::Div, make_const(1.0), n->a); break;
        case Fn::Tanh:
            outer = make_bin(Op::Sub, make_const(1.0), make_bin(Op::Pow, n, make_const(2.0)));
            break;
        case Fn::Abs: outer = make_fn(Fn::Sign, n->a); break;
        case Fn::Sqrt: outer = make_bin(Op::Div, make_const(0.5), n); break;
        case Fn::Sign: return make_const(0.0);
        }
        return make_bin(Op::Mul, outer, da);
    }
    }
    return make_const(0.0);
}

bool depends(const NodePtr& n, Var v) {
    if (!n) return false;
    if (n->op == Op::Var) return n->var == v;
    return depends(n->a, v) || depends(n->b, v);
}

int precedence(Op op) {
    switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
    }
}

std::string number_str(double v) {
    if (v == std::numbers::pi) return "pi";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int digits = 1; digits <= 17; ++digits) {
        char tmp[32];
        std::snprintf(tmp, sizeof tmp, "%.*g", digits, v);
        if (std::strtod(tmp, nullptr) == v) return tmp;
    }
    return buf;
}

std::string node_str(const NodePtr& n, int parent_prec) {
    std::string s;
    int prec = precedence(n->op);
    switch (n->op) {
    case Op::Const:
        s = number_str(n->value);
        if (n->value < 0.0) prec = 3;
        break;
    case Op::Var: s = var_name(n->var); break;
    case Op::Add: s = node_str(n->a, 1) + " + " + node_str(n->b, 2); break;
    case Op::Sub: s = node_str(n->a, 1) + " - " + node_str(n->b, 2); break;
    case Op::Mul: s = node_str(n->a, 2) + "*" + node_str(n->b, 3); break;
    case Op::Div: s = node_str(n->a, 2) + "/" + node_str(n->b, 3); break;
    case Op::Neg: s = "-" + node_str(n->a, 3); break;
    case Op::Pow: s = node_str(n->a, 5) + "^" + node_str(n->b, 4); break;
    case Op::Func: s = std::string(fn_name(n->fn)) + "(" + node_str(n->a, 0) + ")"; break;
    }
    if (prec < parent_prec) return "(" + s + ")";
    return s;
}

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    NodePtr parse() {
        auto e = expression();
        skip();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expression() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = make_bin(Op::Add, lhs, term());
            else if (accept('-')) lhs = make_bin(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make_bin(Op::Mul, lhs, unary());
            else if (accept('/')) lhs = make_bin(Op::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make_neg(unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (accept('^')) return make_bin(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("expected expression");
        char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        if (accept('(')) {
            auto e = expression();
            if (!accept(')')) fail("expected ')'");
            return e;
        }
        fail("expected expression");
    }

    NodePtr number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.'))
            ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        std::string tok(s_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) {
            pos_ = start;
            fail("malformed number");
        }
        return make_const(v);
    }

    NodePtr identifier() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string id(s_.substr(start, pos_ - start));
        if (id == "x") return make_var(Var::X);
        if (id == "y") return make_var(Var::Y);
        if (id == "t") return make_var(Var::T);
        if (id == "u") return make_var(Var::U);
        if (id == "pi") return make_const(std::numbers::pi);
        static const std::pair<const char*, Fn> fns[] = {
            {"sin", Fn::Sin},   {"cos", Fn::Cos}, {"exp", Fn::Exp},   {"ln", Fn::Ln},
            {"tanh", Fn::Tanh}, {"abs", Fn::Abs}, {"sqrt", Fn::Sqrt},
        };
        for (const auto& [name, fn] : fns) {
            if (id == name) {
                if (!accept('(')) fail("expected '(' after " + id);
                auto arg = expression();
                if (!accept(')')) fail("expected ')'");
                return make_fn(fn, arg);
            }
        }
        pos_ = start;
        fail("unknown identifier '" + id + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expr::Expr() : node_(make_const(0.0)) {}

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).parse()); }
Expr Expr::constant(double value) { return Expr(make_const(value)); }
Expr Expr::variable(Var v) { return Expr(make_var(v)); }

double Expr::eval(const EvalPoint& p) const {
    double v = eval_node(node_, p);
    if (!std::isfinite(v)) throw DomainError("non-finite value of '" + str() + "'" + point_text(p));
    return v;
}

Expr Expr::derivative(Var v) const { return Expr(diff_node(node_, v)); }
bool Expr::depends_on(Var v) const { return depends(node_, v); }

bool Expr::is_constant(double* value) const {
    if (node_->op != Op::Const) return false;
    if (value) *value = node_->value;
    return true;
}

std::string Expr::str() const { return node_str(node_, 0); }

Expr operator+(const Expr& a, const Expr& b) { return Expr(make_bin(Op::Add, a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make_bin(Op::Sub, a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(make_bin(Op::Mul, a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make_bin(Op::Div, a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Expr(make_neg(a.node_)); }
Expr pow(const Expr& a, const Expr& b) { return Expr(make_bin(Op::Pow, a.node_, b.node_)); }

}  // namespace pipl
