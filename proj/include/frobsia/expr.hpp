#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "frobsia/common.hpp"
#include "frobsia/jet.hpp"

namespace frobsia {

/// Parsed scalar field on R^n. Immutable value type; copies share the node
/// arena. Coordinates are 1-based in the surface syntax ("x1".."xn") and
/// 0-based in the tree.
///
/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := base ('^' integer)?
///   base   := number | 'x' integer | func '(' expr ')' | '(' expr ')' | '-' base
///   func   := 'exp' | 'log' | 'sqrt' | 'sin' | 'cos'
class ScalarFieldExpr {
public:
    enum class Op : std::uint8_t { Const, Coord, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt, Sin, Cos };

    struct Node {
        Op op = Op::Const;
        int a = -1, b = -1; // child node indices
        double value = 0.0; // Const payload
        int coord = 0;      // Coord payload (0-based)
        long exponent = 0;  // Pow payload
    };

    ScalarFieldExpr() = default;

    static ScalarFieldExpr parse(std::string_view text, int dim);

    static ScalarFieldExpr constant(int dim, double v) {
        Builder b(dim);
        return b.finish(b.constant(v));
    }
    static ScalarFieldExpr coordinate(int dim, int coord0) {
        Builder b(dim);
        return b.finish(b.coordinate(coord0));
    }
    static ScalarFieldExpr zero(int dim) { return constant(dim, 0.0); }

    int dim() const { return dim_; }
    bool empty() const { return !nodes_; }
    bool is_zero_literal() const {
        return nodes_ && (*nodes_)[static_cast<std::size_t>(root_)].op == Op::Const &&
               (*nodes_)[static_cast<std::size_t>(root_)].value == 0.0;
    }

    /// Evaluates with any arithmetic value type; T = double for plain values,
    /// T = Jet for derivatives. `vars[c]` is the value of coordinate c.
    template <class T>
    T eval(const std::vector<T>& vars) const {
        if (empty()) throw eval_error("evaluating an empty expression");
        return eval_node<T>(root_, vars);
    }

    double value_at(const Vec& x) const { return eval<double>(x); }

    /// Jet of the field at x, truncated at `order`.
    Jet jet_at(const Vec& x, int order) const {
        auto space = JetSpace::get(dim_, order);
        std::vector<Jet> vars;
        vars.reserve(x.size());
        for (int c = 0; c < dim_; ++c) vars.push_back(Jet::coordinate(space, c, x[static_cast<std::size_t>(c)]));
        Jet out = eval<Jet>(vars);
        if (!out.all_finite()) throw eval_error("field evaluation produced a non-finite jet");
        return out;
    }

    /// Exact symbolic partial derivative with respect to coordinate c (0-based),
    /// with constant folding so emitted component strings stay readable.
    ScalarFieldExpr derivative(int c) const;

    /// Prints a string that re-parses to the identical tree (up to whitespace).
    std::string to_string() const;

    // --- arithmetic on expressions (builds composed trees) ----------------
    friend ScalarFieldExpr operator+(const ScalarFieldExpr& a, const ScalarFieldExpr& b) { return combine(Op::Add, a, b); }
    friend ScalarFieldExpr operator-(const ScalarFieldExpr& a, const ScalarFieldExpr& b) { return combine(Op::Sub, a, b); }
    friend ScalarFieldExpr operator*(const ScalarFieldExpr& a, const ScalarFieldExpr& b) { return combine(Op::Mul, a, b); }
    friend ScalarFieldExpr operator*(double s, const ScalarFieldExpr& a) {
        return combine(Op::Mul, constant(a.dim(), s), a);
    }

    struct Builder {
        explicit Builder(int dim) : dim(dim), nodes(std::make_shared<std::vector<Node>>()) {}
        int add(Node n) {
            nodes->push_back(n);
            return static_cast<int>(nodes->size()) - 1;
        }
        int constant(double v) {
            Node n;
            n.op = Op::Const;
            n.value = v;
            return add(n);
        }
        int coordinate(int c) {
            Node n;
            n.op = Op::Coord;
            n.coord = c;
            return add(n);
        }
        int unary(Op op, int a) {
            Node n;
            n.op = op;
            n.a = a;
            return add(n);
        }
        int binary(Op op, int a, int b) {
            Node n;
            n.op = op;
            n.a = a;
            n.b = b;
            return add(n);
        }
        int power(int a, long e) {
            Node n;
            n.op = Op::Pow;
            n.a = a;
            n.exponent = e;
            return add(n);
        }
        ScalarFieldExpr finish(int root) const {
            ScalarFieldExpr e;
            e.dim_ = dim;
            e.nodes_ = nodes;
            e.root_ = root;
            return e;
        }
        int dim;
        std::shared_ptr<std::vector<Node>> nodes;
    };

private:
    const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }

    template <class T>
    T eval_node(int i, const std::vector<T>& vars) const {
        const Node& n = node(i);
        switch (n.op) {
            case Op::Const:
                if constexpr (std::is_same_v<T, double>)
                    return n.value;
                else
                    return T::constant(vars[0].space_ptr(), n.value);
            case Op::Coord: return vars[static_cast<std::size_t>(n.coord)];
            case Op::Add: return eval_node<T>(n.a, vars) + eval_node<T>(n.b, vars);
            case Op::Sub: return eval_node<T>(n.a, vars) - eval_node<T>(n.b, vars);
            case Op::Mul: return eval_node<T>(n.a, vars) * eval_node<T>(n.b, vars);
            case Op::Div: {
                T num = eval_node<T>(n.a, vars);
                T den = eval_node<T>(n.b, vars);
                if constexpr (std::is_same_v<T, double>) {
                    if (den == 0.0) throw eval_error("division by zero while evaluating a field");
                    return num / den;
                } else {
                    return num / den;
                }
            }
            case Op::Pow: {
                T base = eval_node<T>(n.a, vars);
                if constexpr (std::is_same_v<T, double>) {
                    if (n.exponent < 0 && base == 0.0) throw eval_error("division by zero while evaluating a field");
                    double acc = 1.0, b = base;
                    long e = n.exponent < 0 ? -n.exponent : n.exponent;
                    while (e) {
                        if (e & 1l) acc *= b;
                        b *= b;
                        e >>= 1;
                    }
                    return n.exponent < 0 ? 1.0 / acc : acc;
                } else {
                    return pow_int(base, n.exponent);
                }
            }
            case Op::Neg: return -eval_node<T>(n.a, vars);
            case Op::Exp: return exp(eval_node<T>(n.a, vars));
            case Op::Log: {
                T arg = eval_node<T>(n.a, vars);
                if constexpr (std::is_same_v<T, double>) {
                    if (!(arg > 0.0)) throw eval_error("log of a non-positive argument");
                    return std::log(arg);
                } else {
                    return log(arg);
                }
            }
            case Op::Sqrt: {
                T arg = eval_node<T>(n.a, vars);
                if constexpr (std::is_same_v<T, double>) {
                    if (!(arg > 0.0)) throw eval_error("sqrt of a non-positive argument");
                    return std::sqrt(arg);
                } else {
                    return sqrt(arg);
                }
            }
            case Op::Sin:
                if constexpr (std::is_same_v<T, double>)
                    return std::sin(eval_node<T>(n.a, vars));
                else
                    return sin(eval_node<T>(n.a, vars));
            case Op::Cos:
                if constexpr (std::is_same_v<T, double>)
                    return std::cos(eval_node<T>(n.a, vars));
                else
                    return cos(eval_node<T>(n.a, vars));
        }
        throw eval_error("corrupt expression node");
    }

    static ScalarFieldExpr combine(Op op, const ScalarFieldExpr& a, const ScalarFieldExpr& b);

    int copy_into(Builder& b) const { return copy_node(b, root_); }
    int copy_node(Builder& b, int i) const {
        Node n = node(i);
        if (n.a >= 0) n.a = copy_node(b, n.a);
        if (n.b >= 0) n.b = copy_node(b, n.b);
        return b.add(n);
    }

    int derive_node(Builder& b, int src, int copied_base) const;
    static int simplify_binary(Builder& b, Op op, int a, int bnode);

    void print_node(std::string& out, int i, int parent_prec) const;

    int dim_ = 0;
    std::shared_ptr<const std::vector<Node>> nodes_;
    int root_ = -1;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {
class ExprParser {
public:
    ExprParser(std::string_view text, ScalarFieldExpr::Builder& b) : text_(text), b_(b) {}

    int parse() {
        int root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw parse_error("unexpected trailing input", pos_);
        return root;
    }

private:
    using Op = ScalarFieldExpr::Op;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (consume('+'))
                lhs = b_.binary(Op::Add, lhs, parse_term());
            else if (consume('-'))
                lhs = b_.binary(Op::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        for (;;) {
            if (consume('*'))
                lhs = b_.binary(Op::Mul, lhs, parse_factor());
            else if (consume('/'))
                lhs = b_.binary(Op::Div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    int parse_factor() {
        int base = parse_base();
        if (consume('^')) return b_.power(base, parse_integer());
        return base;
    }

    int parse_base() {
        skip_ws();
        if (pos_ >= text_.size()) throw parse_error("unexpected end of input", pos_);
        char c = text_[pos_];
        if (c == '-') {
            ++pos_;
            return b_.unary(Op::Neg, parse_base());
        }
        if (c == '(') {
            ++pos_;
            int inner = parse_expr();
            if (!consume(')')) throw parse_error("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
        throw parse_error(std::string("unexpected character '") + c + "'", pos_);
    }

    int parse_number() {
        std::size_t start = pos_;
        double v = 0.0;
        auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (res.ec != std::errc()) throw parse_error("malformed number", start);
        pos_ = static_cast<std::size_t>(res.ptr - text_.data());
        return b_.constant(v);
    }

    long parse_integer() {
        skip_ws();
        std::size_t start = pos_;
        long v = 0;
        bool neg = false;
        if (pos_ < text_.size() && text_[pos_] == '-') {
            neg = true;
            ++pos_;
        }
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            throw parse_error("expected integer exponent", start);
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            v = v * 10 + (text_[pos_++] - '0');
        return neg ? -v : v;
    }

    int parse_name() {
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x") {
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
                throw parse_error("expected coordinate index after 'x'", pos_);
            long idx = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                idx = idx * 10 + (text_[pos_++] - '0');
            if (idx < 1 || idx > b_.dim)
                throw parse_error("coordinate index out of range for dimension " + std::to_string(b_.dim), start);
            return b_.coordinate(static_cast<int>(idx) - 1);
        }
        Op op;
        if (name == "exp")
            op = Op::Exp;
        else if (name == "log")
            op = Op::Log;
        else if (name == "sqrt")
            op = Op::Sqrt;
        else if (name == "sin")
            op = Op::Sin;
        else if (name == "cos")
            op = Op::Cos;
        else
            throw parse_error("unknown function '" + std::string(name) + "'", start);
        if (!consume('(')) throw parse_error("expected '(' after function name", pos_);
        int inner = parse_expr();
        if (!consume(')')) throw parse_error("expected ')'", pos_);
        return b_.unary(op, inner);
    }

    std::string_view text_;
    ScalarFieldExpr::Builder& b_;
    std::size_t pos_ = 0;
};
} // namespace detail

inline ScalarFieldExpr ScalarFieldExpr::parse(std::string_view text, int dim) {
    if (dim < 1 || dim > 9) throw schema_error("expression dimension must be in 1..9");
    Builder b(dim);
    detail::ExprParser p(text, b);
    return b.finish(p.parse());
}

inline ScalarFieldExpr ScalarFieldExpr::combine(Op op, const ScalarFieldExpr& a, const ScalarFieldExpr& b) {
    if (a.dim() != b.dim()) throw schema_error("combining expressions of different dimension");
    Builder out(a.dim());
    int ia = a.copy_into(out);
    int ib = b.copy_into(out);
    return out.finish(simplify_binary(out, op, ia, ib));
}

// Folds the handful of shapes that dominate machine-built components:
// constants, zero summands, unit factors.
inline int ScalarFieldExpr::simplify_binary(Builder& b, Op op, int ia, int ib) {
    auto& nodes = *b.nodes;
    auto is_const = [&](int i, double v) {
        return nodes[static_cast<std::size_t>(i)].op == Op::Const && nodes[static_cast<std::size_t>(i)].value == v;
    };
    bool ca = nodes[static_cast<std::size_t>(ia)].op == Op::Const;
    bool cb = nodes[static_cast<std::size_t>(ib)].op == Op::Const;
    if (ca && cb) {
        double va = nodes[static_cast<std::size_t>(ia)].value, vb = nodes[static_cast<std::size_t>(ib)].value;
        switch (op) {
            case Op::Add: return b.constant(va + vb);
            case Op::Sub: return b.constant(va - vb);
            case Op::Mul: return b.constant(va * vb);
            case Op::Div:
                if (vb != 0.0) return b.constant(va / vb);
                break;
            default: break;
        }
    }
    switch (op) {
        case Op::Add:
            if (is_const(ia, 0.0)) return ib;
            if (is_const(ib, 0.0)) return ia;
            break;
        case Op::Sub:
            if (is_const(ib, 0.0)) return ia;
            if (is_const(ia, 0.0)) return b.unary(Op::Neg, ib);
            break;
        case Op::Mul:
            if (is_const(ia, 0.0) || is_const(ib, 0.0)) return b.constant(0.0);
            if (is_const(ia, 1.0)) return ib;
            if (is_const(ib, 1.0)) return ia;
            break;
        case Op::Div:
            if (is_const(ia, 0.0)) return b.constant(0.0);
            if (is_const(ib, 1.0)) return ia;
            break;
        default: break;
    }
    return b.binary(op, ia, ib);
}

inline ScalarFieldExpr ScalarFieldExpr::derivative(int c) const {
    if (empty()) throw eval_error("differentiating an empty expression");
    Builder b(dim_);
    struct Walker {
        const ScalarFieldExpr& src;
        Builder& b;
        int c;
        // returns {copy-of-node, derivative-of-node}
        std::pair<int, int> walk(int i) {
            const Node& n = src.node(i);
            using O = Op;
            switch (n.op) {
                case O::Const: return {b.constant(n.value), b.constant(0.0)};
                case O::Coord: return {b.coordinate(n.coord), b.constant(n.coord == c ? 1.0 : 0.0)};
                case O::Add: {
                    auto [a, da] = walk(n.a);
                    auto [v, dv] = walk(n.b);
                    return {simplify_binary(b, O::Add, a, v), simplify_binary(b, O::Add, da, dv)};
                }
                case O::Sub: {
                    auto [a, da] = walk(n.a);
                    auto [v, dv] = walk(n.b);
                    return {simplify_binary(b, O::Sub, a, v), simplify_binary(b, O::Sub, da, dv)};
                }
                case O::Mul: {
                    auto [u, du] = walk(n.a);
                    auto [v, dv] = walk(n.b);
                    int t1 = simplify_binary(b, O::Mul, du, v);
                    int t2 = simplify_binary(b, O::Mul, u, dv);
                    return {simplify_binary(b, O::Mul, u, v), simplify_binary(b, O::Add, t1, t2)};
                }
                case O::Div: {
                    auto [u, du] = walk(n.a);
                    auto [v, dv] = walk(n.b);
                    int t1 = simplify_binary(b, O::Div, du, v);
                    int t2 = simplify_binary(b, O::Mul, u, dv);
                    int vv = simplify_binary(b, O::Mul, v, v);
                    int t3 = simplify_binary(b, O::Div, t2, vv);
                    return {simplify_binary(b, O::Div, u, v), simplify_binary(b, O::Sub, t1, t3)};
                }
                case O::Pow: {
                    auto [u, du] = walk(n.a);
                    int copy = b.power(u, n.exponent);
                    if (n.exponent == 0) return {copy, b.constant(0.0)};
                    int um1 = b.power(u, n.exponent - 1);
                    int coeff = simplify_binary(b, O::Mul, b.constant(static_cast<double>(n.exponent)), um1);
                    return {copy, simplify_binary(b, O::Mul, coeff, du)};
                }
                case O::Neg: {
                    auto [u, du] = walk(n.a);
                    return {b.unary(O::Neg, u), b.unary(O::Neg, du)};
                }
                case O::Exp: {
                    auto [u, du] = walk(n.a);
                    int copy = b.unary(O::Exp, u);
                    return {copy, simplify_binary(b, O::Mul, copy, du)};
                }
                case O::Log: {
                    auto [u, du] = walk(n.a);
                    return {b.unary(O::Log, u), simplify_binary(b, O::Div, du, u)};
                }
                case O::Sqrt: {
                    auto [u, du] = walk(n.a);
                    int copy = b.unary(O::Sqrt, u);
                    int denom = simplify_binary(b, O::Mul, b.constant(2.0), copy);
                    return {copy, simplify_binary(b, O::Div, du, denom)};
                }
                case O::Sin: {
                    auto [u, du] = walk(n.a);
                    return {b.unary(O::Sin, u), simplify_binary(b, O::Mul, b.unary(O::Cos, u), du)};
                }
                case O::Cos: {
                    auto [u, du] = walk(n.a);
                    int d = b.unary(O::Neg, simplify_binary(b, O::Mul, b.unary(O::Sin, u), du));
                    return {b.unary(O::Cos, u), d};
                }
            }
            throw eval_error("corrupt expression node");
        }
    };
    Walker w{*this, b, c};
    auto [copy, deriv] = w.walk(root_);
    (void)copy;
    return b.finish(deriv);
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

inline void ScalarFieldExpr::print_node(std::string& out, int i, int parent_prec) const {
    // precedence: 0 add/sub, 1 mul/div, 2 unary minus, 3 pow, 4 atom
    const Node& n = node(i);
    auto wrap = [&](int prec, auto&& body) {
        bool parens = prec < parent_prec;
        if (parens) out += '(';
        body();
        if (parens) out += ')';
    };
    switch (n.op) {
        case Op::Const: {
            char buf[32];
            double v = n.value;
            bool neg = std::signbit(v) && v != 0.0;
            if (neg) v = -v;
            auto res = std::to_chars(buf, buf + sizeof buf, v);
            std::string digits(buf, res.ptr);
            if (neg)
                wrap(2, [&] { out += '-'; out += digits; });
            else
                out += digits;
            break;
        }
        case Op::Coord:
            out += 'x';
            out += std::to_string(n.coord + 1);
            break;
        case Op::Add:
            wrap(0, [&] {
                print_node(out, n.a, 0);
                out += " + ";
                print_node(out, n.b, 1);
            });
            break;
        case Op::Sub:
            wrap(0, [&] {
                print_node(out, n.a, 0);
                out += " - ";
                print_node(out, n.b, 1);
            });
            break;
        case Op::Mul:
            wrap(1, [&] {
                print_node(out, n.a, 1);
                out += "*";
                print_node(out, n.b, 2);
            });
            break;
        case Op::Div:
            wrap(1, [&] {
                print_node(out, n.a, 1);
                out += "/";
                print_node(out, n.b, 2);
            });
            break;
        case Op::Pow:
            wrap(3, [&] {
                print_node(out, n.a, 4);
                out += '^';
                out += std::to_string(n.exponent);
            });
            break;
        case Op::Neg:
            wrap(2, [&] {
                out += '-';
                print_node(out, n.a, 2);
            });
            break;
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
        case Op::Sin:
        case Op::Cos: {
            static const char* names[] = {"exp", "log", "sqrt", "sin", "cos"};
            out += names[static_cast<int>(n.op) - static_cast<int>(Op::Exp)];
            out += '(';
            print_node(out, n.a, 0);
            out += ')';
            break;
        }
    }
}

inline std::string ScalarFieldExpr::to_string() const {
    if (empty()) return "0";
    std::string out;
    print_node(out, root_, 0);
    return out;
}

} // namespace frobsia
