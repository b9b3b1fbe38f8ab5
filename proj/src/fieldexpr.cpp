#include "qhydro/fieldexpr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numbers>
#include <optional>
#include <sstream>

namespace qhydro::expr {

namespace {

struct NamedVariable {
    std::string_view name;
    Variable var;
};
constexpr std::array<NamedVariable, 5> kVariables{{
    {"x", Variable::X}, {"y", Variable::Y}, {"z", Variable::Z}, {"r", Variable::R}, {"rho2", Variable::Rho2},
}};

struct NamedFunction {
    std::string_view name;
    Function fn;
};
constexpr std::array<NamedFunction, 7> kFunctions{{
    {"sin", Function::Sin}, {"cos", Function::Cos}, {"exp", Function::Exp}, {"sqrt", Function::Sqrt},
    {"tanh", Function::Tanh}, {"abs", Function::Abs}, {"ln", Function::Ln},
}};

std::string_view name_of(Variable v) {
    for (const auto& nv : kVariables) if (nv.var == v) return nv.name;
    return "?";
}

std::string_view name_of(Function f) {
    for (const auto& nf : kFunctions) if (nf.fn == f) return nf.name;
    return "?";
}

char symbol_of(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return '+';
        case BinaryOp::Sub: return '-';
        case BinaryOp::Mul: return '*';
        case BinaryOp::Div: return '/';
        case BinaryOp::Pow: return '^';
    }
    return '?';
}

NodePtr make(auto kind) { return std::make_shared<const Node>(Node{std::move(kind)}); }

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse_all() {
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ < src_.size()) fail("operator or end of input");
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string current_token() const {
        if (pos_ >= src_.size()) return "end of input";
        const unsigned char c = static_cast<unsigned char>(src_[pos_]);
        if (std::isalpha(c) || c == '_') {
            std::size_t end = pos_;
            while (end < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) ++end;
            return std::string(src_.substr(pos_, end - pos_));
        }
        return std::string(1, src_[pos_]);
    }

    [[noreturn]] void fail(std::string expected) {
        skip_ws();
        throw ParseError(pos_, std::move(expected), current_token());
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) {
                lhs = make(Binary{BinaryOp::Add, lhs, parse_term()});
            } else if (accept('-')) {
                lhs = make(Binary{BinaryOp::Sub, lhs, parse_term()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make(Binary{BinaryOp::Mul, lhs, parse_unary()});
            } else if (accept('/')) {
                lhs = make(Binary{BinaryOp::Div, lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make(Negate{parse_unary()});
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make(Binary{BinaryOp::Pow, base, parse_unary()});
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("operand");
        const unsigned char c = static_cast<unsigned char>(src_[pos_]);
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) fail("')'");
            return inner;
        }
        if (std::isdigit(c) || c == '.') return parse_number();
        if (std::isalpha(c) || c == '_') return parse_identifier();
        fail("operand");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_, ++n;
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0) {
            pos_ = start;
            fail("number");
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            const std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (digits() == 0) {
                pos_ = mark + 1;
                fail("exponent digits");
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || !std::isfinite(value)) {
            pos_ = start;
            fail("finite number");
        }
        return make(Literal{value});
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "pi") return make(Pi{});
        for (const auto& nv : kVariables) {
            if (nv.name == name) return make(VariableRef{nv.var});
        }
        for (const auto& nf : kFunctions) {
            if (nf.name == name) {
                if (!accept('(')) fail("'(' after " + std::string(name));
                NodePtr arg = parse_expr();
                if (!accept(')')) fail("')'");
                return make(Call{nf.fn, arg});
            }
        }
        throw ParseError(start, "variable, function or constant", "unknown identifier '" + std::string(name) + "'");
    }
};

double apply(Function fn, double a) {
    switch (fn) {
        case Function::Sin: return std::sin(a);
        case Function::Cos: return std::cos(a);
        case Function::Exp: return std::exp(a);
        case Function::Sqrt: return std::sqrt(a);
        case Function::Tanh: return std::tanh(a);
        case Function::Abs: return std::abs(a);
        case Function::Ln: return a > 0.0 ? std::log(a) : std::numeric_limits<double>::quiet_NaN();
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double eval_node(const Node& n, double x, double y, double z) {
    return std::visit(
        [&](const auto& k) -> double {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Literal>) {
                return k.value;
            } else if constexpr (std::is_same_v<K, Pi>) {
                return std::numbers::pi;
            } else if constexpr (std::is_same_v<K, VariableRef>) {
                switch (k.var) {
                    case Variable::X: return x;
                    case Variable::Y: return y;
                    case Variable::Z: return z;
                    case Variable::R: return std::sqrt(x * x + y * y + z * z);
                    case Variable::Rho2: return x * x + y * y;
                }
                return 0.0;
            } else if constexpr (std::is_same_v<K, Negate>) {
                return -eval_node(*k.operand, x, y, z);
            } else if constexpr (std::is_same_v<K, Binary>) {
                const double a = eval_node(*k.lhs, x, y, z);
                const double b = eval_node(*k.rhs, x, y, z);
                switch (k.op) {
                    case BinaryOp::Add: return a + b;
                    case BinaryOp::Sub: return a - b;
                    case BinaryOp::Mul: return a * b;
                    case BinaryOp::Div: return b != 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN();
                    case BinaryOp::Pow: return std::pow(a, b);
                }
                return 0.0;
            } else {
                return apply(k.fn, eval_node(*k.arg, x, y, z));
            }
        },
        n.kind);
}

bool constant_node(const Node& n) {
    return std::visit(
        [](const auto& k) -> bool {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, VariableRef>) {
                return false;
            } else if constexpr (std::is_same_v<K, Negate>) {
                return constant_node(*k.operand);
            } else if constexpr (std::is_same_v<K, Binary>) {
                return constant_node(*k.lhs) && constant_node(*k.rhs);
            } else if constexpr (std::is_same_v<K, Call>) {
                return constant_node(*k.arg);
            } else {
                return true;
            }
        },
        n.kind);
}

void print_node(const Node& n, std::ostream& os) {
    std::visit(
        [&](const auto& k) {
            using K = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<K, Literal>) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", k.value);
                os << buf;
            } else if constexpr (std::is_same_v<K, Pi>) {
                os << "pi";
            } else if constexpr (std::is_same_v<K, VariableRef>) {
                os << name_of(k.var);
            } else if constexpr (std::is_same_v<K, Negate>) {
                os << "(-";
                print_node(*k.operand, os);
                os << ')';
            } else if constexpr (std::is_same_v<K, Binary>) {
                os << '(';
                print_node(*k.lhs, os);
                os << ' ' << symbol_of(k.op) << ' ';
                print_node(*k.rhs, os);
                os << ')';
            } else {
                os << name_of(k.fn) << '(';
                print_node(*k.arg, os);
                os << ')';
            }
        },
        n.kind);
}

bool equal_nodes(const Node& a, const Node& b) {
    if (a.kind.index() != b.kind.index()) return false;
    return std::visit(
        [&](const auto& ka) -> bool {
            using K = std::decay_t<decltype(ka)>;
            const auto& kb = std::get<K>(b.kind);
            if constexpr (std::is_same_v<K, Literal>) {
                return ka.value == kb.value;
            } else if constexpr (std::is_same_v<K, Pi>) {
                return true;
            } else if constexpr (std::is_same_v<K, VariableRef>) {
                return ka.var == kb.var;
            } else if constexpr (std::is_same_v<K, Negate>) {
                return equal_nodes(*ka.operand, *kb.operand);
            } else if constexpr (std::is_same_v<K, Binary>) {
                return ka.op == kb.op && equal_nodes(*ka.lhs, *kb.lhs) && equal_nodes(*ka.rhs, *kb.rhs);
            } else {
                return ka.fn == kb.fn && equal_nodes(*ka.arg, *kb.arg);
            }
        },
        a.kind);
}

std::string describe_parse_error(std::size_t position, const std::string& expected, const std::string& found) {
    std::ostringstream msg;
    msg << "at offset " << position << ": expected " << expected << ", found " << found;
    return msg.str();
}

std::string describe_domain_error(std::size_t bad, const Vec3& first) {
    std::ostringstream msg;
    msg << bad << " grid point(s) evaluate to a non-finite value; first at (" << first.x() << ", "
        << first.y() << ", " << first.z() << ")";
    return msg.str();
}

}  // namespace

ParseError::ParseError(std::size_t position, std::string expected, std::string found)
    : Error(ErrorCode::ParseError, describe_parse_error(position, expected, found)),
      position_(position),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

EvalDomainError::EvalDomainError(std::size_t bad_points, Vec3 first_bad)
    : Error(ErrorCode::EvalDomainError, describe_domain_error(bad_points, first_bad)),
      bad_points_(bad_points),
      first_bad_(std::move(first_bad)) {}

double Expr::evaluate(double x, double y, double z) const { return eval_node(*root_, x, y, z); }

bool Expr::is_constant() const { return constant_node(*root_); }

std::string Expr::to_string() const {
    std::ostringstream os;
    print_node(*root_, os);
    return os.str();
}

bool Expr::structurally_equal(const Expr& other) const { return equal_nodes(*root_, *other.root_); }

Expr parse(std::string_view src) { return Expr(Parser(src).parse_all()); }

ScalarField evaluate_on_grid(const Expr& e, const Grid& g) {
    std::vector<double> values(g.size());
    std::size_t bad = 0;
    Vec3 first_bad = Vec3::Zero();
    for (std::size_t p = 0; p < values.size(); ++p) {
        const Vec3 x = g.position(p);
        values[p] = e.evaluate(x);
        if (!std::isfinite(values[p])) {
            if (bad == 0) first_bad = x;
            ++bad;
        }
    }
    if (bad > 0) throw EvalDomainError(bad, first_bad);
    return ScalarField(g, std::move(values));
}

}  // namespace qhydro::expr
