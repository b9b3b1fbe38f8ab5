#pragma once

// Scalar expression language used by scenario configs to describe lambda(r),
// U(r), spin components and wavefunction seeds.
//
//   expr    := term { ("+" | "-") term }
//   term    := unary { ("*" | "/") unary }
//   unary   := "-" unary | power
//   power   := primary [ "^" unary ]          (right associative)
//   primary := number | "pi" | variable | function "(" expr ")" | "(" expr ")"
//
// variables: x y z r rho2   (r = sqrt(x^2+y^2+z^2), rho2 = x^2+y^2)
// functions: sin cos exp sqrt tanh abs ln

#include "qhydro/error.hpp"
#include "qhydro/fieldgrid.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

namespace qhydro::expr {

enum class Variable { X, Y, Z, R, Rho2 };
enum class Function { Sin, Cos, Exp, Sqrt, Tanh, Abs, Ln };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Literal {
    double value;
};
struct Pi {};
struct VariableRef {
    Variable var;
};
struct Negate {
    NodePtr operand;
};
struct Binary {
    BinaryOp op;
    NodePtr lhs;
    NodePtr rhs;
};
struct Call {
    Function fn;
    NodePtr arg;
};

struct Node {
    std::variant<Literal, Pi, VariableRef, Negate, Binary, Call> kind;
};

/// Parsed, immutable expression tree.
class Expr {
public:
    explicit Expr(NodePtr root) : root_(std::move(root)) {}

    const Node& root() const { return *root_; }

    double evaluate(double x, double y, double z) const;
    double evaluate(const Vec3& p) const { return evaluate(p.x(), p.y(), p.z()); }

    /// True when the tree references none of x, y, z, r, rho2.
    bool is_constant() const;

    /// Fully parenthesised text that reparses to an identical tree.
    std::string to_string() const;

    bool structurally_equal(const Expr& other) const;

private:
    NodePtr root_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t position, std::string expected, std::string found);

    std::size_t position() const noexcept { return position_; }
    const std::string& expected() const noexcept { return expected_; }
    const std::string& found() const noexcept { return found_; }

private:
    std::size_t position_;
    std::string expected_;
    std::string found_;
};

class EvalDomainError : public Error {
public:
    EvalDomainError(std::size_t bad_points, Vec3 first_bad);

    std::size_t bad_points() const noexcept { return bad_points_; }
    const Vec3& first_bad_position() const noexcept { return first_bad_; }

private:
    std::size_t bad_points_;
    Vec3 first_bad_;
};

/// Throws ParseError on malformed input.
Expr parse(std::string_view src);

/// Evaluates at every grid point. All points are evaluated; if any produce a
/// non-finite value an EvalDomainError carrying the offending count is thrown.
ScalarField evaluate_on_grid(const Expr& e, const Grid& g);

}  // namespace qhydro::expr
