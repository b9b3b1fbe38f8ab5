#pragma once

// Beltrami control fields: the target condition curl J = lambda J, the
// superfluid control field B = lambda grad S (- s), the lambda constraint
// system and the matrix form B = Gamma * J0 of the general condition.

#include "qhydro/fieldgrid.hpp"
#include "qhydro/madelung.hpp"

#include <limits>
#include <optional>
#include <string>

namespace qhydro {

/// Vorticity eigenvalue lambda(r).
class LambdaField {
public:
    /// Flags the field constant when max - min <= 1e-15 * max(1, max|lambda|).
    explicit LambdaField(ScalarField lambda);
    static LambdaField constant(const Grid& g, double lambda0);

    const ScalarField& values() const noexcept { return lambda_; }
    const Grid& grid() const noexcept { return lambda_.grid(); }
    bool is_constant() const noexcept { return constant_; }
    /// Meaningful only when is_constant().
    double lambda0() const noexcept { return lambda_[0]; }
    double min() const noexcept { return min_; }
    double max() const noexcept { return max_; }

private:
    ScalarField lambda_;
    bool constant_ = false;
    double min_ = 0.0;
    double max_ = 0.0;
};

/// User-supplied spin density expectation s = <psi* S psi>.
struct SpinField {
    explicit SpinField(VectorField s);

    VectorField s;
    double max_curl = 0.0;  // max |curl s|; the shift term assumes it vanishes
};

struct ConstraintTolerances {
    double solenoidal = 1e-6;
    double constraint12 = 1e-6;
    double constraint13 = 1e-6;
    double constraint14 = 1e-6;
    /// Beltrami residual gate; infinite means report-only.
    double beltrami = std::numeric_limits<double>::infinity();
    /// When lambda <= 0 somewhere, evaluate the lambda-weighted form of the
    /// log-gradient constraint instead of throwing LogDomainError.
    bool allow_product_form = true;
};

enum class Constraint14Form { LogGradient, LambdaWeighted };

struct ConstraintReport {
    double solenoidal_J_residual = 0.0;  // max |div J|
    double constraint12_residual = 0.0;  // max |div(lambda J)|
    double constraint13_residual = 0.0;  // max |grad lambda . k|
    double constraint14_residual = 0.0;  // max |grad ln lambda . grad S - d_t ln R|
    bool nonconstant_lambda_ok = false;
    double beltrami_residual = 0.0;      // L2 of curl J - lambda J
    bool passed = false;

    Constraint14Form constraint14_form = Constraint14Form::LogGradient;
    bool k_substituted_by_gradS = false;  // no k supplied
    bool k_nonuniform = false;
};

/// |curl J - lambda J| with max and L2 norms.
NormedResidual beltrami_residual(const VectorField& J, const LambdaField& lam);

/// B = lambda grad S, minus s when a spin field is supplied.
/// Throws ConstantLambdaForbidden for a constant lambda.
VectorField superfluid_control_field(const VectorField& gradS_or_k, const LambdaField& lam,
                                     const std::optional<SpinField>& spin = std::nullopt);

/// Evaluates the solenoidal and lambda constraints. k may be omitted, in which
/// case grad S stands in for it and the report says so. Pass dlnR_dt = 0 for
/// stationary flows.
ConstraintReport check_lambda_constraints(const LambdaField& lam, const VectorField& J,
                                          const std::optional<VectorField>& k, const ScalarField& dlnR_dt,
                                          const VectorField& gradS, const ConstraintTolerances& tol = {});

/// Gamma = (1/R) [grad R]_x - lambda0 I where R > floor, -lambda0 I elsewhere.
Matrix3Field gamma_matrix(const ScalarField& R, double lambda0, double density_floor);

/// J0 = (c/q) grad S - A. Throws ChargeZero when q == 0.
VectorField gauged_current(const VectorField& gradS, const VectorField& A, const PhysicalParams& params);

/// Pointwise |(q/c) R B - [grad R x (grad S - (q/c) A) - lambda0 R (grad S - (q/c) A)]|.
NormedResidual general_condition_residual(const ScalarField& R, const VectorField& gradS, const VectorField& A,
                                          const VectorField& B, double lambda0, const PhysicalParams& params);

}  // namespace qhydro
