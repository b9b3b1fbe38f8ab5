#include "qhydro/vortex_control.hpp"

#include <algorithm>
#include <cmath>

namespace qhydro {

LambdaField::LambdaField(ScalarField lambda) : lambda_(std::move(lambda)) {
    const auto v = lambda_.values();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    min_ = *lo;
    max_ = *hi;
    const double scale = std::max({1.0, std::abs(min_), std::abs(max_)});
    constant_ = (max_ - min_) <= 1e-15 * scale;
}

LambdaField LambdaField::constant(const Grid& g, double lambda0) {
    return LambdaField(ScalarField::uniform(g, lambda0));
}

SpinField::SpinField(VectorField s_) : s(std::move(s_)), max_curl(norm_max(curl(s))) {}

NormedResidual beltrami_residual(const VectorField& J, const LambdaField& lam) {
    require_same_grid(J.grid(), lam.grid(), "beltrami_residual");
    return make_residual(curl(J) - scale(lam.values(), J));
}

VectorField superfluid_control_field(const VectorField& gradS_or_k, const LambdaField& lam,
                                     const std::optional<SpinField>& spin) {
    require_same_grid(gradS_or_k.grid(), lam.grid(), "superfluid_control_field");
    if (lam.is_constant()) {
        throw Error(ErrorCode::ConstantLambdaForbidden,
                    "a constant vorticity eigenvalue leaves the control field stationary; lambda must vary in space");
    }
    VectorField B = scale(lam.values(), gradS_or_k);
    if (spin) {
        require_same_grid(B.grid(), spin->s.grid(), "superfluid_control_field");
        B = B - spin->s;
    }
    return B;
}

ConstraintReport check_lambda_constraints(const LambdaField& lam, const VectorField& J,
                                          const std::optional<VectorField>& k, const ScalarField& dlnR_dt,
                                          const VectorField& gradS, const ConstraintTolerances& tol) {
    const Grid& g = J.grid();
    require_same_grid(g, lam.grid(), "check_lambda_constraints");
    require_same_grid(g, dlnR_dt.grid(), "check_lambda_constraints");
    require_same_grid(g, gradS.grid(), "check_lambda_constraints");
    if (k) require_same_grid(g, k->grid(), "check_lambda_constraints");
    for (double t : {tol.solenoidal, tol.constraint12, tol.constraint13, tol.constraint14, tol.beltrami}) {
        if (!(t > 0.0)) throw Error(ErrorCode::InvalidConfig, "constraint tolerances must be positive");
    }

    const ScalarField& lambda = lam.values();
    ConstraintReport rep;
    rep.nonconstant_lambda_ok = !lam.is_constant();
    rep.solenoidal_J_residual = norm_max(divergence(J));
    rep.constraint12_residual = norm_max(divergence(scale(lambda, J)));

    const VectorField grad_lambda = gradient(lambda);
    rep.k_substituted_by_gradS = !k.has_value();
    const VectorField& kk = k ? *k : gradS;
    if (k) {
        const Vec3 k0 = (*k)[0];
        for (const auto& v : k->values()) {
            if ((v - k0).norm() > 1e-12 * std::max(1.0, k0.norm())) {
                rep.k_nonuniform = true;
                break;
            }
        }
    }
    double c13 = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) c13 = std::max(c13, std::abs(grad_lambda[p].dot(kk[p])));
    rep.constraint13_residual = c13;

    const bool positive = lam.min() > 0.0;
    if (!positive && !tol.allow_product_form) {
        throw Error(ErrorCode::LogDomainError, "ln(lambda) requires lambda > 0 everywhere");
    }
    rep.constraint14_form = positive ? Constraint14Form::LogGradient : Constraint14Form::LambdaWeighted;
    double c14 = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double slope = grad_lambda[p].dot(gradS[p]);
        const double r = positive ? slope / lambda[p] - dlnR_dt[p] : slope - lambda[p] * dlnR_dt[p];
        c14 = std::max(c14, std::abs(r));
    }
    rep.constraint14_residual = c14;

    rep.beltrami_residual = beltrami_residual(J, lam).l2;

    rep.passed = rep.nonconstant_lambda_ok && rep.solenoidal_J_residual <= tol.solenoidal &&
                 rep.constraint12_residual <= tol.constraint12 && rep.constraint13_residual <= tol.constraint13 &&
                 rep.constraint14_residual <= tol.constraint14 && rep.beltrami_residual <= tol.beltrami;
    return rep;
}

Matrix3Field gamma_matrix(const ScalarField& R, double lambda0, double density_floor) {
    const VectorField gR = gradient(R);
    const Mat3 diag = -lambda0 * Mat3::Identity();
    std::vector<Mat3> out(R.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = R[p] > density_floor ? Mat3(cross_matrix(gR[p]) / R[p] + diag) : diag;
    }
    return Matrix3Field(R.grid(), std::move(out));
}

VectorField gauged_current(const VectorField& gradS, const VectorField& A, const PhysicalParams& params) {
    require_same_grid(gradS.grid(), A.grid(), "gauged_current");
    if (params.charge == 0.0) throw Error(ErrorCode::ChargeZero, "gauged current needs a nonzero charge");
    const double c_over_q = params.light_speed / params.charge;
    std::vector<Vec3> out(A.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = c_over_q * gradS[p] - A[p];
    return VectorField(A.grid(), std::move(out));
}

NormedResidual general_condition_residual(const ScalarField& R, const VectorField& gradS, const VectorField& A,
                                          const VectorField& B, double lambda0, const PhysicalParams& params) {
    const Grid& g = R.grid();
    require_same_grid(g, gradS.grid(), "general_condition_residual");
    require_same_grid(g, A.grid(), "general_condition_residual");
    require_same_grid(g, B.grid(), "general_condition_residual");
    const double q_over_c = params.charge / params.light_speed;
    const VectorField gR = gradient(R);
    std::vector<Vec3> out(g.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const Vec3 shifted = gradS[p] - q_over_c * A[p];
        out[p] = q_over_c * R[p] * B[p] - (gR[p].cross(shifted) - lambda0 * R[p] * shifted);
    }
    return make_residual(VectorField(g, std::move(out)));
}

}  // namespace qhydro
