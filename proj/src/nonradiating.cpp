#include "qhydro/nonradiating.hpp"

#include <algorithm>
#include <cmath>

namespace qhydro {

void RadiationTolerances::validate() const {
    if (!(condition22 > 0.0) || !(condition24 > 0.0) || !(kernel > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "radiation tolerances must be positive");
    }
}

NormedResidual radiation_condition_residual(const VectorField& J, double k) {
    if (!std::isfinite(k)) throw Error(ErrorCode::InvalidField, "wavenumber k must be finite");
    const VectorField cc = curl(curl(J));
    return make_residual(cc - (k * k) * J);
}

ExpandedResidual beltrami_expanded_residual(const VectorField& J, const LambdaField& lam, double k) {
    require_same_grid(J.grid(), lam.grid(), "beltrami_expanded_residual");
    const ScalarField& lambda = lam.values();
    const VectorField grad_lambda = gradient(lambda);
    std::vector<double> beta(J.size());
    std::vector<Vec3> r(J.size());
    for (std::size_t p = 0; p < r.size(); ++p) {
        beta[p] = lambda[p] * lambda[p] - k * k;
        r[p] = grad_lambda[p].cross(J[p]) + beta[p] * J[p];
    }
    return {make_residual(VectorField(J.grid(), std::move(r))), ScalarField(J.grid(), std::move(beta))};
}

Mat3 g_matrix(const Vec3& grad_lambda, double beta) {
    return cross_matrix(grad_lambda) + beta * Mat3::Identity();
}

Eigen3c g_eigenvalues(const Mat3& G) {
    const double beta = G.trace() / 3.0;
    const Mat3 skew = 0.5 * (G - G.transpose());
    const double a = std::sqrt(0.5 * skew.squaredNorm());
    return {Complex(beta, 0.0), Complex(beta, a), Complex(beta, -a)};
}

Eigen3c claimed_g_eigenvalues(const Vec3& grad_lambda) {
    const double w = std::sqrt(1.0 + grad_lambda.squaredNorm());
    return {Complex(0.0, 0.0), Complex(0.0, w), Complex(0.0, -w)};
}

double g_norm(const Vec3& grad_lambda, double beta) { return std::sqrt(beta * beta + grad_lambda.squaredNorm()); }

double consistency_constant(const LambdaField& lam) {
    const double max_abs = std::max(std::abs(lam.min()), std::abs(lam.max()));
    return max_abs + std::sqrt(3.0) / lam.grid().min_spacing();
}

RadiationReport classify_nonradiating(const VectorField& J, const LambdaField& lam, double k,
                                      const RadiationTolerances& tol) {
    tol.validate();
    require_same_grid(J.grid(), lam.grid(), "classify_nonradiating");
    const NormedResidual c22 = radiation_condition_residual(J, k);
    ExpandedResidual c24 = beltrami_expanded_residual(J, lam, k);
    const VectorField grad_lambda = gradient(lam.values());

    RadiationReport rep{c22.l2, c24.residual.l2, norm_l2(J), c22.pointwise, c24.residual.pointwise,
                        std::move(c24.beta)};
    rep.eigen_branch.resize(J.size());
    rep.claimed_eigen_branch.resize(J.size());
    double jmax = 0.0;
    for (const auto& v : J.values()) jmax = std::max(jmax, v.norm());
    std::size_t aligned = 0;
    for (std::size_t p = 0; p < J.size(); ++p) {
        const Mat3 G = g_matrix(grad_lambda[p], rep.beta[p]);
        rep.eigen_branch[p] = g_eigenvalues(G);
        rep.claimed_eigen_branch[p] = claimed_g_eigenvalues(grad_lambda[p]);
        const double jn = J[p].norm();
        if (jmax > 0.0 && jn > 0.01 * jmax) {
            ++rep.flux_points;
            if ((G * J[p]).norm() <= tol.kernel * g_norm(grad_lambda[p], rep.beta[p]) * jn) ++aligned;
        }
    }
    rep.kernel_alignment = rep.flux_points > 0 ? static_cast<double>(aligned) / rep.flux_points : 0.0;
    rep.classified_nonradiating = rep.flux_points > 0 && rep.condition22_residual > tol.condition22 * rep.J_norm;
    return rep;
}

}  // namespace qhydro
