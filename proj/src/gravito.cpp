#include "qhydro/gravito.hpp"

#include "krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qhydro {

void GravitoParams::validate() const {
    if (!(G_newton > 0.0) || !std::isfinite(G_newton)) throw Error(ErrorCode::InvalidConfig, "gravito.G_newton must be positive");
    if (!(c_SI > 0.0) || !std::isfinite(c_SI)) throw Error(ErrorCode::InvalidConfig, "gravito.c_SI must be positive");
    if (!(Lambda_ratio > 0.0 && Lambda_ratio <= 1.0)) throw Error(ErrorCode::InvalidConfig, "gravito.Lambda_ratio must lie in (0, 1]");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Error(ErrorCode::InvalidConfig, "gravito.kappa must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass)) throw Error(ErrorCode::InvalidConfig, "gravito.mass must be positive");
}

void ScaleRecord::validate() const {
    for (double v : {length, time, mass}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "scale record entries must be positive");
    }
}

std::string_view to_string(DipoleFormula f) {
    switch (f) {
        case DipoleFormula::Forward28: return "Forward28";
        case DipoleFormula::RatioForm29: return "RatioForm29";
        case DipoleFormula::Internal30: return "Internal30";
        case DipoleFormula::Approx31: return "Approx31";
    }
    return "unknown";
}

double gravitomagnetic_permeability(const GravitoParams& p) {
    p.validate();
    return 4.0 * std::numbers::pi * p.G_newton / (p.c_SI * p.c_SI);
}

DipoleEstimate dipole_forward_form(const Vec3& u_before, double Lambda_before, const Vec3& u_after,
                                   double Lambda_after, double dt, const GravitoParams& p) {
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidField, "time step must be positive");
    const double coefficient = gravitomagnetic_permeability(p) / (4.0 * std::numbers::pi);
    const Vec3 rate = (u_after * Lambda_after * Lambda_after - u_before * Lambda_before * Lambda_before) / dt;
    return {-coefficient * rate, DipoleFormula::Forward28, coefficient};
}

DipoleEstimate dipole_ratio_form(const Vec3& du_dt, const GravitoParams& p) {
    p.validate();
    const double coefficient =
        p.G_newton * p.Lambda_ratio * p.Lambda_ratio / (4.0 * std::numbers::pi * p.c_SI * p.c_SI);
    return {-coefficient * du_dt, DipoleFormula::RatioForm29, coefficient};
}

namespace {

ScalarField clamped_log(const ScalarField& rho, double floor) {
    const double lo = std::max(floor, std::numeric_limits<double>::min());
    std::vector<double> out(rho.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::log(std::max(rho[p], lo));
    return ScalarField(rho.grid(), std::move(out));
}

}  // namespace

Matrix3Field log_density_hessian(const ScalarField& rho, double density_floor) {
    return hessian(clamped_log(rho, density_floor));
}

VectorField log_density_hessian_divergence(const ScalarField& rho, double density_floor) {
    const Matrix3Field H = log_density_hessian(rho, density_floor);
    std::vector<Mat3> weighted(rho.size());
    for (std::size_t p = 0; p < weighted.size(); ++p) weighted[p] = rho[p] * H[p];
    const VectorField div = tensor_divergence(Matrix3Field(rho.grid(), std::move(weighted)));
    std::vector<Vec3> out(rho.size(), Vec3::Zero());
    for (std::size_t p = 0; p < out.size(); ++p) {
        if (rho[p] > density_floor) out[p] = div[p] / rho[p];
    }
    return VectorField(rho.grid(), std::move(out));
}

InternalDipole dipole_internal_form(const ScalarField& rho, const ScalarField& U, const GravitoParams& p,
                                    const PhysicalParams& params, double density_floor) {
    p.validate();
    params.validate();
    require_same_grid(rho.grid(), U.grid(), "dipole_internal_form");
    const double coefficient = p.G_newton * p.Lambda_ratio * p.Lambda_ratio /
                               (4.0 * std::numbers::pi * params.mass * p.c_SI * p.c_SI);
    const VectorField contraction = log_density_hessian_divergence(rho, density_floor);
    const VectorField gU = gradient(U);
    std::vector<Vec3> quantum(rho.size());
    std::vector<Vec3> potential(rho.size());
    std::vector<Vec3> total(rho.size());
    const double q = -0.5 * params.hbar * params.hbar;
    for (std::size_t i = 0; i < total.size(); ++i) {
        quantum[i] = coefficient * q * contraction[i];
        potential[i] = coefficient * gU[i];
        total[i] = quantum[i] + potential[i];
    }
    const Grid& g = rho.grid();
    return {VectorField(g, std::move(total)), VectorField(g, std::move(quantum)), VectorField(g, std::move(potential)),
            coefficient};
}

double dipole_approx_coefficient(const GravitoParams& p) {
    p.validate();
    return p.G_newton * p.Lambda_ratio * p.Lambda_ratio / (4.0 * std::numbers::pi);
}

VectorField dipole_approx(const VectorField& grad_Ustar, const GravitoParams& p) {
    return dipole_approx_coefficient(p) * grad_Ustar;
}

ScalarTensorSource scalar_tensor_source(const VectorField& B, const VectorField& E, const GravitoParams& p) {
    p.validate();
    require_same_grid(B.grid(), E.grid(), "scalar_tensor_source");
    const double inv_c2 = 1.0 / (p.c_SI * p.c_SI);
    std::vector<double> s(B.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = p.kappa * (B[i].squaredNorm() - E[i].squaredNorm() * inv_c2);

    // static reduction: lap Theta = source with Theta = 0 beyond the box
    Grid dg = B.grid();
    dg.boundary = Boundary::Dirichlet0;
    const krylov::LinearOperator neg_lap = [&](const krylov::Vector& x, krylov::Vector& y) {
        const ScalarField l = laplacian(ScalarField(dg, x));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = -l[i];
    };
    krylov::Vector b(s.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = -s[i];
    krylov::Vector theta(s.size(), 0.0);
    const auto res = krylov::conjugate_gradient(neg_lap, b, theta, 1e-12, 20000);
    if (!res.converged) throw Error(ErrorCode::SolverDiverged, "Poisson solve for the scalar-tensor potential stalled");
    const VectorField gTheta = gradient(ScalarField(dg, std::move(theta)));

    ScalarTensorSource out{ScalarField(B.grid(), std::move(s))};
    double gmax = 0.0;
    for (const auto& v : gTheta.values()) gmax = std::max(gmax, v.norm());
    out.fluctuation_scale = p.c_SI * p.c_SI * gmax;
    return out;
}

}  // namespace qhydro
