#include "qhydro/madelung.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qhydro {

void PhysicalParams::validate() const {
    if (!std::isfinite(hbar) || !std::isfinite(mass) || !std::isfinite(charge) || !std::isfinite(light_speed)) {
        throw Error(ErrorCode::InvalidConfig, "physical parameters must be finite");
    }
    if (hbar <= 0.0 || mass <= 0.0 || light_speed <= 0.0) {
        throw Error(ErrorCode::InvalidConfig, "hbar, mass and light_speed must be positive");
    }
}

double default_density_floor(const ScalarField& R) {
    double mx = 0.0;
    for (double v : R.values()) mx = std::max(mx, v);
    return 1e-10 * mx;
}

namespace {

struct SplitGradient {
    VectorField re;
    VectorField im;
};

SplitGradient split_gradient(const ComplexField& psi) {
    std::vector<double> re(psi.size());
    std::vector<double> im(psi.size());
    for (std::size_t p = 0; p < psi.size(); ++p) {
        re[p] = psi[p].real();
        im[p] = psi[p].imag();
    }
    return {gradient(ScalarField(psi.grid(), std::move(re))), gradient(ScalarField(psi.grid(), std::move(im)))};
}

}  // namespace

VectorField probability_current(const ComplexField& psi, const PhysicalParams& params) {
    const auto d = std::array<ComplexField, 3>{partial(psi, 0), partial(psi, 1), partial(psi, 2)};
    const Complex pre(0.0, -params.hbar / (2.0 * params.mass));
    std::vector<Vec3> out(psi.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const Complex c = std::conj(psi[p]);
        Vec3 j;
        for (int a = 0; a < 3; ++a) {
            // psi* dpsi - psi dpsi* = w - conj(w), purely imaginary.
            const Complex w = c * d[a][p];
            j[a] = (pre * (w - std::conj(w))).real();
        }
        out[p] = j;
    }
    return VectorField(psi.grid(), std::move(out));
}

MadelungFields decompose(const ComplexField& psi, const PhysicalParams& params, double density_floor) {
    params.validate();
    if (!(density_floor > 0.0)) throw Error(ErrorCode::InvalidConfig, "density_floor must be positive");
    const Grid& g = psi.grid();
    std::vector<double> R(psi.size());
    double mx = 0.0;
    for (std::size_t p = 0; p < R.size(); ++p) {
        R[p] = std::norm(psi[p]);
        mx = std::max(mx, R[p]);
    }
    if (mx == 0.0) throw Error(ErrorCode::DegenerateState, "wavefunction vanishes everywhere");

    VectorField J = probability_current(psi, params);
    std::vector<double> rho(R.size());
    std::vector<Vec3> u(R.size());
    std::vector<Vec3> gradS(R.size());
    std::vector<std::uint8_t> mask(R.size(), 0);
    const double m_over_hbar = params.mass / params.hbar;
    for (std::size_t p = 0; p < R.size(); ++p) {
        rho[p] = params.mass * R[p];
        if (R[p] > density_floor) {
            mask[p] = 1;
            u[p] = J[p] / R[p];
            gradS[p] = m_over_hbar * u[p];
        } else {
            u[p] = Vec3::Zero();
            gradS[p] = Vec3::Zero();
        }
    }
    return MadelungFields{ScalarField(g, std::move(R)),
                          ScalarField(g, std::move(rho)),
                          std::move(J),
                          VectorField(g, std::move(u)),
                          VectorField(g, std::move(gradS)),
                          std::move(mask),
                          density_floor};
}

MadelungFields decompose(const ComplexField& psi, const PhysicalParams& params) {
    double mx = 0.0;
    for (const auto& v : psi.values()) mx = std::max(mx, std::norm(v));
    if (mx == 0.0) throw Error(ErrorCode::DegenerateState, "wavefunction vanishes everywhere");
    return decompose(psi, params, 1e-10 * mx);
}

Matrix3Field quantum_pressure(const ScalarField& rho, const PhysicalParams& params, double density_floor) {
    params.validate();
    const double floor = std::max(density_floor, std::numeric_limits<double>::min());
    std::vector<double> ln_rho(rho.size());
    for (std::size_t p = 0; p < rho.size(); ++p) ln_rho[p] = std::log(std::max(rho[p], floor));
    const Matrix3Field H = hessian(ScalarField(rho.grid(), std::move(ln_rho)));
    const double pre = -params.hbar * params.hbar / (2.0 * params.mass);
    std::vector<Mat3> out(rho.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = rho[p] > density_floor ? Mat3(pre * rho[p] * H[p]) : Mat3(Mat3::Zero());
    }
    return Matrix3Field(rho.grid(), std::move(out));
}

VectorField clebsch_vorticity(const ComplexField& psi, const PhysicalParams& params) {
    const auto [re, im] = split_gradient(psi);
    const double pre = 2.0 * params.hbar / params.mass;
    std::vector<Vec3> out(psi.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = pre * re[p].cross(im[p]);
    return VectorField(psi.grid(), std::move(out));
}

VectorField log_density_vorticity(const MadelungFields& f) {
    const VectorField gR = gradient(f.R);
    std::vector<Vec3> out(f.R.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = f.mask[p] ? Vec3(gR[p].cross(f.J[p]) / f.R[p]) : Vec3(Vec3::Zero());
    }
    return VectorField(f.R.grid(), std::move(out));
}

NormedResidual vorticity_identity_residual(const MadelungFields& fields) {
    return make_residual(curl(fields.J) - log_density_vorticity(fields), fields.mask);
}

ScalarField continuity_residual(const ScalarField& rho_prev, const ScalarField& rho_next, double dt,
                                const VectorField& J, const PhysicalParams& params) {
    require_same_grid(rho_prev.grid(), rho_next.grid(), "continuity_residual");
    require_same_grid(rho_prev.grid(), J.grid(), "continuity_residual");
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidConfig, "dt must be positive");
    const ScalarField divJ = divergence(J);
    std::vector<double> out(J.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = (rho_next[p] - rho_prev[p]) / dt + params.mass * divJ[p];
    }
    return ScalarField(J.grid(), std::move(out));
}

}  // namespace qhydro
