#pragma once

// Gravitomagnetic dipole estimates for a confined toroidal flow and the
// scalar-tensor electromagnetic source term. Everything here is in SI units;
// natural-unit fields are converted through an explicit ScaleRecord.

#include "qhydro/fieldgrid.hpp"
#include "qhydro/madelung.hpp"

#include <string_view>

namespace qhydro {

namespace si {
inline constexpr double G_newton = 6.67430e-11;    // m^3 kg^-1 s^-2
inline constexpr double c = 299792458.0;           // m/s
inline constexpr double hbar = 1.054571817e-34;    // J s
}  // namespace si

struct GravitoParams {
    double G_newton = si::G_newton;
    double c_SI = si::c;
    double Lambda_ratio = 1.0;  // inner / outer torus radius, in (0, 1]
    double kappa = 1e-4;        // scalar-tensor coupling
    double mass = 1.0;          // circulating mass, kg

    void validate() const;
};

enum class DipoleFormula { Forward28, RatioForm29, Internal30, Approx31 };

std::string_view to_string(DipoleFormula f);

struct DipoleEstimate {
    Vec3 value = Vec3::Zero();
    DipoleFormula formula = DipoleFormula::RatioForm29;
    double coefficient = 0.0;
};

/// Natural-to-SI conversion: one natural unit of length, time and mass in SI.
struct ScaleRecord {
    double length = 1.0;  // m
    double time = 1.0;    // s
    double mass = 1.0;    // kg

    void validate() const;
    double velocity() const { return length / time; }
    double acceleration() const { return length / (time * time); }
    double energy() const { return mass * length * length / (time * time); }
    double action() const { return energy() * time; }
};

/// mu_G = 4 pi G / c^2.
double gravitomagnetic_permeability(const GravitoParams& p);

/// -(mu_G / 4 pi) d/dt[u (r/R)^2] from two snapshots (u, Lambda) taken dt apart.
DipoleEstimate dipole_forward_form(const Vec3& u_before, double Lambda_before, const Vec3& u_after,
                                   double Lambda_after, double dt, const GravitoParams& p);

/// -(G Lambda^2 / 4 pi c^2) du/dt.
DipoleEstimate dipole_ratio_form(const Vec3& du_dt, const GravitoParams& p);

/// (1/rho) div(rho hessian(ln rho)), the vector contraction of the log-density
/// Hessian used by the internal form; zero where rho <= floor.
VectorField log_density_hessian_divergence(const ScalarField& rho, double density_floor);

/// hessian(ln rho) with ln clamped at the floor, for inspection.
Matrix3Field log_density_hessian(const ScalarField& rho, double density_floor);

struct InternalDipole {
    VectorField value;     // total
    VectorField quantum;   // -(hbar^2/2) contraction term, times the coefficient
    VectorField potential; // grad U term, times the coefficient
    double coefficient = 0.0;  // G Lambda^2 / (4 pi m c^2)
};

/// (G Lambda^2 / 4 pi m c^2) [-(hbar^2/2) (1/rho) div(rho hessian ln rho) + grad U],
/// with hbar and m taken from params.
InternalDipole dipole_internal_form(const ScalarField& rho, const ScalarField& U, const GravitoParams& p,
                                    const PhysicalParams& params, double density_floor);

/// (G Lambda^2 / 4 pi) grad U*, U* = U / (m c^2).
VectorField dipole_approx(const VectorField& grad_Ustar, const GravitoParams& p);
double dipole_approx_coefficient(const GravitoParams& p);

struct ScalarTensorSource {
    ScalarField source;               // kappa (|B|^2 - |E|^2 / c^2)
    double fluctuation_scale = 0.0;   // c^2 max |grad Theta|, lap Theta = source, Theta = 0 outside
    static constexpr const char* units_note =
        "units of kappa and Theta are convention-dependent; values follow the input field units";
};

ScalarTensorSource scalar_tensor_source(const VectorField& B, const VectorField& E, const GravitoParams& p);

}  // namespace qhydro
