#pragma once

// Madelung (hydrodynamic) view of a single effective wavefunction.
//
// Conventions: R = |psi|^2 is the probability density, rho = m R the mass
// density, J = (hbar/m) R grad S the probability current, u = J / R the
// velocity. J is always formed from psi and its gradient; the phase S is never
// unwrapped, so grad S is only available as (m/hbar) J / R.

#include "qhydro/fieldgrid.hpp"

#include <cstdint>
#include <vector>

namespace qhydro {

struct PhysicalParams {
    double hbar = 1.0;
    double mass = 1.0;
    double charge = -1.0;
    double light_speed = 1.0;

    /// Throws InvalidConfig if any value is non-finite or hbar, mass, light_speed <= 0.
    void validate() const;
};

struct MadelungFields {
    ScalarField R;       // |psi|^2
    ScalarField rho;     // m R
    VectorField J;       // probability current
    VectorField u;       // J / R where R > floor, zero elsewhere
    VectorField gradS;   // (m/hbar) J / R where R > floor, zero elsewhere
    std::vector<std::uint8_t> mask;  // 1 where R > floor
    double density_floor = 0.0;
};

/// 1e-10 * max(R).
double default_density_floor(const ScalarField& R);

/// Throws DegenerateState for an all-zero psi.
MadelungFields decompose(const ComplexField& psi, const PhysicalParams& params, double density_floor);
/// decompose() with default_density_floor(|psi|^2).
MadelungFields decompose(const ComplexField& psi, const PhysicalParams& params);

/// J = -(i hbar / 2m) (psi* grad psi - psi grad psi*).
VectorField probability_current(const ComplexField& psi, const PhysicalParams& params);

/// P = -(hbar^2 / 2m) rho hessian(ln rho) where rho > floor, zero elsewhere.
Matrix3Field quantum_pressure(const ScalarField& rho, const PhysicalParams& params, double density_floor);

/// curl J evaluated from wavefunction gradients only, as 2 (hbar/m) grad Re psi x grad Im psi.
VectorField clebsch_vorticity(const ComplexField& psi, const PhysicalParams& params);

/// (grad R / R) x J on the R > floor region, zero elsewhere. The continuum
/// equivalent of grad(ln R) x J; forming grad R / R keeps the stencil error
/// bounded next to density zeros such as vortex cores.
VectorField log_density_vorticity(const MadelungFields& fields);

/// |curl J - grad(ln R) x J| over R > floor.
NormedResidual vorticity_identity_residual(const MadelungFields& fields);

/// (rho_next - rho_prev)/dt + m div J. Pass rho_prev == rho_next for stationary states.
ScalarField continuity_residual(const ScalarField& rho_prev, const ScalarField& rho_next, double dt,
                                const VectorField& J, const PhysicalParams& params);

}  // namespace qhydro
