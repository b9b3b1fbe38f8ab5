#pragma once

// Containment analysis for single-frequency currents: the radiation condition
// curl curl J - k^2 J = 0, its Beltrami expansion grad lambda x J + beta J = 0
// with beta = lambda^2 - k^2, and the eigenstructure of G = [grad lambda]_x + beta I.

#include "qhydro/fieldgrid.hpp"
#include "qhydro/vortex_control.hpp"

#include <array>
#include <string>
#include <vector>

namespace qhydro {

using Eigen3c = std::array<Complex, 3>;

struct RadiationTolerances {
    /// Residual gates, relative to the L2 norm of J.
    double condition22 = 1e-2;
    double condition24 = 1e-2;
    /// |G J| <= kernel * ||G|| |J| counts a point as aligned with the kernel.
    double kernel = 1e-6;

    void validate() const;
};

struct RadiationReport {
    double condition22_residual = 0.0;  // L2 of curl curl J - k^2 J
    double condition24_residual = 0.0;  // L2 of grad lambda x J + beta J
    double J_norm = 0.0;                // L2 of J
    ScalarField condition22_pointwise;
    ScalarField condition24_pointwise;
    ScalarField beta;
    std::vector<Eigen3c> eigen_branch;            // computed eigenvalues of G per point
    std::vector<Eigen3c> claimed_eigen_branch;    // {0, +i sqrt(1+|grad lambda|^2), -i sqrt(...)} per point
    double kernel_alignment = 0.0;                // over flux-carrying points
    std::size_t flux_points = 0;
    bool classified_nonradiating = false;
    /// The classifier reads a violated radiation condition as non-radiating.
    static constexpr const char* framing =
        "radiation condition violated on a flux-carrying current is read as non-radiating";
};

/// |curl curl J - k^2 J| pointwise and in L2.
NormedResidual radiation_condition_residual(const VectorField& J, double k);

struct ExpandedResidual {
    NormedResidual residual;  // |grad lambda x J + beta J|
    ScalarField beta;         // lambda^2 - k^2
};

ExpandedResidual beltrami_expanded_residual(const VectorField& J, const LambdaField& lam, double k);

/// [grad_lambda]_x + beta I.
Mat3 g_matrix(const Vec3& grad_lambda, double beta);

/// Eigenvalues of a matrix of the form [a]_x + beta I: {beta, beta + i|a|, beta - i|a|}.
/// beta and |a| are read off the trace and the antisymmetric part, which are the
/// coefficients of det(G - mu I) = (beta - mu)((beta - mu)^2 + |a|^2).
Eigen3c g_eigenvalues(const Mat3& G);

/// Values asserted in the literature for comparison: {0, +i sqrt(1+|a|^2), -i sqrt(1+|a|^2)}.
Eigen3c claimed_g_eigenvalues(const Vec3& grad_lambda);

/// Spectral norm of [a]_x + beta I, sqrt(beta^2 + |a|^2).
double g_norm(const Vec3& grad_lambda, double beta);

/// Consistency constant C in condition22 <= condition24 + C * ||curl J - lambda J||.
double consistency_constant(const LambdaField& lam);

RadiationReport classify_nonradiating(const VectorField& J, const LambdaField& lam, double k,
                                      const RadiationTolerances& tol = {});

}  // namespace qhydro
