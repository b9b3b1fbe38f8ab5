#pragma once

// Vector-potential equation, external source currents, magnetic Schrodinger
// ground state and the self-consistent coupling loop between them.
//
// Vector potential:  (lap - lambda0) A - grad R x A = (c/q) Gamma . grad S
// Hamiltonian:       H = (1/2m)(-i hbar grad - (q/c) A)^2 + U, expanded as
//                    -(hbar^2/2m) lap + (i q hbar / 2mc)(A.grad + grad.A)
//                    + (q^2 / 2mc^2)|A|^2 + U
// Both use central differences with zero ghost values on Dirichlet0 grids,
// which keeps H Hermitian.

#include "qhydro/fieldgrid.hpp"
#include "qhydro/madelung.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qhydro {

struct SolverConfig {
    double tol = 1e-8;
    int max_iter = 500;
    double mixing = 0.5;
    double eig_tol = 1e-8;
    int krylov_restart = 30;
    bool coulomb_projection = true;

    void validate() const;
};

/// Iterative solver failure; carries the residual history.
class SolverDiverged : public Error {
public:
    SolverDiverged(const std::string& message, std::vector<double> history, std::string suggestion = {});

    const std::vector<double>& history() const noexcept { return history_; }
    const std::string& suggestion() const noexcept { return suggestion_; }

private:
    std::vector<double> history_;
    std::string suggestion_;
};

// --- vector potential -----------------------------------------------------

struct VectorPotentialSolution {
    VectorField A;
    double residual = 0.0;                    // relative residual of the returned A, recomputed
    double solver_estimate = 0.0;             // the iterative solver's own residual estimate
    double residual_before_projection = 0.0;  // relative residual of the Krylov solution
    double gauge_residual = 0.0;              // max |div A| before the Coulomb projection
    double gauge_residual_projected = 0.0;    // max |div A| of the returned A
    int iterations = 0;
    bool used_fixed_point_fallback = false;
    std::vector<double> history;
};

/// (lap - lambda0) A - grad R x A.
VectorField vector_potential_operator(const ScalarField& R, const VectorField& A, double lambda0);

/// (c/q) Gamma . grad S with Gamma from gamma_matrix(R, lambda0, floor).
VectorField vector_potential_rhs(const ScalarField& R, const VectorField& gradS, double lambda0,
                                 const PhysicalParams& params, double density_floor);

/// ||op(A) - rhs|| / ||rhs|| (or ||op(A)|| when rhs == 0).
double vector_potential_residual(const ScalarField& R, const VectorField& A, double lambda0,
                                 const VectorField& rhs);

/// Solves op(A) = rhs for an explicit right-hand side with restarted GMRES,
/// falling back to a damped fixed-point split when lambda0 > 0. Applies the
/// Coulomb projection when cfg.coulomb_projection is set.
VectorPotentialSolution solve_vector_potential_system(const ScalarField& R, const VectorField& rhs, double lambda0,
                                                      const SolverConfig& cfg);

/// Builds the right-hand side from (R, grad S) and solves. Throws ChargeZero for q == 0.
VectorPotentialSolution solve_vector_potential(const ScalarField& R, const VectorField& gradS, double lambda0,
                                               const PhysicalParams& params, const SolverConfig& cfg);

/// A - grad phi with div grad phi = div A, using zero-ghost central stencils.
VectorField coulomb_project(const VectorField& A, double tol, int max_iter);

struct ExternalCurrent {
    VectorField J_e;
    std::optional<double> omega;  // c sqrt(lambda0) when lambda0 >= 0
    bool evanescent = false;      // lambda0 < 0
};

/// J_e = grad R x A + (c/q) Gamma . grad S.
ExternalCurrent external_current(const ScalarField& R, const VectorField& gradS, const VectorField& A,
                                 double lambda0, const PhysicalParams& params);

// --- magnetic Schrodinger operator ---------------------------------------

class MagneticHamiltonian {
public:
    MagneticHamiltonian(const ScalarField& U, const VectorField& A, const PhysicalParams& params);

    const Grid& grid() const noexcept { return grid_; }
    void apply(const std::vector<Complex>& in, std::vector<Complex>& out) const;
    ComplexField apply(const ComplexField& psi) const;

private:
    Grid grid_;
    std::vector<double> potential_;  // U + (q^2/2mc^2)|A|^2
    std::vector<Vec3> A_;
    bool has_vector_potential_ = false;
    double kinetic_ = 0.0;           // hbar^2 / 2m
    double coupling_ = 0.0;          // q hbar / 2mc
};

struct GroundState {
    ComplexField psi;  // sum |psi|^2 dV = 1, largest entry real positive
    double energy = 0.0;
    double residual = 0.0;  // ||H psi - E psi|| / ||psi||
    int restarts = 0;
    int matvecs = 0;
};

/// Lowest eigenpair by restarted Lanczos with full reorthogonalisation.
/// Seeded with `initial` when given, otherwise with a positive, nearly uniform
/// state carrying a fixed small ripple.
/// Throws EigenSolverFailed when eig_tol is not reached in max_iter restarts.
GroundState schrodinger_ground_state(const ScalarField& U, const VectorField& A, const PhysicalParams& params,
                                     const SolverConfig& cfg,
                                     const std::optional<ComplexField>& initial = std::nullopt);

// --- self-consistent loop -------------------------------------------------

struct ControlSolution {
    ComplexField psi;
    double energy = 0.0;
    VectorField A;
    VectorField B;
    VectorField J_e;
    int iterations = 0;
    std::map<std::string, double> final_residuals;
    std::vector<double> fixed_point_history;  // relative change of A per outer iteration
    std::vector<double> energy_history;
};

/// True when the last four entries of a residual history alternate between two
/// levels above tol (a period-2 cycle of the mixed fixed-point map).
bool detect_period_two_cycle(const std::vector<double>& history, double tol);

/// L2 norm of the vector potential that carries one phase winding across the
/// longest box side, |c/q| (2 pi / L) sqrt(V). Relative changes of A are measured
/// against max(||A||, this scale) so that a potential decaying to zero converges.
double vector_potential_scale(const Grid& g, const PhysicalParams& params);

/// Alternates ground-state and vector-potential solves with linear mixing,
/// starting from A_init (zero when absent).
ControlSolution self_consistent_solve(const ScalarField& U, double lambda0, const PhysicalParams& params,
                                      const SolverConfig& cfg,
                                      const std::optional<VectorField>& A_init = std::nullopt);

}  // namespace qhydro
