#pragma once

// Matrix-free Krylov kernels over flat real vectors.

#include <functional>
#include <vector>

namespace qhydro::krylov {

using Vector = std::vector<double>;
/// y = A x; y is pre-sized.
using LinearOperator = std::function<void(const Vector& x, Vector& y)>;

struct Result {
    bool converged = false;
    bool breakdown = false;
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> history;  // relative residual per iteration
};

double dot(const Vector& a, const Vector& b);
double norm(const Vector& a);

/// Restarted GMRES(restart) with Givens rotations; x holds the initial guess.
Result gmres(const LinearOperator& A, const Vector& b, Vector& x, double tol, int restart, int max_iter);

/// Conjugate gradients for symmetric positive (semi)definite A.
Result conjugate_gradient(const LinearOperator& A, const Vector& b, Vector& x, double tol, int max_iter);

}  // namespace qhydro::krylov
