#include "krylov.hpp"

#include <cmath>

namespace qhydro::krylov {

double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

Result gmres(const LinearOperator& A, const Vector& b, Vector& x, double tol, int restart, int max_iter) {
    Result res;
    const std::size_t n = b.size();
    const double bnorm = norm(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    const int m = restart;
    std::vector<Vector> V(m + 1, Vector(n));
    std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m), sn(m), g(m + 1);
    Vector w(n);

    while (res.iterations < max_iter) {
        A(x, w);
        for (std::size_t i = 0; i < n; ++i) V[0][i] = b[i] - w[i];
        double beta = norm(V[0]);
        res.relative_residual = beta / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            return res;
        }
        for (std::size_t i = 0; i < n; ++i) V[0][i] /= beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        int j = 0;
        for (; j < m && res.iterations < max_iter; ++j) {
            ++res.iterations;
            A(V[j], w);
            // modified Gram-Schmidt, applied twice
            for (int pass = 0; pass < 2; ++pass) {
                for (int i = 0; i <= j; ++i) {
                    const double h = dot(w, V[i]);
                    if (pass == 0) H[i][j] = h; else H[i][j] += h;
                    for (std::size_t t = 0; t < n; ++t) w[t] -= h * V[i][t];
                }
            }
            const double hn = norm(w);
            H[j + 1][j] = hn;
            for (int i = 0; i < j; ++i) {
                const double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
                H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
                H[i][j] = t;
            }
            const double denom = std::hypot(H[j][j], H[j + 1][j]);
            if (denom == 0.0) {
                res.breakdown = true;
                return res;
            }
            cs[j] = H[j][j] / denom;
            sn[j] = H[j + 1][j] / denom;
            H[j][j] = denom;
            H[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            res.relative_residual = std::abs(g[j + 1]) / bnorm;
            res.history.push_back(res.relative_residual);
            if (res.relative_residual <= tol) {
                ++j;
                break;
            }
            if (hn == 0.0) {
                // happy breakdown: the Krylov space is invariant
                ++j;
                break;
            }
            for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = w[t] / hn;
        }
        // back substitution for the least-squares update
        std::vector<double> y(j, 0.0);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int k = i + 1; k < j; ++k) s -= H[i][k] * y[k];
            y[i] = s / H[i][i];
        }
        for (int i = 0; i < j; ++i) {
            for (std::size_t t = 0; t < n; ++t) x[t] += y[i] * V[i][t];
        }
    }
    // final true residual
    A(x, w);
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r += (b[i] - w[i]) * (b[i] - w[i]);
    res.relative_residual = std::sqrt(r) / bnorm;
    res.converged = res.relative_residual <= tol;
    return res;
}

Result conjugate_gradient(const LinearOperator& A, const Vector& b, Vector& x, double tol, int max_iter) {
    Result res;
    const std::size_t n = b.size();
    const double bnorm = norm(b);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        res.converged = true;
        return res;
    }
    Vector r(n), p(n), q(n);
    A(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    p = r;
    double rr = dot(r, r);
    while (res.iterations < max_iter) {
        res.relative_residual = std::sqrt(rr) / bnorm;
        if (res.relative_residual <= tol) {
            res.converged = true;
            return res;
        }
        ++res.iterations;
        A(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
            res.breakdown = true;
            return res;
        }
        const double alpha = rr / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        const double rr_new = dot(r, r);
        res.history.push_back(std::sqrt(rr_new) / bnorm);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
    res.relative_residual = std::sqrt(rr) / bnorm;
    res.converged = res.relative_residual <= tol;
    return res;
}

}  // namespace qhydro::krylov
