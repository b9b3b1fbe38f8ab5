#pragma once

// Structured 3D grids, grid-shaped fields and second-order finite-difference
// operators. Every other module works on these types.
//
// Storage order is row-major with z fastest: index = (i * ny + j) * nz + k.
// Point (i, j, k) sits at origin + (i, j, k) * spacing.
//
// Edge handling on Dirichlet0 grids:
//   * first derivatives (gradient, divergence, curl, hessian) use one-sided
//     second-order stencils at the edges unless EdgeRule::ZeroGhost is asked for;
//   * laplacian / vector_laplacian treat values outside the grid as zero, i.e.
//     they are the homogeneous-Dirichlet operator the solvers need.

#include "qhydro/error.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace qhydro {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Complex = std::complex<double>;

enum class Boundary { Periodic, Dirichlet0 };

inline constexpr int kMinGridPoints = 8;
inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{4} << 30;  // 4 GiB

struct Grid {
    std::array<int, 3> dims{};
    std::array<double, 3> spacing{};
    std::array<double, 3> origin{};
    Boundary boundary = Boundary::Periodic;

    Grid(std::array<int, 3> dims, std::array<double, 3> spacing,
         std::array<double, 3> origin = {0.0, 0.0, 0.0}, Boundary boundary = Boundary::Periodic);

    /// n^3 points covering [lo, lo + length) per axis.
    static Grid cube(int n, double length, double lo, Boundary boundary);

    std::size_t size() const noexcept {
        return std::size_t(dims[0]) * std::size_t(dims[1]) * std::size_t(dims[2]);
    }
    std::size_t index(int i, int j, int k) const noexcept {
        return (std::size_t(i) * std::size_t(dims[1]) + std::size_t(j)) * std::size_t(dims[2]) +
               std::size_t(k);
    }
    std::size_t stride(int axis) const noexcept {
        return axis == 0 ? std::size_t(dims[1]) * std::size_t(dims[2])
                         : axis == 1 ? std::size_t(dims[2]) : std::size_t{1};
    }
    std::array<int, 3> coords(std::size_t idx) const noexcept;
    Vec3 position(int i, int j, int k) const noexcept {
        return {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
    }
    Vec3 position(std::size_t idx) const noexcept {
        const auto c = coords(idx);
        return position(c[0], c[1], c[2]);
    }
    double cell_volume() const noexcept { return spacing[0] * spacing[1] * spacing[2]; }
    double min_spacing() const noexcept;

    /// Throws InvalidGrid when size() * bytes_per_point exceeds budget_bytes.
    void check_memory_budget(std::size_t bytes_per_point,
                             std::size_t budget_bytes = kDefaultMemoryBudget) const;

    bool operator==(const Grid&) const = default;
};

namespace detail {

template <class T>
T zero_value() {
    if constexpr (std::is_same_v<T, Vec3>) {
        return Vec3::Zero();
    } else if constexpr (std::is_same_v<T, Mat3>) {
        return Mat3::Zero();
    } else {
        return T{};
    }
}

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const Complex& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }
inline bool is_finite(const Vec3& v) { return v.allFinite(); }
inline bool is_finite(const Mat3& v) { return v.allFinite(); }

inline double squared_norm(double v) { return v * v; }
inline double squared_norm(const Complex& v) { return std::norm(v); }
inline double squared_norm(const Vec3& v) { return v.squaredNorm(); }
inline double squared_norm(const Mat3& v) { return v.squaredNorm(); }

}  // namespace detail

/// Immutable grid-shaped array. Construction rejects non-finite values.
template <class T>
class Field {
public:
    using value_type = T;

    explicit Field(Grid grid) : grid_(std::move(grid)), values_(grid_.size(), detail::zero_value<T>()) {}

    Field(Grid grid, std::vector<T> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw Error(ErrorCode::InvalidField, "value count " + std::to_string(values_.size()) +
                                                     " does not match grid size " +
                                                     std::to_string(grid_.size()));
        }
        for (std::size_t p = 0; p < values_.size(); ++p) {
            if (!detail::is_finite(values_[p])) {
                throw Error(ErrorCode::InvalidField,
                            "non-finite value at point " + std::to_string(p));
            }
        }
    }

    static Field uniform(const Grid& grid, const T& value) {
        return Field(grid, std::vector<T>(grid.size(), value));
    }

    /// Evaluates fn(position) at every grid point.
    template <class Fn>
    static Field generate(const Grid& grid, Fn&& fn) {
        using Result = std::decay_t<std::invoke_result_t<Fn&, const Vec3&>>;
        static_assert(std::is_same_v<Result, T> || !std::is_base_of_v<Eigen::EigenBase<Result>, Result>,
                      "generator must return a concrete value, not a lazy Eigen expression");
        std::vector<T> values(grid.size());
        for (std::size_t p = 0; p < values.size(); ++p) values[p] = fn(grid.position(p));
        return Field(grid, std::move(values));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const T> values() const noexcept { return values_; }
    const T& operator[](std::size_t p) const noexcept { return values_[p]; }
    const T& at(int i, int j, int k) const noexcept { return values_[grid_.index(i, j, k)]; }

private:
    Grid grid_;
    std::vector<T> values_;
};

using ScalarField = Field<double>;
using VectorField = Field<Vec3>;
using ComplexField = Field<Complex>;
using Matrix3Field = Field<Mat3>;

/// Throws GridMismatch unless both grids are identical.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

// --- pointwise arithmetic -------------------------------------------------

template <class T>
Field<T> operator+(const Field<T>& a, const Field<T>& b) {
    require_same_grid(a.grid(), b.grid(), "operator+");
    std::vector<T> out(a.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = a[p] + b[p];
    return Field<T>(a.grid(), std::move(out));
}

template <class T>
Field<T> operator-(const Field<T>& a, const Field<T>& b) {
    require_same_grid(a.grid(), b.grid(), "operator-");
    std::vector<T> out(a.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = a[p] - b[p];
    return Field<T>(a.grid(), std::move(out));
}

template <class T>
Field<T> operator*(double s, const Field<T>& a) {
    std::vector<T> out(a.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = s * a[p];
    return Field<T>(a.grid(), std::move(out));
}

/// Scalar field times vector field, point by point.
VectorField scale(const ScalarField& s, const VectorField& v);
/// Pointwise a x b.
VectorField cross(const VectorField& a, const VectorField& b);
/// Pointwise Euclidean length.
ScalarField magnitude(const VectorField& v);

// --- norms ----------------------------------------------------------------

/// Discrete L2 norm sqrt(sum |v|^2 dV).
template <class T>
double norm_l2(const Field<T>& f) {
    double acc = 0.0;
    for (const auto& v : f.values()) acc += detail::squared_norm(v);
    return std::sqrt(acc * f.grid().cell_volume());
}

/// max over points of |v|.
template <class T>
double norm_max(const Field<T>& f) {
    double m = 0.0;
    for (const auto& v : f.values()) m = std::max(m, std::sqrt(detail::squared_norm(v)));
    return m;
}

/// A pointwise residual magnitude together with its max and L2 norms.
struct NormedResidual {
    ScalarField pointwise;
    double max = 0.0;
    double l2 = 0.0;
};

/// Builds a NormedResidual from a vector residual; points with mask == 0 are zeroed.
NormedResidual make_residual(const VectorField& r, std::span<const std::uint8_t> mask = {});
NormedResidual make_residual(const ScalarField& r, std::span<const std::uint8_t> mask = {});

// --- differential operators -----------------------------------------------

enum class EdgeRule {
    OneSided,   // second-order one-sided stencils at Dirichlet edges
    ZeroGhost,  // values beyond Dirichlet edges are zero
};

/// Central first derivative along one axis (0 = x, 1 = y, 2 = z).
template <class T>
Field<T> partial(const Field<T>& f, int axis, EdgeRule edges = EdgeRule::OneSided) {
    const Grid& g = f.grid();
    const int n = g.dims[axis];
    const std::size_t s = g.stride(axis);
    const double inv2h = 0.5 / g.spacing[axis];
    const bool periodic = g.boundary == Boundary::Periodic;
    const auto v = f.values();
    std::vector<T> out(f.size());
    for (int i = 0; i < g.dims[0]; ++i) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int k = 0; k < g.dims[2]; ++k) {
                const int c = axis == 0 ? i : axis == 1 ? j : k;
                const std::size_t p = g.index(i, j, k);
                if (c > 0 && c < n - 1) {
                    out[p] = inv2h * (v[p + s] - v[p - s]);
                } else if (periodic) {
                    const std::size_t up = c == n - 1 ? p - (n - 1) * s : p + s;
                    const std::size_t dn = c == 0 ? p + (n - 1) * s : p - s;
                    out[p] = inv2h * (v[up] - v[dn]);
                } else if (edges == EdgeRule::ZeroGhost) {
                    out[p] = c == 0 ? T(inv2h * v[p + s]) : T(-inv2h * v[p - s]);
                } else if (c == 0) {
                    // (-3 f0 + 4 f1 - f2) / 2h written in differences so constants give exact zeros
                    out[p] = inv2h * (3.0 * (v[p + s] - v[p]) - (v[p + 2 * s] - v[p + s]));
                } else {
                    out[p] = inv2h * (3.0 * (v[p] - v[p - s]) - (v[p - s] - v[p - 2 * s]));
                }
            }
        }
    }
    return Field<T>(g, std::move(out));
}

/// Compact three-point second derivative along one axis.
template <class T>
Field<T> second_partial(const Field<T>& f, int axis, EdgeRule edges) {
    const Grid& g = f.grid();
    const int n = g.dims[axis];
    const std::size_t s = g.stride(axis);
    const double invh2 = 1.0 / (g.spacing[axis] * g.spacing[axis]);
    const bool periodic = g.boundary == Boundary::Periodic;
    const auto v = f.values();
    std::vector<T> out(f.size());
    for (int i = 0; i < g.dims[0]; ++i) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int k = 0; k < g.dims[2]; ++k) {
                const int c = axis == 0 ? i : axis == 1 ? j : k;
                const std::size_t p = g.index(i, j, k);
                if (c > 0 && c < n - 1) {
                    out[p] = invh2 * (v[p + s] - 2.0 * v[p] + v[p - s]);
                } else if (periodic) {
                    const std::size_t up = c == n - 1 ? p - (n - 1) * s : p + s;
                    const std::size_t dn = c == 0 ? p + (n - 1) * s : p - s;
                    out[p] = invh2 * (v[up] - 2.0 * v[p] + v[dn]);
                } else if (edges == EdgeRule::ZeroGhost) {
                    out[p] = invh2 * ((c == 0 ? v[p + s] : v[p - s]) - 2.0 * v[p]);
                } else if (c == 0) {
                    // (2 f0 - 5 f1 + 4 f2 - f3) / h^2 in difference form
                    out[p] = invh2 * (-2.0 * (v[p + s] - v[p]) + 3.0 * (v[p + 2 * s] - v[p + s]) -
                                      (v[p + 3 * s] - v[p + 2 * s]));
                } else {
                    out[p] = invh2 * (-2.0 * (v[p - s] - v[p]) + 3.0 * (v[p - 2 * s] - v[p - s]) -
                                      (v[p - 3 * s] - v[p - 2 * s]));
                }
            }
        }
    }
    return Field<T>(g, std::move(out));
}

VectorField gradient(const ScalarField& f, EdgeRule edges = EdgeRule::OneSided);
ScalarField divergence(const VectorField& v, EdgeRule edges = EdgeRule::OneSided);
VectorField curl(const VectorField& v, EdgeRule edges = EdgeRule::OneSided);
/// 7-point Laplacian; zero ghost values beyond Dirichlet0 edges.
ScalarField laplacian(const ScalarField& f);
/// Componentwise 7-point Laplacian; zero ghost values beyond Dirichlet0 edges.
VectorField vector_laplacian(const VectorField& v);
/// Symmetric matrix of second derivatives. Diagonal entries use the compact
/// three-point stencil, mixed entries nest two first-derivative stencils.
Matrix3Field hessian(const ScalarField& f);
/// (div T)_j = sum_i d_i T_ij.
VectorField tensor_divergence(const Matrix3Field& t);

/// Antisymmetric M with M * b == a x b.
Mat3 cross_matrix(const Vec3& a);

}  // namespace qhydro
