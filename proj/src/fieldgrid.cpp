#include "qhydro/fieldgrid.hpp"

#include <sstream>

namespace qhydro {

Grid::Grid(std::array<int, 3> dims_, std::array<double, 3> spacing_, std::array<double, 3> origin_,
           Boundary boundary_)
    : dims(dims_), spacing(spacing_), origin(origin_), boundary(boundary_) {
    for (int a = 0; a < 3; ++a) {
        if (dims[a] < kMinGridPoints) {
            throw Error(ErrorCode::InvalidGrid, "axis " + std::to_string(a) + " has " +
                                                    std::to_string(dims[a]) + " points, need at least " +
                                                    std::to_string(kMinGridPoints));
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw Error(ErrorCode::InvalidGrid, "axis " + std::to_string(a) + " spacing must be positive");
        }
        if (!std::isfinite(origin[a])) {
            throw Error(ErrorCode::InvalidGrid, "origin must be finite");
        }
    }
}

Grid Grid::cube(int n, double length, double lo, Boundary boundary) {
    const double h = length / n;
    return Grid({n, n, n}, {h, h, h}, {lo, lo, lo}, boundary);
}

std::array<int, 3> Grid::coords(std::size_t idx) const noexcept {
    const int k = int(idx % std::size_t(dims[2]));
    idx /= std::size_t(dims[2]);
    const int j = int(idx % std::size_t(dims[1]));
    const int i = int(idx / std::size_t(dims[1]));
    return {i, j, k};
}

double Grid::min_spacing() const noexcept {
    return std::min({spacing[0], spacing[1], spacing[2]});
}

void Grid::check_memory_budget(std::size_t bytes_per_point, std::size_t budget_bytes) const {
    const std::size_t n = size();
    if (bytes_per_point != 0 && n > budget_bytes / bytes_per_point) {
        std::ostringstream msg;
        msg << "grid of " << n << " points at " << bytes_per_point << " bytes/point exceeds the "
            << (budget_bytes >> 20) << " MiB memory budget";
        throw Error(ErrorCode::InvalidGrid, msg.str());
    }
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw Error(ErrorCode::GridMismatch, std::string(what) + ": fields live on different grids");
}

VectorField scale(const ScalarField& s, const VectorField& v) {
    require_same_grid(s.grid(), v.grid(), "scale");
    std::vector<Vec3> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = s[p] * v[p];
    return VectorField(v.grid(), std::move(out));
}

VectorField cross(const VectorField& a, const VectorField& b) {
    require_same_grid(a.grid(), b.grid(), "cross");
    std::vector<Vec3> out(a.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = a[p].cross(b[p]);
    return VectorField(a.grid(), std::move(out));
}

ScalarField magnitude(const VectorField& v) {
    std::vector<double> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = v[p].norm();
    return ScalarField(v.grid(), std::move(out));
}

namespace {

NormedResidual finish_residual(const Grid& g, std::vector<double> mag, std::span<const std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != mag.size()) {
        throw Error(ErrorCode::GridMismatch, "residual mask size does not match grid");
    }
    double mx = 0.0;
    double acc = 0.0;
    for (std::size_t p = 0; p < mag.size(); ++p) {
        if (!mask.empty() && mask[p] == 0) mag[p] = 0.0;
        mx = std::max(mx, mag[p]);
        acc += mag[p] * mag[p];
    }
    const double l2 = std::sqrt(acc * g.cell_volume());
    return NormedResidual{ScalarField(g, std::move(mag)), mx, l2};
}

}  // namespace

NormedResidual make_residual(const VectorField& r, std::span<const std::uint8_t> mask) {
    std::vector<double> mag(r.size());
    for (std::size_t p = 0; p < mag.size(); ++p) mag[p] = r[p].norm();
    return finish_residual(r.grid(), std::move(mag), mask);
}

NormedResidual make_residual(const ScalarField& r, std::span<const std::uint8_t> mask) {
    std::vector<double> mag(r.size());
    for (std::size_t p = 0; p < mag.size(); ++p) mag[p] = std::abs(r[p]);
    return finish_residual(r.grid(), std::move(mag), mask);
}

namespace {

ScalarField component(const VectorField& v, int c) {
    std::vector<double> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = v[p][c];
    return ScalarField(v.grid(), std::move(out));
}

}  // namespace

VectorField gradient(const ScalarField& f, EdgeRule edges) {
    const auto dx = partial(f, 0, edges);
    const auto dy = partial(f, 1, edges);
    const auto dz = partial(f, 2, edges);
    std::vector<Vec3> out(f.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = Vec3(dx[p], dy[p], dz[p]);
    return VectorField(f.grid(), std::move(out));
}

ScalarField divergence(const VectorField& v, EdgeRule edges) {
    const auto dx = partial(component(v, 0), 0, edges);
    const auto dy = partial(component(v, 1), 1, edges);
    const auto dz = partial(component(v, 2), 2, edges);
    std::vector<double> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = dx[p] + dy[p] + dz[p];
    return ScalarField(v.grid(), std::move(out));
}

VectorField curl(const VectorField& v, EdgeRule edges) {
    const auto dx = partial(v, 0, edges);
    const auto dy = partial(v, 1, edges);
    const auto dz = partial(v, 2, edges);
    std::vector<Vec3> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = Vec3(dy[p][2] - dz[p][1], dz[p][0] - dx[p][2], dx[p][1] - dy[p][0]);
    }
    return VectorField(v.grid(), std::move(out));
}

ScalarField laplacian(const ScalarField& f) {
    const auto a = second_partial(f, 0, EdgeRule::ZeroGhost);
    const auto b = second_partial(f, 1, EdgeRule::ZeroGhost);
    const auto c = second_partial(f, 2, EdgeRule::ZeroGhost);
    std::vector<double> out(f.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = a[p] + b[p] + c[p];
    return ScalarField(f.grid(), std::move(out));
}

VectorField vector_laplacian(const VectorField& v) {
    const auto a = second_partial(v, 0, EdgeRule::ZeroGhost);
    const auto b = second_partial(v, 1, EdgeRule::ZeroGhost);
    const auto c = second_partial(v, 2, EdgeRule::ZeroGhost);
    std::vector<Vec3> out(v.size());
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = a[p] + b[p] + c[p];
    return VectorField(v.grid(), std::move(out));
}

Matrix3Field hessian(const ScalarField& f) {
    const std::array<ScalarField, 3> first{partial(f, 0), partial(f, 1), partial(f, 2)};
    const std::array<ScalarField, 3> diag{second_partial(f, 0, EdgeRule::OneSided),
                                          second_partial(f, 1, EdgeRule::OneSided),
                                          second_partial(f, 2, EdgeRule::OneSided)};
    const ScalarField dxy = partial(first[0], 1);
    const ScalarField dyx = partial(first[1], 0);
    const ScalarField dxz = partial(first[0], 2);
    const ScalarField dzx = partial(first[2], 0);
    const ScalarField dyz = partial(first[1], 2);
    const ScalarField dzy = partial(first[2], 1);
    std::vector<Mat3> out(f.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        const double xy = 0.5 * (dxy[p] + dyx[p]);
        const double xz = 0.5 * (dxz[p] + dzx[p]);
        const double yz = 0.5 * (dyz[p] + dzy[p]);
        Mat3 m;
        m << diag[0][p], xy, xz,
             xy, diag[1][p], yz,
             xz, yz, diag[2][p];
        out[p] = m;
    }
    return Matrix3Field(f.grid(), std::move(out));
}

VectorField tensor_divergence(const Matrix3Field& t) {
    const auto dx = partial(t, 0);
    const auto dy = partial(t, 1);
    const auto dz = partial(t, 2);
    std::vector<Vec3> out(t.size());
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = (dx[p].row(0) + dy[p].row(1) + dz[p].row(2)).transpose();
    }
    return VectorField(t.grid(), std::move(out));
}

Mat3 cross_matrix(const Vec3& a) {
    Mat3 m;
    m << 0.0, -a.z(), a.y(),
         a.z(), 0.0, -a.x(),
         -a.y(), a.x(), 0.0;
    return m;
}

}  // namespace qhydro
