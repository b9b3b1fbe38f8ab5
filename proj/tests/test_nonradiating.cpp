#include "doctest.h"

#include "qhydro/nonradiating.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace qhydro;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Grid periodic_box(int n) { return Grid::cube(n, kTwoPi, 0.0, Boundary::Periodic); }

VectorField abc_field(const Grid& g) {
    return VectorField::generate(g, [](const Vec3& r) {
        return Vec3(std::sin(r.z()) + std::cos(r.y()), std::sin(r.x()) + std::cos(r.z()),
                    std::sin(r.y()) + std::cos(r.x()));
    });
}

// Roots of the monic cubic mu^3 + c2 mu^2 + c1 mu + c0 by Durand-Kerner
// iteration followed by Newton polishing; independent of the closed form.
std::array<Complex, 3> cubic_roots(double c2, double c1, double c0) {
    auto p = [&](Complex z) { return ((z + c2) * z + c1) * z + c0; };
    auto dp = [&](Complex z) { return (3.0 * z + 2.0 * c2) * z + c1; };
    const double radius = 1.0 + std::max({std::abs(c2), std::abs(c1), std::abs(c0)});
    std::array<Complex, 3> z;
    for (int i = 0; i < 3; ++i) z[i] = radius * std::pow(Complex(0.4, 0.9), i);
    for (int it = 0; it < 500; ++it) {
        double move = 0.0;
        for (int i = 0; i < 3; ++i) {
            Complex den(1.0, 0.0);
            for (int j = 0; j < 3; ++j)
                if (j != i) den *= z[i] - z[j];
            const Complex step = p(z[i]) / den;
            z[i] -= step;
            move = std::max(move, std::abs(step));
        }
        if (move < 1e-15 * radius) break;
    }
    for (auto& r : z) {
        for (int it = 0; it < 3; ++it) {
            const Complex d = dp(r);
            if (std::abs(d) < 1e-300) break;
            r -= p(r) / d;
        }
    }
    return z;
}

// Greedy matching distance between two unordered triples.
double triple_distance(std::array<Complex, 3> a, std::array<Complex, 3> b) {
    double worst = 0.0;
    std::array<bool, 3> used{};
    for (const auto& x : a) {
        int best = -1;
        double d = INFINITY;
        for (int j = 0; j < 3; ++j) {
            if (!used[j] && std::abs(x - b[j]) < d) {
                d = std::abs(x - b[j]);
                best = j;
            }
        }
        used[best] = true;
        worst = std::max(worst, d);
    }
    return worst;
}

std::array<Complex, 3> eigen_solver_values(const Mat3& G) {
    Eigen::EigenSolver<Mat3> es(G, false);
    const auto v = es.eigenvalues();
    return {v[0], v[1], v[2]};
}

std::array<Complex, 3> as_array(const Eigen3c& e) { return {e[0], e[1], e[2]}; }

}  // namespace

TEST_CASE("radiation condition residual") {
    const Grid g = periodic_box(64);
    const auto J = abc_field(g);
    const double jn = norm_l2(J);
    CHECK(radiation_condition_residual(J, 1.0).l2 < 1e-2 * jn);
    CHECK(radiation_condition_residual(J, 2.0).l2 == doctest::Approx(3.0 * jn).epsilon(0.01));
    const auto zero = radiation_condition_residual(VectorField(g), 1.7);
    CHECK(zero.l2 == 0.0);
    CHECK(norm_max(zero.pointwise) == 0.0);
}

TEST_CASE("expanded Beltrami residual") {
    const Grid g = periodic_box(12);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec3> v(g.size());
    for (auto& x : v) x = Vec3(n(rng), n(rng), n(rng));
    const VectorField J(g, v);

    SUBCASE("lambda = k makes both terms vanish") {
        const auto r = beltrami_expanded_residual(J, LambdaField::constant(g, 1.3), 1.3);
        CHECK(r.residual.l2 == 0.0);
        CHECK(norm_max(r.beta) == 0.0);
    }
    SUBCASE("unit current with lambda = 1, k = 2") {
        std::vector<Vec3> unit(v);
        for (auto& x : unit) x.normalize();
        const auto r = beltrami_expanded_residual(VectorField(g, unit), LambdaField::constant(g, 1.0), 2.0);
        for (std::size_t p = 0; p < g.size(); ++p) {
            CHECK(r.residual.pointwise[p] == doctest::Approx(3.0).epsilon(1e-14));
            CHECK(r.beta[p] == -3.0);
        }
    }
    SUBCASE("lambda = z vanishes on the beta = 0 plane only for J along z") {
        const Grid d = Grid::cube(9, 2.0, -1.0, Boundary::Dirichlet0);
        const LambdaField lam(ScalarField::generate(d, [](const Vec3& r) { return r.z(); }));
        const double k = 0.5;  // beta = z^2 - 1/4 vanishes at z = 0.5
        const auto along = VectorField::uniform(d, Vec3(0, 0, 2));
        const auto across = VectorField::uniform(d, Vec3(1, 0, 0));
        const auto ra = beltrami_expanded_residual(along, lam, k);
        const auto rc = beltrami_expanded_residual(across, lam, k);
        for (std::size_t p = 0; p < d.size(); ++p) {
            const Vec3 r = d.position(p);
            const double beta = r.z() * r.z() - k * k;
            // grad lambda = z-hat exactly (one-sided edges are exact for linear fields)
            CHECK(ra.residual.pointwise[p] == doctest::Approx(std::abs(2.0 * beta)).epsilon(1e-12));
            CHECK(rc.residual.pointwise[p] == doctest::Approx(std::hypot(beta, 1.0)).epsilon(1e-12));
            if (std::abs(r.z() - k) < 1e-12) {
                CHECK(ra.residual.pointwise[p] < 1e-14);
                CHECK(rc.residual.pointwise[p] == doctest::Approx(1.0));
            }
        }
    }
    SUBCASE("grid mismatch") {
        try {
            beltrami_expanded_residual(J, LambdaField::constant(periodic_box(8), 1.0), 1.0);
            FAIL("expected GridMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::GridMismatch);
        }
    }
}

TEST_CASE("G matrix") {
    CHECK(g_matrix(Vec3::Zero(), 2.0).isApprox(2.0 * Mat3::Identity()));
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    CHECK(g_matrix(Vec3(0, 0, 1), 0.0) == expected);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const Vec3 a(n(rng), n(rng), n(rng)), v(n(rng), n(rng), n(rng));
        const double beta = n(rng);
        const Vec3 direct = a.cross(v) + beta * v;
        CHECK((g_matrix(a, beta) * v - direct).norm() <= 1e-15 * std::max(1.0, direct.norm()) * 4);
    }
}

TEST_CASE("G eigenvalues: documented cases") {
    auto close = [](const Eigen3c& got, std::array<Complex, 3> want) {
        return triple_distance(as_array(got), want) < 1e-14;
    };
    const Complex i(0, 1);
    CHECK(close(g_eigenvalues(g_matrix(Vec3(0, 0, 1), 0.0)), {0.0, i, -i}));
    CHECK(close(g_eigenvalues(g_matrix(Vec3::Zero(), 2.0)), {2.0, 2.0, 2.0}));
    CHECK(close(g_eigenvalues(g_matrix(Vec3(3, 4, 0), 1.0)), {1.0, 1.0 + 5.0 * i, 1.0 - 5.0 * i}));

    const auto claimed = claimed_g_eigenvalues(Vec3(3, 4, 0));
    CHECK(close(claimed, {0.0, std::sqrt(26.0) * i, -std::sqrt(26.0) * i}));
    CHECK(g_norm(Vec3(3, 4, 0), 12.0) == doctest::Approx(13.0));
}

TEST_CASE("G eigenvalues against a polynomial root finder and a general eigensolver") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> logscale(-2.0, 2.0);
    for (int t = 0; t < 1000; ++t) {
        const double s = std::pow(10.0, logscale(rng));
        const Vec3 a = s * Vec3(n(rng), n(rng), n(rng));
        const double beta = s * n(rng);
        const Mat3 G = g_matrix(a, beta);
        const auto closed = as_array(g_eigenvalues(G));

        // det(mu I - G) = mu^3 - tr(G) mu^2 + m2 mu - det(G), with m2 the sum of principal 2x2 minors
        const double tr = G.trace();
        const double m2 = G(0, 0) * G(1, 1) - G(0, 1) * G(1, 0) + G(0, 0) * G(2, 2) - G(0, 2) * G(2, 0) +
                          G(1, 1) * G(2, 2) - G(1, 2) * G(2, 1);
        const auto roots = cubic_roots(-tr, m2, -G.determinant());
        const double scale = std::max(1.0, G.norm());
        CAPTURE(t);
        CHECK(triple_distance(closed, roots) <= 1e-12 * scale);
        const auto numeric = eigen_solver_values(G);
        CHECK(triple_distance(closed, numeric) <= 1e-12 * scale);
        for (const auto& mu : numeric) CHECK(std::abs(mu.real() - beta) <= 1e-12 * scale);
        for (const auto& mu : closed) CHECK(std::abs(mu.real() - beta) <= 4e-16 * scale);
    }
}

TEST_CASE("classifier: documented cases") {
    const Grid g = periodic_box(64);
    const auto J = abc_field(g);
    const auto lam = LambdaField::constant(g, 1.0);
    const double jn = norm_l2(J);

    SUBCASE("k = 1 satisfies the radiation condition") {
        const auto rep = classify_nonradiating(J, lam, 1.0);
        CHECK(rep.condition22_residual < 1e-2 * jn);
        CHECK(rep.condition24_residual < 1e-2 * jn);
        CHECK(rep.J_norm == doctest::Approx(jn));
        CHECK_FALSE(rep.classified_nonradiating);
        CHECK(rep.flux_points > 0);
        // beta = 0 and grad lambda = 0: G vanishes, every point is in the kernel
        CHECK(rep.kernel_alignment == 1.0);
        CHECK(std::string(RadiationReport::framing).find("non-radiating") != std::string::npos);
    }
    SUBCASE("k = 3 violates it") {
        const auto rep = classify_nonradiating(J, lam, 3.0);
        CHECK(rep.condition22_residual == doctest::Approx(8.0 * jn).epsilon(0.01));
        for (std::size_t p = 0; p < g.size(); p += 97) {
            CHECK(rep.condition24_pointwise[p] == doctest::Approx(8.0 * J[p].norm()).epsilon(1e-12));
            CHECK(rep.beta[p] == -8.0);
            CHECK(std::abs(rep.eigen_branch[p][0] - Complex(-8.0, 0.0)) < 1e-14);
        }
        CHECK(rep.classified_nonradiating);
        CHECK(rep.kernel_alignment == 0.0);
        REQUIRE(rep.claimed_eigen_branch.size() == g.size());
        CHECK(std::abs(rep.claimed_eigen_branch[0][1] - Complex(0.0, 1.0)) < 1e-15);
    }
    SUBCASE("zero current is vacuous") {
        const auto rep = classify_nonradiating(VectorField(g), lam, 3.0);
        CHECK(rep.condition22_residual == 0.0);
        CHECK(rep.condition24_residual == 0.0);
        CHECK(rep.kernel_alignment == 0.0);
        CHECK(rep.flux_points == 0);
        CHECK_FALSE(rep.classified_nonradiating);
    }
}

TEST_CASE("classifier is invariant under uniform scaling") {
    const Grid g = periodic_box(24);
    const auto J = abc_field(g);
    const LambdaField lam(ScalarField::generate(g, [](const Vec3& r) { return 1.0 + 0.2 * std::sin(r.x()); }));
    for (double k : {1.0, 3.0}) {
        const auto base = classify_nonradiating(J, lam, k);
        for (double s : {1e-3, 1.0, 1e3}) {
            const auto rep = classify_nonradiating(s * J, lam, k);
            CHECK(rep.classified_nonradiating == base.classified_nonradiating);
            CHECK(rep.condition22_residual == doctest::Approx(s * base.condition22_residual).epsilon(1e-12));
            CHECK(rep.condition24_residual == doctest::Approx(s * base.condition24_residual).epsilon(1e-12));
            CHECK(rep.kernel_alignment == base.kernel_alignment);
            CHECK(rep.flux_points == base.flux_points);
        }
    }
}

TEST_CASE("radiation condition is bounded by its Beltrami expansion") {
    // curl curl J - k^2 J = curl e + lambda e + (grad lambda x J + beta J), e = curl J - lambda J
    const Grid g = periodic_box(32);
    const auto pert = VectorField::generate(g, [](const Vec3& r) {
        return Vec3(std::cos(2 * r.y()), 0.0, std::sin(r.x() + r.z()));
    });
    for (double eps : {0.0, 1e-3, 1e-1}) {
        const auto J = abc_field(g) + eps * pert;
        for (double k : {0.5, 1.0, 2.0}) {
            const auto lam = LambdaField::constant(g, 1.0);
            const double belt = beltrami_residual(J, lam).l2;
            const auto rep = classify_nonradiating(J, lam, k);
            const double C = consistency_constant(lam);
            CAPTURE(eps);
            CAPTURE(k);
            CAPTURE(C);
            CHECK(rep.condition22_residual <= rep.condition24_residual + C * belt + 1e-12 * rep.J_norm);
        }
    }
}

TEST_CASE("tolerance validation") {
    CHECK_NOTHROW(RadiationTolerances{}.validate());
    RadiationTolerances bad;
    bad.kernel = -1;
    try {
        bad.validate();
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
}
