#include "doctest.h"

#include "qhydro/vortex_control.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace qhydro;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Grid periodic_box(int n) { return Grid::cube(n, kTwoPi, 0.0, Boundary::Periodic); }

Grid dirichlet_box(int n, double half = 1.0) { return Grid::cube(n, 2 * half, -half, Boundary::Dirichlet0); }

VectorField abc_field(const Grid& g) {
    return VectorField::generate(g, [](const Vec3& r) {
        return Vec3(std::sin(r.z()) + std::cos(r.y()), std::sin(r.x()) + std::cos(r.z()),
                    std::sin(r.y()) + std::cos(r.x()));
    });
}

LambdaField lambda_from(const Grid& g, double (*fn)(const Vec3&)) {
    return LambdaField(ScalarField::generate(g, fn));
}

VectorField rigid_rotation(const Grid& g) {
    return VectorField::generate(g, [](const Vec3& r) { return Vec3(-r.y(), r.x(), 0); });
}

template <class Fn>
void expect_error(ErrorCode code, Fn&& fn) {
    try {
        fn();
        FAIL("expected " << to_string(code));
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

}  // namespace

TEST_CASE("lambda field constancy") {
    const Grid g = periodic_box(8);
    CHECK(LambdaField::constant(g, 3.0).is_constant());
    CHECK(LambdaField::constant(g, 3.0).lambda0() == 3.0);
    CHECK_FALSE(lambda_from(g, [](const Vec3& r) { return 1.0 + 1e-9 * r.x(); }).is_constant());
    const auto lam = lambda_from(g, [](const Vec3& r) { return r.z() - 1.0; });
    CHECK(lam.min() == -1.0);
    CHECK(lam.max() == doctest::Approx(g.position(0, 0, 7).z() - 1.0));
}

TEST_CASE("spin field records its curl") {
    const Grid g = dirichlet_box(10);
    CHECK(SpinField(VectorField::uniform(g, Vec3(0, 0, 0.1))).max_curl == 0.0);
    CHECK(SpinField(rigid_rotation(g)).max_curl == doctest::Approx(2.0));
}

TEST_CASE("Beltrami residual") {
    SUBCASE("ABC field is a lambda = 1 eigenfield") {
        const Grid g = periodic_box(64);
        const auto J = abc_field(g);
        const auto r1 = beltrami_residual(J, LambdaField::constant(g, 1.0));
        CHECK(r1.l2 < 1e-2 * norm_l2(J));
        const auto r2 = beltrami_residual(J, LambdaField::constant(g, 2.0));
        CHECK(r2.l2 > r1.l2);
        CHECK(r2.l2 == doctest::Approx(norm_l2(J)).epsilon(0.01));
        CHECK(r2.max >= r2.l2 / std::sqrt(std::pow(kTwoPi, 3)));
    }
    SUBCASE("gradient flow with lambda = 0") {
        double prev = 0.0;
        for (int n : {16, 32}) {
            const Grid g = dirichlet_box(n);
            const auto f = ScalarField::generate(g, [](const Vec3& r) { return std::sin(2 * r.x()) * std::exp(r.y() * r.z()); });
            const double res = beltrami_residual(gradient(f), LambdaField::constant(g, 0.0)).max;
            CHECK(res < 1e-10);
            prev = res;
        }
        (void)prev;
    }
    SUBCASE("grid mismatch") {
        expect_error(ErrorCode::GridMismatch, [] {
            beltrami_residual(abc_field(periodic_box(8)), LambdaField::constant(periodic_box(9), 1.0));
        });
    }
}

TEST_CASE("superfluid control field") {
    const Grid g = dirichlet_box(12);
    const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y(); });
    const auto k = VectorField::uniform(g, Vec3(0, 0, 1));
    SUBCASE("axial k") {
        const auto B = superfluid_control_field(k, lam);
        for (std::size_t p = 0; p < g.size(); ++p) CHECK(B[p] == Vec3(0, 0, lam.values()[p]));
        const auto rep = check_lambda_constraints(lam, rigid_rotation(g), k, ScalarField(g), rigid_rotation(g));
        CHECK(rep.constraint13_residual == 0.0);
    }
    SUBCASE("spin shift") {
        const auto B = superfluid_control_field(k, lam, SpinField(VectorField::uniform(g, Vec3(0, 0, 0.1))));
        for (std::size_t p = 0; p < g.size(); ++p) CHECK(B[p].isApprox(Vec3(0, 0, lam.values()[p] - 0.1)));
    }
    SUBCASE("constant lambda is forbidden") {
        expect_error(ErrorCode::ConstantLambdaForbidden,
                     [&] { superfluid_control_field(k, LambdaField::constant(g, 3.0)); });
    }
    SUBCASE("B parallel to grad S without spin") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-2, 2);
        std::vector<Vec3> s(g.size());
        for (auto& v : s) v = Vec3(u(rng), u(rng), u(rng));
        const VectorField gradS(g, s);
        const auto B = superfluid_control_field(gradS, lam);
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (B[p].norm() > 0) CHECK(B[p].cross(gradS[p]).norm() < 1e-13 * B[p].norm() * gradS[p].norm());
        }
    }
}

TEST_CASE("lambda constraint system") {
    const Grid g = dirichlet_box(32);
    const auto k = VectorField::uniform(g, Vec3(0, 0, 1));
    const ScalarField stationary(g);
    SUBCASE("toroidal configuration passes") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0; });
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(lam, J, k, stationary, J);
        CHECK(rep.passed);
        CHECK(rep.nonconstant_lambda_ok);
        CHECK(rep.solenoidal_J_residual < 1e-12);
        CHECK(rep.constraint12_residual < 1e-12);
        CHECK(rep.constraint13_residual == 0.0);
        CHECK(rep.constraint14_residual < 1e-12);
        CHECK(rep.constraint14_form == Constraint14Form::LogGradient);
        CHECK_FALSE(rep.k_substituted_by_gradS);
        CHECK_FALSE(rep.k_nonuniform);
    }
    SUBCASE("profiled azimuthal flow") {
        double prev12 = 0.0;
        for (int n : {16, 32}) {
            const Grid h = dirichlet_box(n);
            const auto lam = lambda_from(h, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0; });
            const auto J = VectorField::generate(h, [](const Vec3& r) -> Vec3 {
                return Vec3(-r.y(), r.x(), 0) * std::exp(-(r.x() * r.x() + r.y() * r.y()));
            });
            const auto rep = check_lambda_constraints(lam, J, VectorField::uniform(h, Vec3(0, 0, 1)), ScalarField(h), J);
            const double h2 = h.spacing[0] * h.spacing[0];
            CHECK(rep.constraint13_residual == 0.0);
            CHECK(rep.constraint12_residual < h2);
            CHECK(rep.constraint14_residual < h2);
            // the one-sided edge stencils dominate the divergence error
            if (prev12 > 0) CHECK(prev12 / rep.solenoidal_J_residual > 3.0);
            prev12 = rep.solenoidal_J_residual;
        }
    }
    SUBCASE("lambda varying along k fails constraint 13") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.z() + 2.0; });
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(lam, J, k, stationary, J);
        CHECK(rep.constraint13_residual == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(rep.passed);
    }
    SUBCASE("non-solenoidal current") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0; });
        const auto J = VectorField::generate(g, [](const Vec3& r) { return Vec3(r.x(), 0, 0); });
        const auto rep = check_lambda_constraints(lam, J, k, stationary, J);
        CHECK(rep.solenoidal_J_residual == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_FALSE(rep.passed);
    }
    SUBCASE("constant lambda never passes") {
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(LambdaField::constant(g, 2.0), J, k, stationary, J);
        CHECK_FALSE(rep.nonconstant_lambda_ok);
        CHECK_FALSE(rep.passed);
    }
    SUBCASE("non-positive lambda") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() - 0.5; });
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(lam, J, k, stationary, J);
        CHECK(rep.constraint14_form == Constraint14Form::LambdaWeighted);
        ConstraintTolerances strict;
        strict.allow_product_form = false;
        expect_error(ErrorCode::LogDomainError, [&] { check_lambda_constraints(lam, J, k, stationary, J, strict); });
    }
    SUBCASE("time-dependent density enters constraint 14") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0; });
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(lam, J, k, ScalarField::uniform(g, 0.25), J);
        CHECK(rep.constraint14_residual == doctest::Approx(0.25));
    }
    SUBCASE("missing k falls back to grad S and says so") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0; });
        const auto J = rigid_rotation(g);
        const auto rep = check_lambda_constraints(lam, J, std::nullopt, stationary, J);
        CHECK(rep.k_substituted_by_gradS);
        CHECK(rep.constraint13_residual < 1e-12);
        const auto ramp = VectorField::generate(g, [](const Vec3& r) { return Vec3(0, 0, 1 + r.x()); });
        CHECK(check_lambda_constraints(lam, J, ramp, stationary, J).k_nonuniform);
    }
    SUBCASE("tolerance monotonicity") {
        const auto lam = lambda_from(g, [](const Vec3& r) { return r.x() * r.x() + r.y() * r.y() + 1.0 + 0.01 * r.z(); });
        const auto J = rigid_rotation(g);
        bool passed_before = false;
        for (double tau : {1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
            ConstraintTolerances t{tau, tau, tau, tau};
            const bool passed = check_lambda_constraints(lam, J, k, stationary, J, t).passed;
            if (passed_before) CHECK(passed);
            passed_before = passed;
        }
        CHECK(passed_before);
    }
    SUBCASE("tolerances must be positive") {
        const auto J = rigid_rotation(g);
        ConstraintTolerances bad;
        bad.constraint13 = 0.0;
        expect_error(ErrorCode::InvalidConfig, [&] {
            check_lambda_constraints(LambdaField::constant(g, 2.0), J, k, stationary, J, bad);
        });
    }
}

TEST_CASE("gamma matrix") {
    const Grid g = dirichlet_box(16);
    SUBCASE("constant density") {
        const auto G = gamma_matrix(ScalarField::uniform(g, 2.0), 0.7, 1e-12);
        for (std::size_t p = 0; p < g.size(); ++p) CHECK(G[p] == Mat3(-0.7 * Mat3::Identity()));
    }
    SUBCASE("exponential density") {
        const auto G = gamma_matrix(ScalarField::generate(g, [](const Vec3& r) { return std::exp(r.z()); }), 0.0, 1e-12);
        const Mat3 expected = cross_matrix(Vec3(0, 0, 1));
        const double h = g.spacing[0];
        for (std::size_t p = 0; p < g.size(); ++p) CHECK((G[p] - expected).cwiseAbs().maxCoeff() < h * h);
    }
    SUBCASE("cross-product oracle and antisymmetry") {
        const auto R = ScalarField::generate(g, [](const Vec3& r) { return 1.5 + std::sin(r.x() + 2 * r.y()) * std::cos(r.z()); });
        const double lambda0 = 0.3;
        const auto G = gamma_matrix(R, lambda0, 1e-12);
        const auto gR = gradient(R);
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-1, 1);
        for (std::size_t p = 0; p < g.size(); ++p) {
            const Vec3 v(u(rng), u(rng), u(rng));
            CHECK((G[p] * v + lambda0 * v - (gR[p] / R[p]).cross(v)).norm() < 1e-12);
            const Mat3 S = G[p] + lambda0 * Mat3::Identity();
            CHECK((S + S.transpose()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    SUBCASE("vacuum points") {
        const auto R = ScalarField::generate(g, [](const Vec3& r) { return r.x() > 0 ? r.x() : 0.0; });
        const auto G = gamma_matrix(R, 1.0, 1e-12);
        for (std::size_t p = 0; p < g.size(); ++p) {
            if (R[p] == 0.0) CHECK(G[p] == Mat3(-Mat3::Identity()));
        }
    }
}

TEST_CASE("gauged current") {
    const Grid g = periodic_box(8);
    const PhysicalParams params{1.0, 1.0, -2.0, 3.0};
    const double c_over_q = params.light_speed / params.charge;
    const auto gradS = VectorField::uniform(g, Vec3(1, 2, 3));
    CHECK(norm_max(gauged_current(gradS, VectorField(g), params) - c_over_q * gradS) == 0.0);
    CHECK(norm_max(gauged_current(gradS, c_over_q * gradS, params)) == 0.0);
    const auto J0 = gauged_current(gradS, VectorField::uniform(g, Vec3(0, 0, 0.5)), params);
    CHECK(J0[0].isApprox(c_over_q * Vec3(1, 2, 3) - Vec3(0, 0, 0.5)));
    PhysicalParams neutral = params;
    neutral.charge = 0.0;
    expect_error(ErrorCode::ChargeZero, [&] { gauged_current(gradS, VectorField(g), neutral); });
}

TEST_CASE("general condition residual") {
    const Grid g = dirichlet_box(16);
    const PhysicalParams params{1.0, 1.0, -1.5, 2.0};
    const double lambda0 = 0.4;
    const auto R = ScalarField::generate(g, [](const Vec3& r) { return 1.0 + 0.5 * std::exp(-r.squaredNorm()); });
    const auto gradS = VectorField::generate(g, [](const Vec3& r) { return Vec3(std::sin(r.y()), r.z(), 1.0); });
    const auto A = VectorField::generate(g, [](const Vec3& r) { return Vec3(r.y(), -r.x(), 0.3); });

    // B = Gamma . J0 solves the condition identically
    const auto G = gamma_matrix(R, lambda0, 1e-12);
    const auto J0 = gauged_current(gradS, A, params);
    std::vector<Vec3> b(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) b[p] = G[p] * J0[p];
    const VectorField B(g, b);
    const auto res = general_condition_residual(R, gradS, A, B, lambda0, params);
    CHECK(res.max < 1e-12);

    SUBCASE("perturbing B raises the residual by (q/c) R |dB|") {
        const auto Bp = B + VectorField::uniform(g, Vec3(0, 0, 0.1));
        const auto rp = general_condition_residual(R, gradS, A, Bp, lambda0, params);
        const double q_over_c = params.charge / params.light_speed;
        for (std::size_t p = 0; p < g.size(); ++p) {
            CHECK(rp.pointwise[p] == doctest::Approx(std::abs(q_over_c) * R[p] * 0.1).epsilon(1e-9));
        }
    }
    SUBCASE("uniform density, no vector potential") {
        const auto Ru = ScalarField::uniform(g, 2.0);
        const auto S = VectorField::uniform(g, Vec3(0.3, -0.2, 1.0));
        const double c_over_q = params.light_speed / params.charge;
        const auto Bu = (-lambda0 * c_over_q) * S;
        CHECK(general_condition_residual(Ru, S, VectorField(g), Bu, lambda0, params).max < 1e-12);
    }
}
