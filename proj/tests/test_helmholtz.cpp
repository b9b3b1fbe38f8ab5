#include "doctest.h"

#include "qhydro/helmholtz.hpp"
#include "qhydro/vortex_control.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace qhydro;

namespace {

constexpr double kPi = std::numbers::pi;
const Complex I(0.0, 1.0);

Grid periodic_box(int n, double length = 2 * kPi, double lo = -kPi) { return Grid::cube(n, length, lo, Boundary::Periodic); }

Grid dirichlet_box(int n, double length) {
    const double h = length / n;
    return Grid({n, n, n}, {h, h, h}, {-length / 2 + h / 2, -length / 2 + h / 2, -length / 2 + h / 2},
                Boundary::Dirichlet0);
}

ScalarField bump_density(const Grid& g) {
    return ScalarField::generate(g, [](const Vec3& r) { return 1.0 + 0.1 * std::exp(-r.squaredNorm()); });
}

VectorField manufactured_A(const Grid& g) {
    return VectorField::generate(g, [](const Vec3& r) { return Vec3(std::sin(r.y()), std::sin(r.z()), std::sin(r.x())); });
}

ScalarField harmonic_potential(const Grid& g, double omega = 1.0, double mass = 1.0) {
    return ScalarField::generate(g, [&](const Vec3& r) { return 0.5 * mass * omega * omega * r.squaredNorm(); });
}

double expectation(const MagneticHamiltonian& H, const ComplexField& psi) {
    const auto Hpsi = H.apply(psi);
    Complex num(0, 0);
    double den = 0.0;
    for (std::size_t p = 0; p < psi.size(); ++p) {
        num += std::conj(psi[p]) * Hpsi[p];
        den += std::norm(psi[p]);
    }
    return num.real() / den;
}

double eigen_residual(const MagneticHamiltonian& H, const ComplexField& psi, double E) {
    const auto Hpsi = H.apply(psi);
    double r = 0.0, n = 0.0;
    for (std::size_t p = 0; p < psi.size(); ++p) {
        r += std::norm(Hpsi[p] - E * psi[p]);
        n += std::norm(psi[p]);
    }
    return std::sqrt(r / n);
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

TEST_CASE("solver config validation") {
    CHECK_NOTHROW(SolverConfig{}.validate());
    const SolverConfig defaults;
    CHECK(defaults.tol == 1e-8);
    CHECK(defaults.max_iter == 500);
    CHECK(defaults.mixing == 0.5);
    for (auto mutate : {+[](SolverConfig& c) { c.tol = 0; }, +[](SolverConfig& c) { c.max_iter = 0; },
                        +[](SolverConfig& c) { c.mixing = 0; }, +[](SolverConfig& c) { c.mixing = 1.5; },
                        +[](SolverConfig& c) { c.eig_tol = -1; }, +[](SolverConfig& c) { c.krylov_restart = 0; }}) {
        SolverConfig c;
        mutate(c);
        expect_error(ErrorCode::InvalidConfig, [&] { c.validate(); });
    }
}

TEST_CASE("vector potential: vanishing phase gradient gives A = 0") {
    const Grid g = periodic_box(12);
    const auto sol = solve_vector_potential(bump_density(g), VectorField(g), 0.5, PhysicalParams{}, SolverConfig{});
    CHECK(norm_max(sol.A) == 0.0);
    CHECK(sol.iterations == 0);
}

TEST_CASE("vector potential: manufactured solution") {
    const Grid g = periodic_box(24);
    const double lambda0 = 1.0;
    const auto R = bump_density(g);
    const auto Astar = manufactured_A(g);
    const auto f = vector_potential_operator(R, Astar, lambda0);
    const auto sol = solve_vector_potential_system(R, f, lambda0, SolverConfig{});
    CHECK(norm_l2(sol.A - Astar) / norm_l2(Astar) <= 1e-6);
    CHECK_FALSE(sol.used_fixed_point_fallback);
    // certificate: independent recomputation against the solver's own estimate
    const double recomputed = vector_potential_residual(R, sol.A, lambda0, f);
    CHECK(recomputed <= SolverConfig{}.tol * 1.01);
    CHECK(recomputed <= 2.0 * sol.solver_estimate);
    CHECK(sol.solver_estimate <= 2.0 * recomputed);
    CHECK(sol.residual == doctest::Approx(recomputed));
    CHECK(sol.gauge_residual_projected < 1e-8);
    CHECK_FALSE(sol.history.empty());
}

TEST_CASE("vector potential: uniform density reduces to a constant field") {
    // (lap - lambda0) A = -(c/q) lambda0 k has the constant solution A = (c/q) k
    const Grid g = periodic_box(12, 1.0, 0.0);
    const PhysicalParams params{1.0, 1.0, -2.0, 3.0};
    const double lambda0 = -1.0;
    const Vec3 k(0.3, -1.0, 2.0);
    const auto sol = solve_vector_potential(ScalarField::uniform(g, 0.7), VectorField::uniform(g, k), lambda0, params,
                                            SolverConfig{});
    const Vec3 expected = params.light_speed / params.charge * k;
    CHECK(norm_max(sol.A - VectorField::uniform(g, expected)) <= 1e-8 * expected.norm());
}

TEST_CASE("vector potential: right-hand side and charge") {
    const Grid g = dirichlet_box(12, 4.0);
    const auto R = bump_density(g);
    const auto gradS = VectorField::uniform(g, Vec3(0, 1, 0));
    PhysicalParams neutral;
    neutral.charge = 0.0;
    expect_error(ErrorCode::ChargeZero, [&] { solve_vector_potential(R, gradS, 1.0, neutral, SolverConfig{}); });

    const PhysicalParams params{1.0, 1.0, -1.5, 2.0};
    const auto rhs = vector_potential_rhs(R, gradS, 0.4, params, 1e-12);
    const auto G = gamma_matrix(R, 0.4, 1e-12);
    for (std::size_t p = 0; p < g.size(); ++p) {
        CHECK((rhs[p] - params.light_speed / params.charge * (G[p] * gradS[p])).norm() < 1e-14);
    }
}

TEST_CASE("vector potential: non-convergence reports the history") {
    const Grid g = periodic_box(16);
    const auto R = bump_density(g);
    const auto f = vector_potential_operator(R, manufactured_A(g), 1.0);
    SolverConfig cfg;
    cfg.max_iter = 3;
    cfg.tol = 1e-14;
    try {
        solve_vector_potential_system(R, f, 1.0, cfg);
        FAIL("expected SolverDiverged");
    } catch (const SolverDiverged& e) {
        CHECK(e.code() == ErrorCode::SolverDiverged);
        CHECK(e.history().size() >= 3);
    }
}

TEST_CASE("vector potential: fixed-point fallback") {
    // GMRES(1) stalls on this operator; the contraction of the split takes over
    const Grid g = periodic_box(16);
    const auto R = bump_density(g);
    const auto Astar = manufactured_A(g);
    const auto f = vector_potential_operator(R, Astar, 1.0);
    SolverConfig cfg;
    cfg.krylov_restart = 1;
    cfg.max_iter = 60;
    const auto sol = solve_vector_potential_system(R, f, 1.0, cfg);
    CHECK(sol.used_fixed_point_fallback);
    CHECK(sol.residual <= 1.01 * cfg.tol);
    CHECK(norm_l2(sol.A - Astar) / norm_l2(Astar) < 1e-5);
}

TEST_CASE("Coulomb projection") {
    for (auto g : {periodic_box(16), dirichlet_box(16, 6.0)}) {
        const auto phi = ScalarField::generate(g, [](const Vec3& r) { return std::exp(-r.squaredNorm()) * (1 + r.x()); });
        const auto w = VectorField::generate(g, [](const Vec3& r) -> Vec3 { return Vec3(0, 0, 1) * std::exp(-r.squaredNorm()); });
        const auto A = gradient(phi, EdgeRule::ZeroGhost) + curl(w, EdgeRule::ZeroGhost);
        CHECK(norm_max(divergence(A, EdgeRule::ZeroGhost)) > 0.1);
        const auto P = coulomb_project(A, 1e-12, 5000);
        CHECK(norm_max(divergence(P, EdgeRule::ZeroGhost)) < 1e-9);
        // the divergence-free part is untouched
        const auto solenoidal = curl(w, EdgeRule::ZeroGhost);
        CHECK(norm_max(coulomb_project(solenoidal, 1e-12, 5000) - solenoidal) < 1e-12);
    }
}

TEST_CASE("external current") {
    const PhysicalParams params{1.0, 1.0, -1.5, 2.0};
    const double c_over_q = params.light_speed / params.charge;
    SUBCASE("uniform density") {
        const Grid g = periodic_box(8);
        const auto gradS = VectorField::uniform(g, Vec3(1, 2, 3));
        const auto A = VectorField::generate(g, [](const Vec3& r) { return Vec3(r.y(), r.z(), 1.0); });
        const auto ec = external_current(ScalarField::uniform(g, 2.0), gradS, A, 0.25, params);
        CHECK(norm_max(ec.J_e - (-0.25 * c_over_q) * gradS) < 1e-14);
        REQUIRE(ec.omega.has_value());
        CHECK(*ec.omega == doctest::Approx(params.light_speed * 0.5));
        CHECK_FALSE(ec.evanescent);
    }
    SUBCASE("cross-product oracle") {
        const Grid g = dirichlet_box(12, 2.0);
        const auto R = ScalarField::generate(g, [](const Vec3& r) { return std::exp(r.x()); });
        const double a = 0.7;
        const auto A = VectorField::uniform(g, Vec3(0, 0, a));
        const auto ec = external_current(R, VectorField(g), A, -1.0, params);
        const auto gR = gradient(R);
        for (std::size_t p = 0; p < g.size(); ++p) {
            CHECK((ec.J_e[p] - cross_matrix(gR[p]) * A[p]).norm() < 1e-12);
            CHECK(ec.J_e[p].y() == doctest::Approx(-a * gR[p].x()));
        }
        CHECK(ec.evanescent);
        CHECK_FALSE(ec.omega.has_value());
    }
    SUBCASE("all zero") {
        const Grid g = periodic_box(8);
        const auto ec = external_current(ScalarField(g), VectorField(g), VectorField(g), 1.0, params);
        CHECK(norm_max(ec.J_e) == 0.0);
    }
}

TEST_CASE("magnetic Hamiltonian is Hermitian") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 1.0);
    const PhysicalParams params{1.0, 1.3, -0.8, 1.7};
    for (auto g : {periodic_box(8), dirichlet_box(9, 3.0)}) {
        std::vector<Vec3> a(g.size());
        std::vector<double> u(g.size());
        std::vector<Complex> x(g.size()), y(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) {
            a[p] = Vec3(n(rng), n(rng), n(rng));
            u[p] = n(rng);
            x[p] = Complex(n(rng), n(rng));
            y[p] = Complex(n(rng), n(rng));
        }
        const MagneticHamiltonian H(ScalarField(g, u), VectorField(g, a), params);
        std::vector<Complex> Hx(g.size()), Hy(g.size());
        H.apply(x, Hx);
        H.apply(y, Hy);
        Complex lhs(0, 0), rhs(0, 0);
        for (std::size_t p = 0; p < g.size(); ++p) {
            lhs += std::conj(y[p]) * Hx[p];
            rhs += std::conj(Hy[p]) * x[p];
        }
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
    }
}

TEST_CASE("ground state: free particle in a periodic box") {
    const Grid g = periodic_box(16);
    SolverConfig cfg;
    const auto gs = schrodinger_ground_state(ScalarField(g), VectorField(g), PhysicalParams{}, cfg);
    CHECK(std::abs(gs.energy) <= cfg.eig_tol);
    CHECK(gs.residual <= cfg.eig_tol);
    const double expected = 1.0 / std::sqrt(std::pow(2 * kPi, 3));
    for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(gs.psi[p] - expected) < 1e-6);
}

TEST_CASE("ground state: harmonic oscillator") {
    const Grid g = dirichlet_box(32, 12.0);
    const PhysicalParams params;
    const SolverConfig cfg;
    const auto U = harmonic_potential(g);
    const auto gs = schrodinger_ground_state(U, VectorField(g), params, cfg);
    CHECK(gs.energy == doctest::Approx(1.5).epsilon(0.02));
    CHECK(gs.residual <= cfg.eig_tol);

    double norm = 0.0;
    std::size_t imax = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        norm += std::norm(gs.psi[p]) * g.cell_volume();
        if (std::abs(gs.psi[p]) > std::abs(gs.psi[imax])) imax = p;
    }
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(gs.psi[imax].imag() == 0.0);
    CHECK(gs.psi[imax].real() > 0.0);

    const MagneticHamiltonian H(U, VectorField(g), params);
    const double recomputed = eigen_residual(H, gs.psi, gs.energy);
    CHECK(recomputed <= 2.0 * gs.residual + 1e-14);
    CHECK(gs.residual <= 2.0 * recomputed + 1e-14);

    SUBCASE("variational bound") {
        std::mt19937_64 rng(99);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<Complex> v(g.size());
            for (auto& z : v) z = Complex(n(rng), n(rng));
            CHECK(expectation(H, ComplexField(g, v)) > gs.energy);
        }
    }
    SUBCASE("warm start converges immediately") {
        const auto again = schrodinger_ground_state(U, VectorField(g), params, cfg, gs.psi);
        CHECK(again.restarts == 1);
        CHECK(again.energy == doctest::Approx(gs.energy).epsilon(1e-12));
    }
    SUBCASE("restart budget exhaustion") {
        SolverConfig tight = cfg;
        tight.max_iter = 1;
        tight.krylov_restart = 3;
        expect_error(ErrorCode::EigenSolverFailed, [&] { schrodinger_ground_state(U, VectorField(g), params, tight); });
    }
}

TEST_CASE("ground state: constant vector potential is a gauge shift") {
    const double L = 2 * kPi;
    const Grid g = periodic_box(16, L, 0.0);
    const PhysicalParams params{1.0, 1.0, -1.0, 1.0};
    const SolverConfig cfg;

    SUBCASE("one flux quantum: plane-wave ground state with no net current") {
        const double kx = 2 * kPi / L;
        const double a = params.hbar * params.light_speed / params.charge * kx;
        const auto A = VectorField::uniform(g, Vec3(a, 0, 0));
        const auto gs = schrodinger_ground_state(ScalarField(g), A, params, cfg);
        const double h = g.spacing[0];
        CHECK(std::abs(gs.energy) < kx * kx * kx * kx * h * h);
        const auto f = decompose(gs.psi, params);
        const double q_over_mc = params.charge / (params.mass * params.light_speed);
        const auto total = f.J - q_over_mc * scale(f.R, A);
        const double scale_ref = params.hbar * kx / params.mass * norm_l2(f.R);
        CHECK(norm_l2(total) <= kx * kx * h * h * scale_ref);
    }
    SUBCASE("small potential: uniform state with the diamagnetic current") {
        const double a = 0.1;
        const auto A = VectorField::uniform(g, Vec3(0, a, 0));
        const auto gs = schrodinger_ground_state(ScalarField(g), A, params, cfg);
        const double expected = params.charge * params.charge * a * a /
                                (2 * params.mass * params.light_speed * params.light_speed);
        CHECK(gs.energy == doctest::Approx(expected).epsilon(1e-6));
        const auto f = decompose(gs.psi, params);
        CHECK(norm_max(f.J) < 1e-8);
        const double q_over_mc = params.charge / (params.mass * params.light_speed);
        const auto total = f.J - q_over_mc * scale(f.R, A);
        const Vec3 t0 = total[0];
        for (std::size_t p = 0; p < g.size(); ++p) CHECK((total[p] - t0).norm() < 1e-8);
    }
}

TEST_CASE("period-two cycle detection") {
    CHECK(detect_period_two_cycle({0.5, 0.1, 0.5, 0.1, 0.5, 0.1}, 1e-8));
    CHECK_FALSE(detect_period_two_cycle({0.5, 0.25, 0.125, 0.06, 0.03, 0.015}, 1e-8));
    CHECK_FALSE(detect_period_two_cycle({0.5, 0.1, 0.5}, 1e-8));
    CHECK_FALSE(detect_period_two_cycle({1e-9, 1e-10, 1e-9, 1e-10, 1e-9, 1e-10}, 1e-8));
}

TEST_CASE("self-consistent loop") {
    const Grid g = dirichlet_box(16, 10.0);
    const auto U = harmonic_potential(g);
    const SolverConfig cfg;

    SUBCASE("decoupled limit") {
        PhysicalParams params;
        params.charge = 1e-8;
        const auto sol = self_consistent_solve(U, 1.0, params, cfg);
        CHECK(sol.iterations <= 2);
        const auto ref = schrodinger_ground_state(U, VectorField(g), params, cfg);
        CHECK(norm_max(sol.psi - ref.psi) < 1e-6);
        CHECK(sol.energy == doctest::Approx(ref.energy).epsilon(1e-10));
    }
    SUBCASE("certificates and restart") {
        const PhysicalParams params;
        const auto sol = self_consistent_solve(U, 1.0, params, cfg);
        for (const char* key : {"eigen_residual", "eq20_pde_residual", "fixed_point_residual",
                                "eq15_condition_residual", "coulomb_gauge_residual"}) {
            REQUIRE(sol.final_residuals.count(key) == 1);
            CHECK(sol.final_residuals.at(key) >= 0.0);
            CHECK(sol.final_residuals.at(key) <= 10 * cfg.tol);
        }
        CHECK(sol.iterations <= cfg.max_iter);
        CHECK(sol.fixed_point_history.size() == static_cast<std::size_t>(sol.iterations));
        const auto again = self_consistent_solve(U, 1.0, params, cfg, sol.A);
        CHECK(again.iterations == 1);
        CHECK(norm_l2(again.A - sol.A) <= cfg.tol * std::max(1.0, norm_l2(sol.A)));
    }
    SUBCASE("a seeded potential relaxes to the same fixed point for any mixing") {
        const Grid pg = periodic_box(12);
        const PhysicalParams params;
        const auto A0 = VectorField::uniform(pg, Vec3(0.05, 0, 0));
        SolverConfig half = cfg;
        SolverConfig full = cfg;
        full.mixing = 1.0;
        const auto a = self_consistent_solve(ScalarField(pg), 0.5, params, half, A0);
        const auto b = self_consistent_solve(ScalarField(pg), 0.5, params, full, A0);
        CHECK(a.iterations > 1);
        CHECK(b.iterations < a.iterations);
        CHECK(std::abs(a.energy - b.energy) <= cfg.tol);
        // the source decays to round-off level; certificates stay meaningful
        for (const auto& [key, value] : a.final_residuals) {
            CAPTURE(key);
            CHECK(value <= 10 * cfg.tol);
        }
        const double s = vector_potential_scale(pg, params);
        CHECK(norm_l2(a.A - b.A) <= cfg.tol * s);
        // the history decays monotonically under damping
        for (std::size_t i = 1; i < a.fixed_point_history.size(); ++i) {
            CHECK(a.fixed_point_history[i] <= a.fixed_point_history[i - 1]);
        }
    }
    SUBCASE("iteration budget") {
        const Grid pg = periodic_box(12);
        SolverConfig tight = cfg;
        tight.max_iter = 2;
        try {
            self_consistent_solve(ScalarField(pg), 0.5, PhysicalParams{}, tight, VectorField::uniform(pg, Vec3(0.05, 0, 0)));
            FAIL("expected SolverDiverged");
        } catch (const SolverDiverged& e) {
            CHECK(e.history().size() == 2);
            CHECK_FALSE(e.suggestion().empty());
        }
    }
}
