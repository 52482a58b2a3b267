#include "emff/allocation.hpp"
#include "emff/errors.hpp"
#include "emff/formation.hpp"
#include "emff/krylov.hpp"
#include "oracles/oracles.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

using namespace emff;
using namespace emff::formation;

namespace {

const orbit::OrbitConfig& leo() {
    static const auto c = orbit::from_altitude(500.0, M_PI / 4.0);
    return c;
}

// Edge errors that come from node errors, i.e. orthogonal to the cycle space.
Vec consistent_edge_state(const GridGraph& g, std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    Vec n1(g.N_all), n4(g.N_all);
    for (int k = 0; k < g.N_all; ++k) {
        n1(k) = N(rng);
        n4(k) = N(rng);
    }
    const int m = g.num_edges();
    Vec x(2 * m);
    x.head(m) = g.E.transpose() * n1;
    x.tail(m) = g.E.transpose() * n4;
    return x;
}

} // namespace

TEST_CASE("grid graph structure") {
    for (int n : {1, 2, 5}) {
        const auto g = build_grid(n);
        CHECK(g.N_l == 2 * n + 1);
        CHECK(g.N_all == g.N_l * g.N_l);
        CHECK(g.num_edges() == 2 * g.N_l * (g.N_l - 1));
        const Eigen::MatrixXd L = Eigen::MatrixXd(g.L_e);
        CHECK((L - L.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
        // each column of E has one +1 and one -1
        const Eigen::MatrixXd E = Eigen::MatrixXd(g.E);
        CHECK(E.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(build_grid(0), DomainError);
}

TEST_CASE("gain screening") {
    ControlGains g;
    CHECK_NOTHROW(check_gains(g));
    g.k_A = 0.0;
    CHECK_THROWS_AS(check_gains(g), SolverError);
    g.k_A = 0.056;
    g.gamma = -1.0;
    CHECK_THROWS_AS(check_gains(g), SolverError);
}

TEST_CASE("zero-disturbance edge errors decay") {
    std::mt19937_64 rng(31);
    for (int n : {1, 2, 4}) {
        const auto g = build_grid(n);
        SimOptions o;
        o.e0 = consistent_edge_state(g, rng);
        o.integrator = Integrator::RK4;
        const auto r = simulate_drift_dynamics(g, ControlGains{}, leo(), none(g.N_all), o);
        const double period = 2.0 * M_PI / leo().omega_xy;
        const double e0 = std::hypot(r.e1_norm.front(), r.e4_norm.front());
        const double eT = std::hypot(r.e1_norm.back(), r.e4_norm.back());
        CHECK(eT <= 1e-3 * e0);
        CHECK(r.time.back() == doctest::Approx(3.0 * period));
        for (std::size_t k = 1; k < r.time.size(); ++k)
            if (r.time[k] > period) CHECK(r.e1_norm[k] <= r.e1_norm[k - 1] * (1.0 + 1e-12));
    }
}

TEST_CASE("expv agrees with the dense exponential") {
    std::mt19937_64 rng(32);
    for (int n : {1, 2, 3, 4}) {
        const auto g = build_grid(n);
        const SpMat A = closed_loop_matrix(g, ControlGains{}, leo());
        const Eigen::MatrixXd Ad = Eigen::MatrixXd(A);
        const Vec x = consistent_edge_state(g, rng);
        for (double t : {10.0, 600.0, 5000.0}) {
            const auto r = krylov::expv(krylov::as_operator(A), t, x);
            const Vec ref = (t * Ad).exp() * x;
            CHECK((r.y - ref).norm() <= 1e-8 * x.norm());
        }
    }
}

TEST_CASE("affine propagation agrees with the augmented dense exponential") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> N(0.0, 1e-3);
    const auto g = build_grid(2);
    const SpMat A = closed_loop_matrix(g, ControlGains{}, leo());
    const Eigen::MatrixXd Ad = Eigen::MatrixXd(A);
    Vec x = consistent_edge_state(g, rng);
    std::vector<double> breaks{0.0};
    std::vector<Vec> forcing;
    Vec ref = x;
    for (int k = 0; k < 6; ++k) {
        Vec d(x.size());
        for (int i = 0; i < d.size(); ++i) d(i) = N(rng);
        const double h = 100.0 + 50.0 * k;
        breaks.push_back(breaks.back() + h);
        forcing.push_back(d);
        ref = oracle::dense_affine_step(Ad, h, ref, d);
    }
    const auto r = krylov::propagate_krylov(krylov::as_operator(A), x, breaks, forcing);
    CHECK(r.converged);
    CHECK((r.x - ref).norm() <= 1e-8 * ref.norm());
}

TEST_CASE("forced simulation: library RK4 and Krylov match an independent RK4") {
    const auto g = build_grid(2);
    const auto& cfg = leo();
    const ControlGains gains;
    const auto dist = sinusoidal(g, 0.15, 1e-7, 2e-7, 2.0 * cfg.omega_xy, 0.3);
    const SpMat A = closed_loop_matrix(g, gains, cfg);
    const int m = g.num_edges();
    const double scale = -gains.k_0 * forcing_gain(cfg);
    auto f = [&](double t, const Eigen::VectorXd& x) {
        Vec dx, dy;
        dist.eval(t, dx, dy);
        Eigen::VectorXd r = A * x;
        r.head(m) += scale * (g.E.transpose() * dy);
        r.tail(m) += scale * (g.E.transpose() * dx);
        return r;
    };
    SimOptions o;
    o.T = 6000.0;
    o.dt = 10.0;
    o.record_edges = true;
    const Vec ref = oracle::rk4(f, Vec::Zero(2 * m), o.T, 6000);
    o.integrator = Integrator::RK4;
    const auto a = simulate_drift_dynamics(g, gains, cfg, dist, o);
    o.integrator = Integrator::Krylov;
    const auto b = simulate_drift_dynamics(g, gains, cfg, dist, o);
    CHECK_FALSE(a.used_krylov);
    CHECK(b.used_krylov);
    CHECK((a.states.back() - ref).norm() <= 1e-6 * ref.norm());
    // midpoint forcing is second order in dt
    CHECK((b.states.back() - ref).norm() <= 1e-3 * ref.norm());
}

TEST_CASE("direction factor reproduces the exact force cost") {
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> U(0.0, M_PI);
    for (int k = 0; k < 30; ++k) {
        const double alpha = U(rng);
        const double r = 0.15;
        const Eigen::Vector3d rv(r, 0.0, 0.0);
        const Eigen::Vector3d F = 1e-6 * Eigen::Vector3d(std::cos(alpha), std::sin(alpha), 0.0);
        const double exact = allocation::force_cost(F, rv, false);
        const double approx = F.norm() * std::pow(r, 4) * cost_direction_factor(alpha, false);
        CHECK(approx == doctest::Approx(exact).epsilon(2e-3));
    }
    // axial pull is the cheapest direction
    CHECK(cost_direction_factor(0.0) < cost_direction_factor(M_PI / 2.0));
    CHECK(cost_direction_factor(0.3) == doctest::Approx(cost_direction_factor(M_PI - 0.3)));
}

TEST_CASE("quartic fit recovers an exact quartic and round-trips through CSV") {
    std::vector<std::pair<double, double>> s;
    for (int n : default_sample_points()) s.emplace_back(n, 1.0 + 0.5 * n - 0.01 * n * n + 2e-4 * n * n * n + 3e-7 * std::pow(n, 4));
    const auto m = fit_control_index(s, 0.15);
    CHECK(m.coeffs(0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(m.coeffs(1) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(m.coeffs(4) == doctest::Approx(3e-7).epsilon(1e-6));
    CHECK(m.rms_residual < 1e-9);
    CHECK(m.extrapolated(80.0));
    CHECK_FALSE(m.extrapolated(20.0));
    const auto path = (std::filesystem::temp_directory_path() / "emff_fit_roundtrip.csv").string();
    write_csv(m, path);
    const auto back = read_csv(path, 0.15);
    for (int k = 0; k < 5; ++k) CHECK(back.coeffs(k) == doctest::Approx(m.coeffs(k)).epsilon(1e-12));
    std::filesystem::remove(path);
    s.resize(4);
    CHECK_THROWS_AS(fit_control_index(s), SolverError);
}

TEST_CASE("control index sample is positive and grows with spacing") {
    JdOptions o;
    o.sim.T = 3000.0;
    const auto a = estimate_Jd(2, 0.15, ControlGains{}, leo(), o);
    const auto b = estimate_Jd(2, 0.60, ControlGains{}, leo(), o);
    CHECK(a.J_d > 0.0);
    CHECK(b.J_d > a.J_d);
    CHECK(a.worst_edge >= 0);
    CHECK_THROWS_AS(estimate_Jd(2, 0.0, ControlGains{}, leo(), o), DomainError);
}
