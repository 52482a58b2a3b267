#include "emff/errors.hpp"
#include "emff/magnetics.hpp"
#include "oracles/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace emff;
using namespace emff::magnetics;

namespace {
Eigen::Vector3d random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    return Eigen::Vector3d(N(rng), N(rng), N(rng)).normalized();
}
} // namespace

TEST_CASE("Q force equals the point-dipole force law") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> R(0.1, 2.0), M(0.1, 5.0);
    for (int k = 0; k < 100; ++k) {
        const Eigen::Vector3d mj = M(rng) * random_unit(rng), mk = M(rng) * random_unit(rng);
        const Eigen::Vector3d r = R(rng) * random_unit(rng);
        InteractionGeometry g{r, 0.01};
        const auto w = instantaneous_wrench(mj, mk, g);
        const Eigen::Vector3d ref = oracle::dipole_force(mj, mk, r);
        CHECK((w.force - ref).norm() <= 1e-10 * ref.norm() + 1e-20);
    }
}

// Finite loops differ from point dipoles by O((a / r)^2).
TEST_CASE("Q wrench approaches Biot-Savart as (a / r)^2") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> F(10.0, 40.0);
    const double a = 0.02;
    for (int k = 0; k < 8; ++k) {
        const Eigen::Vector3d mj = random_unit(rng), mk = random_unit(rng);
        const Eigen::Vector3d r = F(rng) * a * random_unit(rng);
        Eigen::Vector3d Fb, Tb;
        oracle::biot_savart_wrench(mj, mk, r, a, 180, Fb, Tb);
        const auto w = instantaneous_wrench(mj, mk, {r, a});
        const double q = std::pow(a / r.norm(), 2);
        CHECK((w.force - Fb).norm() <= 4.0 * q * Fb.norm());
        // torque about the coil centre
        CHECK((w.torque - Tb).norm() <= 10.0 * q * Tb.norm());
    }
}

TEST_CASE("averaged wrench equals one-period quadrature of the instantaneous wrench") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
        DipoleCommand j{random_unit(rng), 0.5 * random_unit(rng), 2.0};
        DipoleCommand kk{0.7 * random_unit(rng), random_unit(rng), 2.0};
        InteractionGeometry g{0.5 * random_unit(rng), 0.01};
        const auto avg = averaged_wrench(j, kk, g);
        CHECK_FALSE(avg.frequency_mismatch);
        const int S = 64; // trapezoid on a periodic integrand is exact for these harmonics
        Vector6 acc = Vector6::Zero();
        const double T = 2.0 * M_PI / j.omega_f;
        for (int s = 0; s < S; ++s) {
            const double t = T * s / S;
            const Eigen::Vector3d mj = j.s * std::sin(j.omega_f * t) + j.c * std::cos(j.omega_f * t);
            const Eigen::Vector3d mk = kk.s * std::sin(kk.omega_f * t) + kk.c * std::cos(kk.omega_f * t);
            acc += instantaneous_wrench(mj, mk, g).stacked();
        }
        acc /= S;
        CHECK((avg.wrench.stacked() - acc).norm() <= 1e-9 * acc.norm());
    }
    DipoleCommand a{Eigen::Vector3d::UnitX(), Eigen::Vector3d::Zero(), 1.0};
    DipoleCommand b{Eigen::Vector3d::UnitX(), Eigen::Vector3d::Zero(), 2.0};
    CHECK(averaged_wrench(a, b, {Eigen::Vector3d::UnitX(), 0.01}).frequency_mismatch);
}

TEST_CASE("interaction matrix does not depend on the secondary frame axis for force") {
    std::mt19937_64 rng(13);
    for (int k = 0; k < 20; ++k) {
        const Eigen::Vector3d r = random_unit(rng) * 0.3;
        const Eigen::Vector3d w = random_unit(rng);
        const Matrix69 Q1 = interaction_matrix(r), Q2 = interaction_matrix(r, los_frame(r, w));
        const Vector9 x = kron(random_unit(rng), random_unit(rng));
        CHECK(((Q1 - Q2) * x).norm() <= 1e-10 * (Q1 * x).norm());
    }
    CHECK_THROWS_AS(interaction_matrix(Eigen::Vector3d::Zero()), DomainError);
    CHECK_THROWS_AS(los_frame(Eigen::Vector3d::UnitX(), 2.0 * Eigen::Vector3d::UnitX()), DomainError);
}

TEST_CASE("coil moment and resistance") {
    CoilSpec c{100.0, 0.03, 1e-4};
    const auto m = dipole_moment(c, 2.0, Eigen::Vector3d::UnitZ());
    CHECK(m.z() == doctest::Approx(M_PI * 100 * 0.03 * 0.03 * 2.0));
    CHECK(coil_resistance(c) == doctest::Approx(2 * 0.03 * 100 * 1.68e-8 / 1e-8));
    CHECK(c.q_coil() == doctest::Approx(100 * 1e-8));
    CHECK_THROWS_AS(dipole_moment(c, 1.0, Eigen::Vector3d(1, 1, 0)), DomainError);
    InteractionGeometry near{Eigen::Vector3d(0.05, 0, 0), 0.02};
    CHECK_FALSE(near.far_field());
    InteractionGeometry far{Eigen::Vector3d(0.08, 0, 0), 0.02};
    CHECK(far.far_field());
}
