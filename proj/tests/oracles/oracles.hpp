#pragma once
// Reference computations used only by the tests. None of these call into the library.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

inline constexpr double kMu0 = 4.0e-7 * M_PI;

// Orthonormal pair spanning the plane normal to n.
inline void plane_basis(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
    const Eigen::Vector3d h = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    e1 = n.cross(h).normalized();
    e2 = n.cross(e1);
}

// Field of a single-turn circular loop (centre c, unit normal n, radius a, current I) at p.
inline Eigen::Vector3d loop_field(const Eigen::Vector3d& c, const Eigen::Vector3d& n, double a, double I,
                                  const Eigen::Vector3d& p, int segs) {
    Eigen::Vector3d e1, e2;
    plane_basis(n, e1, e2);
    Eigen::Vector3d B = Eigen::Vector3d::Zero();
    const double dphi = 2.0 * M_PI / segs;
    for (int s = 0; s < segs; ++s) {
        const double phi = (s + 0.5) * dphi;
        const Eigen::Vector3d pos = c + a * (std::cos(phi) * e1 + std::sin(phi) * e2);
        const Eigen::Vector3d dl = a * dphi * (-std::sin(phi) * e1 + std::cos(phi) * e2);
        const Eigen::Vector3d r = p - pos;
        const double rn = r.norm();
        B += dl.cross(r) / (rn * rn * rn);
    }
    return kMu0 / (4.0 * M_PI) * I * B;
}

// Force and torque (about the loop centre) on loop j from loop k, both single-turn loops of radius a
// carrying dipole moments mu_j, mu_k. Loop j is centred at r_jk relative to loop k.
inline void biot_savart_wrench(const Eigen::Vector3d& mu_j, const Eigen::Vector3d& mu_k, const Eigen::Vector3d& r_jk,
                               double a, int segs, Eigen::Vector3d& F, Eigen::Vector3d& T) {
    const double area = M_PI * a * a;
    const Eigen::Vector3d nj = mu_j.normalized(), nk = mu_k.normalized();
    const double Ij = mu_j.norm() / area, Ik = mu_k.norm() / area;
    Eigen::Vector3d e1, e2;
    plane_basis(nj, e1, e2);
    F.setZero();
    T.setZero();
    const double dphi = 2.0 * M_PI / segs;
    for (int s = 0; s < segs; ++s) {
        const double phi = (s + 0.5) * dphi;
        const Eigen::Vector3d arm = a * (std::cos(phi) * e1 + std::sin(phi) * e2);
        const Eigen::Vector3d dl = a * dphi * (-std::sin(phi) * e1 + std::cos(phi) * e2);
        const Eigen::Vector3d dF = Ij * dl.cross(loop_field(Eigen::Vector3d::Zero(), nk, a, Ik, r_jk + arm, segs));
        F += dF;
        T += arm.cross(dF);
    }
}

// Textbook point-dipole force on j from k, r_jk from k to j.
inline Eigen::Vector3d dipole_force(const Eigen::Vector3d& mj, const Eigen::Vector3d& mk, const Eigen::Vector3d& r_jk) {
    const double r = r_jk.norm();
    const Eigen::Vector3d e = r_jk / r;
    return 3.0 * kMu0 / (4.0 * M_PI * std::pow(r, 4)) *
           (mk * mj.dot(e) + mj * mk.dot(e) + e * mj.dot(mk) - 5.0 * e * mj.dot(e) * mk.dot(e));
}

// Classical fourth-order Runge-Kutta for x' = f(t, x).
inline Eigen::VectorXd rk4(const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& f,
                           Eigen::VectorXd x, double T, int steps) {
    const double h = T / steps;
    double t = 0.0;
    for (int k = 0; k < steps; ++k) {
        const Eigen::VectorXd k1 = f(t, x);
        const Eigen::VectorXd k2 = f(t + h / 2, x + h / 2 * k1);
        const Eigen::VectorXd k3 = f(t + h / 2, x + h / 2 * k2);
        const Eigen::VectorXd k4 = f(t + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return x;
}

// exp(hA) x + phi1(hA) h d through the augmented dense exponential.
inline Eigen::VectorXd dense_affine_step(const Eigen::MatrixXd& A, double h, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& d) {
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
    M.topLeftCorner(n, n) = h * A;
    M.topRightCorner(n, 1) = h * d;
    const Eigen::MatrixXd E = M.exp();
    return E.topLeftCorner(n, n) * x + E.topRightCorner(n, 1);
}

// Peak of (sin(N u) / (N sin u))^2 on (-2 pi / N, -pi / N): dense scan, then bisection on the sign of
// the analytic derivative.
inline double sidelobe_peak(double N) {
    auto env = [N](double u) {
        const double v = std::sin(N * u) / (N * std::sin(u));
        return v * v;
    };
    const double lo = -2.0 * M_PI / N, hi = -M_PI / N;
    const int K = 4000;
    int best = 1;
    for (int i = 1; i < K; ++i)
        if (env(lo + (hi - lo) * i / K) > env(lo + (hi - lo) * best / K)) best = i;
    double a = lo + (hi - lo) * (best - 1) / K, b = lo + (hi - lo) * (best + 1) / K;
    auto slope = [N](double u) {
        const double f = std::sin(N * u) / (N * std::sin(u));
        const double df = (N * std::cos(N * u) * std::sin(u) - std::sin(N * u) * std::cos(u)) /
                          (N * std::sin(u) * std::sin(u));
        return f * df;
    };
    for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
        const double m = 0.5 * (a + b);
        // rising slope: peak lies to the right
        if (slope(m) > 0.0) a = m;
        else b = m;
    }
    return 0.5 * (a + b);
}

// J2 geopotential (km^2/s^2) at ECI point p with k_J2 = 1.5 J2 mu R^2.
inline double j2_potential(const Eigen::Vector3d& p, double mu, double kJ2) {
    const double r = p.norm();
    const double s = p.z() / r;
    return mu / r + kJ2 / (r * r * r) * (1.0 / 3.0 - s * s);
}

// Gradient of the J2 potential in LVLH axes (radial, along-track, orbit normal) at argument of latitude theta.
inline Eigen::Vector3d j2_gradient_lvlh(double r, double incl, double theta, double mu, double kJ2) {
    // orbit plane: node along ECI x
    const Eigen::Vector3d er(std::cos(theta), std::sin(theta) * std::cos(incl), std::sin(theta) * std::sin(incl));
    const Eigen::Vector3d et(-std::sin(theta), std::cos(theta) * std::cos(incl), std::cos(theta) * std::sin(incl));
    const Eigen::Vector3d en(0.0, -std::sin(incl), std::cos(incl));
    const Eigen::Vector3d p = r * er;
    const double h = 1e-3 * r * 1e-3;
    Eigen::Vector3d g;
    const Eigen::Vector3d axes[3] = {er, et, en};
    for (int k = 0; k < 3; ++k)
        g(k) = (j2_potential(p + h * axes[k], mu, kJ2) - j2_potential(p - h * axes[k], mu, kJ2)) / (2.0 * h);
    return g;
}

} // namespace oracle
