#include "emff/orbit.hpp"
#include "emff/errors.hpp"

#include <cmath>

namespace emff::orbit {

double wrap_phase(double a) {
    a = std::remainder(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    return a;
}

OrbitConfig derive_reference(double r_ref, double incl, double mu_g, double k_J2) {
    if (!(r_ref > 0.0)) throw DomainError("orbit radius must be positive");
    if (r_ref <= kEarthRadiusKm) throw DomainError("orbit radius inside the Earth");
    if (incl < 0.0 || incl > M_PI) throw DomainError("inclination outside [0, pi]");
    if (!(mu_g > 0.0)) throw DomainError("gravitational parameter must be positive");

    OrbitConfig c;
    c.r_ref = r_ref;
    c.incl = incl;
    c.mu_g = mu_g;
    c.k_J2 = k_J2;
    c.omega_o = std::sqrt(mu_g / (r_ref * r_ref * r_ref));
    c.s_J2 = k_J2 * (1.0 + 3.0 * std::cos(2.0 * incl)) / (4.0 * mu_g * r_ref * r_ref);
    if (std::abs(c.s_J2) >= 1.0) throw DomainError("J2 ratio out of range");
    c.c_plus = std::sqrt(1.0 + c.s_J2);
    c.c_minus = std::sqrt(1.0 - c.s_J2);
    c.omega_xy = c.c_minus * c.omega_o;
    const double ci = std::cos(incl);
    c.omega_zref = c.omega_o * (c.c_plus + k_J2 * ci * ci / (mu_g * r_ref * r_ref));
    c.eps2 = (3.0 + 5.0 * c.s_J2) / (c.c_plus * c.c_minus) * c.omega_xy;
    c.omega_z = c.omega_zref;
    return c;
}

OrbitConfig from_altitude(double h_km, double incl) {
    return derive_reference(kEarthRadiusKm + h_km, incl);
}

Eigen::Vector3d gravity_gradient(const Eigen::Vector3d& P, double incl, double theta,
                                 const OrbitConfig& cfg) {
    const double r2 = P.squaredNorm();
    if (!(r2 > 0.0)) throw DomainError("gravity gradient at zero position");
    const double si = std::sin(incl);
    const double st = std::sin(theta);
    Eigen::Vector3d j2(1.0 - 3.0 * si * si * st * st,
                       si * si * std::sin(2.0 * theta),
                       std::sin(2.0 * incl) * st);
    Eigen::Vector3d g(-cfg.mu_g / r2, 0.0, 0.0);
    return g - cfg.k_J2 / (r2 * r2) * j2;
}

OrbitalIndices orbital_indices(const RelativeState& s, const OrbitConfig& cfg) {
    const double w = cfg.omega_xy;
    const double cp = cfg.c_plus, cm = cfg.c_minus;
    const double xb = cp * s.x, yb = cm * s.y;
    const double vxb = cp * s.vx, vyb = cm * s.vy;

    OrbitalIndices o;
    o.C1 = cp / (cm * cm) * (2.0 * xb + vyb / w);
    o.C4 = (yb - 2.0 * vxb / w) / cm;
    o.C2 = (yb - cm * o.C4) / 2.0;
    o.C3 = xb - 2.0 * cp * o.C1;
    o.r_xy = std::hypot(o.C2, o.C3);
    o.theta_xy = wrap_phase(std::atan2(o.C3, o.C2));
    o.C5 = s.vz / cfg.omega_z;
    o.C6 = s.z;
    o.r_z = std::hypot(o.C5, o.C6);
    o.theta_z = wrap_phase(std::atan2(o.C6, o.C5));
    return o;
}

Eigen::Vector3d analytic_solution(const OrbitalIndices& idx, const OrbitConfig& cfg, double t) {
    const double ph = cfg.omega_xy * t + idx.theta_xy;
    return {2.0 * idx.C1 + idx.r_xy * std::sin(ph) / cfg.c_plus,
            idx.C4 - cfg.eps2 * idx.C1 * t + 2.0 * idx.r_xy * std::cos(ph) / cfg.c_minus,
            (idx.r_z + cfg.l_drift * t) * std::sin(cfg.omega_z * t + idx.theta_z)};
}

Eigen::Vector3d analytic_velocity(const OrbitalIndices& idx, const OrbitConfig& cfg, double t) {
    const double w = cfg.omega_xy;
    const double ph = w * t + idx.theta_xy;
    const double pz = cfg.omega_z * t + idx.theta_z;
    return {idx.r_xy * w * std::cos(ph) / cfg.c_plus,
            -cfg.eps2 * idx.C1 - 2.0 * idx.r_xy * w * std::sin(ph) / cfg.c_minus,
            cfg.l_drift * std::sin(pz) + (idx.r_z + cfg.l_drift * t) * cfg.omega_z * std::cos(pz)};
}

double desired_theta_z(double theta_xy, double Theta_z_xy) {
    return theta_xy + std::atan(2.0 * std::tan(Theta_z_xy));
}

double desired_r_z(const SwarmGeometry& g) {
    const double tp = std::tan(g.Theta_P);
    if (std::abs(tp) < 1e-15) throw DomainError("swarm angle Theta_P has zero tangent");
    const double dth = std::atan(2.0 * std::tan(g.Theta_z_xy));
    const double cd = std::cos(dth);
    if (std::abs(cd) < 1e-15) throw DomainError("cross-track phase offset is singular");
    return g.r_xyd / tp * std::cos(g.Theta_z_xy) / cd;
}

Eigen::Vector3d desired_trajectory(const SwarmGeometry& g, double theta_xy,
                                   const OrbitConfig& cfg, double t) {
    const double rz = desired_r_z(g);
    const double ph = cfg.omega_xy * t + theta_xy;
    const double thz = desired_theta_z(theta_xy, g.Theta_z_xy);
    return {g.r_xyd * std::sin(ph) / cfg.c_plus,
            2.0 * g.r_xyd * std::cos(ph) / cfg.c_minus,
            rz * std::sin(cfg.omega_xy * t + thz)};
}

double dfz_disturbance(double r_zd, double theta_z, const OrbitConfig& cfg, double t) {
    const double wxy = cfg.omega_xy, wz = cfg.omega_z;
    return r_zd * (wxy * wxy * std::sin(wxy * t + theta_z) - wz * wz * std::sin(wz * t + theta_z));
}

Vector6 relative_dynamics(const Vector6& s, const Eigen::Vector3d& a, const OrbitConfig& cfg,
                          double t, double theta_z) {
    const double w = cfg.omega_xy;
    const double wz = cfg.omega_z;
    // J2 coupling term; its coefficient vanishes with s_J2.
    const double kj = 4.0 * w * w * cfg.s_J2 / (cfg.c_minus * cfg.c_minus);
    Vector6 d;
    d(0) = s(3);
    d(1) = s(4);
    d(2) = s(5);
    d(3) = 2.0 * w * s(4) + 3.0 * w * w * s(0) + kj * (2.0 * s(0) + s(4) / w) + cfg.c_plus * a(0);
    d(4) = -2.0 * w * s(3) + cfg.c_minus * a(1);
    d(5) = -wz * wz * s(2) + 2.0 * cfg.l_drift * wz * std::cos(wz * t + theta_z) + a(2);
    return d;
}

} // namespace emff::orbit
