#pragma once

#include <Eigen/Dense>

namespace emff::orbit {

inline constexpr double kEarthRadiusKm = 6378.137;
inline constexpr double kMuEarth = 3.986e5;   // km^3/s^2
inline constexpr double kJ2Const = 2.63e10;   // km^5/s^2

// Reference-orbit constants. Lengths in km, rates in rad/s.
struct OrbitConfig {
    double r_ref = 0.0;
    double incl = 0.0;
    double mu_g = kMuEarth;
    double k_J2 = kJ2Const;
    double omega_o = 0.0;
    double s_J2 = 0.0;
    double c_plus = 1.0;
    double c_minus = 1.0;
    double omega_xy = 0.0;
    double omega_zref = 0.0;
    double eps2 = 0.0;
    // Cross-track frequency actually used by the relative-motion model.
    // Defaults to omega_zref; may be overridden for sensitivity runs.
    double omega_z = 0.0;
    // Cross-track amplitude drift rate l (m/s). Zero for equal inclinations.
    double l_drift = 0.0;
};

// LVLH relative state in metres and metres per second.
struct RelativeState {
    double x = 0, y = 0, z = 0;
    double vx = 0, vy = 0, vz = 0;
};

struct OrbitalIndices {
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0, C5 = 0, C6 = 0;
    double r_xy = 0, r_z = 0;
    double theta_xy = 0, theta_z = 0;
};

struct SwarmGeometry {
    double Theta_P = 0.0;
    double Theta_z_xy = 0.0;
    double r_xyd = 0.0;
};

OrbitConfig derive_reference(double r_ref_km, double incl, double mu_g = kMuEarth,
                             double k_J2 = kJ2Const);

// Convenience: reference orbit from altitude above the mean equatorial radius.
OrbitConfig from_altitude(double h_km, double incl);

// Point-mass plus J2 acceleration at P (km), km/s^2.
Eigen::Vector3d gravity_gradient(const Eigen::Vector3d& P, double incl, double theta,
                                 const OrbitConfig& cfg);

OrbitalIndices orbital_indices(const RelativeState& s, const OrbitConfig& cfg);

// Position (m) of the averaged analytic solution at time t.
Eigen::Vector3d analytic_solution(const OrbitalIndices& idx, const OrbitConfig& cfg, double t);

// Velocity (m/s) of the same solution, used for state round trips.
Eigen::Vector3d analytic_velocity(const OrbitalIndices& idx, const OrbitConfig& cfg, double t);

// Phase of the desired cross-track motion.
double desired_theta_z(double theta_xy, double Theta_z_xy);

// Cross-track amplitude of the desired trajectory.
double desired_r_z(const SwarmGeometry& geom);

Eigen::Vector3d desired_trajectory(const SwarmGeometry& geom, double theta_xy,
                                   const OrbitConfig& cfg, double t);

double dfz_disturbance(double r_zd, double theta_z, const OrbitConfig& cfg, double t);

// Right-hand side of the linearised relative dynamics in scaled coordinates
// (xb = c+ x, yb = c- y). State order: xb, yb, z, xb', yb', z'.
using Vector6 = Eigen::Matrix<double, 6, 1>;
Vector6 relative_dynamics(const Vector6& state, const Eigen::Vector3d& accel,
                          const OrbitConfig& cfg, double t, double theta_z = 0.0);

double wrap_phase(double a);

} // namespace emff::orbit
