#pragma once

#include <Eigen/Dense>

namespace emff::magnetics {

inline constexpr double kMu0 = 4.0e-7 * M_PI;
inline constexpr double kFarFieldDefault = 4.0;

using Matrix69 = Eigen::Matrix<double, 6, 9>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Vector9 = Eigen::Matrix<double, 9, 1>;

struct CoilSpec {
    double N_t = 1.0;
    double a_coil = 0.0;   // m
    double r_wire = 0.0;   // m
    double p_c = 1.68e-8;  // Ohm m
    double rho_c = 8960.0; // kg/m^3

    double q_coil() const { return N_t * r_wire * r_wire; }
};

struct DipoleCommand {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    double omega_f = 1.0;
};

struct InteractionGeometry {
    Eigen::Vector3d r_jk = Eigen::Vector3d::UnitX(); // from coil k to coil j, m
    double a_coil = 0.0;
    double k_F = kFarFieldDefault;

    bool far_field() const { return k_F * a_coil <= r_jk.norm(); }
};

struct Wrench {
    Eigen::Vector3d force = Eigen::Vector3d::Zero();
    Eigen::Vector3d torque = Eigen::Vector3d::Zero();

    Vector6 stacked() const {
        Vector6 u;
        u << force, torque;
        return u;
    }
};

struct AveragedWrench {
    Wrench wrench;
    bool frequency_mismatch = false;
};

Eigen::Vector3d dipole_moment(const CoilSpec& coil, double current, const Eigen::Vector3d& normal);

double coil_resistance(const CoilSpec& coil);

// Columns [v/|v|, v x w / |v x w|, e_x x e_y].
Eigen::Matrix3d los_frame(const Eigen::Vector3d& v, const Eigen::Vector3d& w);

// Frame along r with a deterministic secondary axis, for when no force is known yet.
Eigen::Matrix3d fallback_frame(const Eigen::Vector3d& r);

// Psi_f and Psi_tau stacked, in line-of-sight coordinates.
Matrix69 psi(double r);

Matrix69 interaction_matrix(const Eigen::Vector3d& r_jk, const Eigen::Matrix3d& frame);

// Q built with the fallback frame.
Matrix69 interaction_matrix(const Eigen::Vector3d& r_jk);

Vector9 kron(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

Wrench instantaneous_wrench(const Eigen::Vector3d& mu_j, const Eigen::Vector3d& mu_k,
                            const InteractionGeometry& geom);

AveragedWrench averaged_wrench(const DipoleCommand& cmd_j, const DipoleCommand& cmd_k,
                               const InteractionGeometry& geom);

} // namespace emff::magnetics
