#include "emff/magnetics.hpp"
#include "emff/errors.hpp"

#include <cmath>

namespace emff::magnetics {

Eigen::Vector3d dipole_moment(const CoilSpec& coil, double current, const Eigen::Vector3d& normal) {
    if (std::abs(normal.norm() - 1.0) > 1e-9) throw DomainError("coil normal must be a unit vector");
    return M_PI * coil.N_t * coil.a_coil * coil.a_coil * current * normal;
}

double coil_resistance(const CoilSpec& coil) {
    if (!(coil.r_wire > 0.0)) throw DomainError("wire radius must be positive");
    return 2.0 * coil.a_coil * coil.N_t * coil.p_c / (coil.r_wire * coil.r_wire);
}

Eigen::Matrix3d los_frame(const Eigen::Vector3d& v, const Eigen::Vector3d& w) {
    const double nv = v.norm();
    if (!(nv > 0.0)) throw DomainError("line-of-sight vector is zero");
    const Eigen::Vector3d vw = v.cross(w);
    const double nvw = vw.norm();
    if (!(nvw > 1e-12 * nv * std::max(w.norm(), 1e-300))) throw DomainError("degenerate frame: collinear vectors");
    Eigen::Matrix3d C;
    C.col(0) = v / nv;
    C.col(1) = vw / nvw;
    C.col(2) = C.col(0).cross(C.col(1));
    return C;
}

Eigen::Matrix3d fallback_frame(const Eigen::Vector3d& r) {
    Eigen::Index k;
    r.cwiseAbs().minCoeff(&k);
    return los_frame(r, Eigen::Vector3d::Unit(k));
}

Matrix69 psi(double r) {
    Matrix69 P = Matrix69::Zero();
    const double r3 = r * r * r, r4 = r3 * r;
    P(0, 0) = -6.0 / r4; P(0, 4) = 3.0 / r4; P(0, 8) = 3.0 / r4;
    P(1, 1) = 3.0 / r4;  P(1, 3) = 3.0 / r4;
    P(2, 2) = 3.0 / r4;  P(2, 6) = 3.0 / r4;
    P(3, 5) = 1.0 / r3;  P(3, 7) = -1.0 / r3;
    P(4, 2) = 2.0 / r3;  P(4, 6) = 1.0 / r3;
    P(5, 1) = -2.0 / r3; P(5, 3) = -1.0 / r3;
    return P;
}

Matrix69 interaction_matrix(const Eigen::Vector3d& r_jk, const Eigen::Matrix3d& C) {
    const double r = r_jk.norm();
    if (!(r > 0.0)) throw DomainError("zero coil separation");
    Eigen::Matrix<double, 6, 6> left = Eigen::Matrix<double, 6, 6>::Zero();
    left.topLeftCorner<3, 3>() = C;
    left.bottomRightCorner<3, 3>() = C;
    Eigen::Matrix<double, 9, 9> right;
    const Eigen::Matrix3d Ct = C.transpose();
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) right.block<3, 3>(3 * a, 3 * b) = Ct(a, b) * Ct;
    return left * psi(r) * right;
}

Matrix69 interaction_matrix(const Eigen::Vector3d& r_jk) {
    if (!(r_jk.norm() > 0.0)) throw DomainError("zero coil separation");
    return interaction_matrix(r_jk, fallback_frame(r_jk));
}

Vector9 kron(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    Vector9 k;
    for (int i = 0; i < 3; ++i) k.segment<3>(3 * i) = a(i) * b;
    return k;
}

namespace {
Wrench split(const Vector6& u) {
    Wrench w;
    w.force = u.head<3>();
    w.torque = u.tail<3>();
    return w;
}
} // namespace

Wrench instantaneous_wrench(const Eigen::Vector3d& mu_j, const Eigen::Vector3d& mu_k,
                            const InteractionGeometry& geom) {
    const Matrix69 Q = interaction_matrix(geom.r_jk);
    return split(kMu0 / (4.0 * M_PI) * Q * kron(mu_k, mu_j));
}

AveragedWrench averaged_wrench(const DipoleCommand& j, const DipoleCommand& k,
                               const InteractionGeometry& geom) {
    AveragedWrench out;
    if (j.omega_f != k.omega_f) {
        out.frequency_mismatch = true;
        return out;
    }
    const Matrix69 Q = interaction_matrix(geom.r_jk);
    out.wrench = split(0.5 * kMu0 / (4.0 * M_PI) * Q * (kron(k.s, j.s) + kron(k.c, j.c)));
    return out;
}

} // namespace emff::magnetics
