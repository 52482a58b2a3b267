#pragma once

#include "emff/magnetics.hpp"

#include <optional>

namespace emff::allocation {

using magnetics::Matrix69;
using magnetics::Vector6;

// mu0 / (8 pi): scale of the averaged bilinear map.
inline constexpr double kKappa = magnetics::kMu0 / (8.0 * M_PI);

struct AllocationResult {
    Eigen::Vector3d s_j = Eigen::Vector3d::Zero();
    Eigen::Vector3d s_k = Eigen::Vector3d::Zero();
    Eigen::Vector3d c_j = Eigen::Vector3d::Zero();
    Eigen::Vector3d c_k = Eigen::Vector3d::Zero();
    double J_p = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct DualResult {
    Vector6 lambda = Vector6::Zero();
    double J_d = 0.0;
    double sigma_max = 0.0;
    bool feasible = true; // false when u leaves the range of Q (dual unbounded)
    int iterations = 0;
};

// Reshape of Q^T lambda into R_lambda (column-major).
Eigen::Matrix3d r_lambda(const Matrix69& Q, const Vector6& lambda);

// Averaged wrench produced by the amplitudes.
Vector6 forward(const Matrix69& Q, const AllocationResult& x);

DualResult solve_dual(const Matrix69& Q, const Vector6& u);

AllocationResult solve_primal(const Matrix69& Q, const Vector6& u,
                              const std::optional<AllocationResult>& seed = std::nullopt);

double required_moment(double J_d);

// Minimum J_d for a force target F between coils separated by r. With
// constrain_torque the torque target is zero; otherwise torque rows are dropped.
double force_cost(const Eigen::Vector3d& force, const Eigen::Vector3d& r, bool constrain_torque = true);

} // namespace emff::allocation
