#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <vector>

namespace emff::krylov {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
// y = A x
using Operator = std::function<void(const Vec& x, Vec& y)>;

struct ExpvOptions {
    double tol = 1e-12;  // relative local error target
    int m_max = 40;      // Krylov dimension cap
    int max_substeps = 10000;
};

struct ExpvResult {
    Vec y;
    double err_est = 0.0;
    int substeps = 0;
    int matvecs = 0;
    bool happy_breakdown = false;
    bool converged = true;
};

// exp(t A) v by Arnoldi with time substepping and an a-posteriori error estimate.
ExpvResult expv(const Operator& A, double t, const Vec& v, const ExpvOptions& opt = {});

// One exact step of x' = A x + d with d constant over [0, h]:
// returns exp(hA) x + phi1(hA) h d, evaluated as the action of an augmented operator.
ExpvResult step_affine(const Operator& A, double h, const Vec& x, const Vec& d,
                       const ExpvOptions& opt = {});

// x(T) for x' = A x + d(t), d piecewise constant: d(t) = d_k on [t_k, t_{k+1}).
// breaks holds t_0 .. t_K with t_0 = 0 and t_K = T.
struct PropagationResult {
    Vec x;
    double err_est = 0.0;
    int matvecs = 0;
    bool converged = true;
};

PropagationResult propagate_krylov(const Operator& A, const Vec& x0, const std::vector<double>& breaks,
                                   const std::vector<Vec>& forcing, const ExpvOptions& opt = {});

Operator as_operator(const SpMat& A);

} // namespace emff::krylov
