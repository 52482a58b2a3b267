#include "emff/allocation.hpp"
#include "emff/errors.hpp"

#include <cmath>

namespace emff::allocation {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;

double cost(const AllocationResult& x) {
    return 0.5 * (x.s_j.squaredNorm() + x.s_k.squaredNorm() + x.c_j.squaredNorm() + x.c_k.squaredNorm());
}

Eigen::Matrix3d reshape(const magnetics::Vector9& v) {
    return Eigen::Map<const Eigen::Matrix3d>(v.data());
}

// Interior-point ascent on t*w'b + log det(I - R'R), with lambda = B b.
struct Barrier {
    const Eigen::Matrix<double, 9, Eigen::Dynamic>& Rb; // columns: vec(R_i) for basis vectors
    Eigen::VectorXd w;

    bool inside(const Eigen::VectorXd& b, double& logdet) const {
        const Eigen::Matrix3d R = reshape(Rb * b);
        const Eigen::Matrix3d S = Eigen::Matrix3d::Identity() - R.transpose() * R;
        Eigen::LLT<Eigen::Matrix3d> llt(S);
        if (llt.info() != Eigen::Success) return false;
        const Eigen::Matrix3d L = llt.matrixL();
        logdet = 0.0;
        for (int i = 0; i < 3; ++i) {
            if (!(L(i, i) > 0.0)) return false;
            logdet += 2.0 * std::log(L(i, i));
        }
        return std::isfinite(logdet);
    }

    void derivatives(const Eigen::VectorXd& b, double t, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
        const int m = static_cast<int>(b.size());
        const Eigen::Matrix3d R = reshape(Rb * b);
        const Eigen::Matrix3d Si = (Eigen::Matrix3d::Identity() - R.transpose() * R).inverse();
        std::vector<Eigen::Matrix3d> Ri(m), T(m);
        for (int i = 0; i < m; ++i) {
            Ri[i] = reshape(Rb.col(i));
            T[i] = Si * (Ri[i].transpose() * R + R.transpose() * Ri[i]) * Si;
        }
        g = t * w;
        H.resize(m, m);
        for (int i = 0; i < m; ++i) {
            g(i) -= 2.0 * (Si * R.transpose() * Ri[i]).trace();
            for (int j = 0; j < m; ++j)
                H(i, j) = -2.0 * (Si * Ri[j].transpose() * Ri[i]).trace()
                          - 2.0 * (T[j] * R.transpose() * Ri[i]).trace();
        }
    }
};

} // namespace

Eigen::Matrix3d r_lambda(const Matrix69& Q, const Vector6& lambda) {
    return reshape(Q.transpose() * lambda);
}

Vector6 forward(const Matrix69& Q, const AllocationResult& x) {
    return kKappa * Q * (magnetics::kron(x.s_k, x.s_j) + magnetics::kron(x.c_k, x.c_j));
}

DualResult solve_dual(const Matrix69& Q, const Vector6& u) {
    DualResult out;
    const double unorm = u.norm();
    if (unorm == 0.0) return out;

    const double qs = Q.norm();
    if (!(qs > 0.0)) throw DomainError("interaction matrix is zero");
    const Matrix69 Qn = Q / qs;

    // Work on the range of Q; directions outside it leave R unchanged.
    Eigen::JacobiSVD<Matrix69> svd(Qn, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-12 * sv(0)) ++rank;
    const Eigen::MatrixXd B = svd.matrixU().leftCols(rank);
    const Vector6 un = u / unorm;
    if ((un - B * (B.transpose() * un)).norm() > 1e-9) {
        out.feasible = false;
        out.J_d = std::numeric_limits<double>::infinity();
        return out;
    }

    const Eigen::Matrix<double, 9, Eigen::Dynamic> Rb = Qn.transpose() * B;
    Barrier bar{Rb, -(B.transpose() * un)};

    Eigen::VectorXd b = Eigen::VectorXd::Zero(rank);
    double t = 1.0;
    const double nu = 6.0;
    int iters = 0;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
    while (true) {
        for (int k = 0; k < 100; ++k, ++iters) {
            bar.derivatives(b, t, g, H);
            const Eigen::VectorXd step = -H.ldlt().solve(g);
            const double dec = g.dot(step);
            if (!(dec > 0.0) || 0.5 * dec < 1e-13) break;
            double ld0 = 0.0;
            bar.inside(b, ld0);
            const double f0 = t * bar.w.dot(b) + ld0;
            double a = 1.0;
            for (int ls = 0; ls < 60; ++ls, a *= 0.5) {
                const Eigen::VectorXd bn = b + a * step;
                double ld = 0.0;
                if (!bar.inside(bn, ld)) continue;
                if (t * bar.w.dot(bn) + ld >= f0 + 0.25 * a * g.dot(step)) break;
            }
            b += a * step;
        }
        if (nu / t < 1e-13 * std::max(bar.w.dot(b), 1e-300)) break;
        if (t > 1e18) break;
        t *= 8.0;
    }

    // lambda for the original (unnormalised) problem: R depends on Q^T lambda.
    const Vector6 lam = B * b / qs;
    out.lambda = lam;
    out.J_d = -lam.dot(u) / kKappa;
    out.sigma_max = Eigen::JacobiSVD<Eigen::Matrix3d>(r_lambda(Q, lam)).singularValues()(0);
    out.iterations = iters;
    return out;
}

namespace {

// Rebuild amplitudes from the top singular subspace of R at the dual optimum.
AllocationResult from_dual(const Matrix69& Q, const Vector6& u, const DualResult& d) {
    AllocationResult x;
    const Eigen::Matrix3d R = r_lambda(Q, d.lambda);
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto sv = svd.singularValues();
    int k = 1;
    while (k < 3 && sv(k) > sv(0) - 1e-5) ++k;
    const Eigen::MatrixXd U = svd.matrixU().leftCols(k);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(k);

    // Unknowns: symmetric M (k x k). vec(s_j s_k') summed = -vec(U M V').
    std::vector<std::pair<int, int>> idx;
    for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b) idx.emplace_back(a, b);
    Eigen::MatrixXd A(6, idx.size());
    for (size_t c = 0; c < idx.size(); ++c) {
        auto [a, b] = idx[c];
        Eigen::Matrix3d E = U.col(a) * V.col(b).transpose();
        if (a != b) E += U.col(b) * V.col(a).transpose();
        A.col(c) = -kKappa * Q * Eigen::Map<const magnetics::Vector9>(E.data());
    }
    const Eigen::VectorXd m = A.completeOrthogonalDecomposition().solve(u);
    Eigen::MatrixXd M(k, k);
    for (size_t c = 0; c < idx.size(); ++c) {
        auto [a, b] = idx[c];
        M(a, b) = M(b, a) = m(c);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd P = es.eigenvectors();
    // Two largest eigenpairs become the sine and cosine amplitudes.
    const Eigen::VectorXd beta = P.col(k - 1) * std::sqrt(ev(k - 1));
    x.s_k = V * beta;
    x.s_j = -U * beta;
    if (k >= 2) {
        const Eigen::VectorXd gam = P.col(k - 2) * std::sqrt(ev(k - 2));
        x.c_k = V * gam;
        x.c_j = -U * gam;
    }
    return x;
}

void set_j(AllocationResult& x, const Eigen::VectorXd& v) { x.s_j = v.head<3>(); x.c_j = v.tail<3>(); }
void set_k(AllocationResult& x, const Eigen::VectorXd& v) { x.s_k = v.head<3>(); x.c_k = v.tail<3>(); }

Mat6 block_j(const Matrix69& Q, const AllocationResult& x) {
    // (s_k kron I) s_j + (c_k kron I) c_j
    Eigen::Matrix<double, 9, 6> K = Eigen::Matrix<double, 9, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
        K.block<3, 3>(3 * a, 0) = x.s_k(a) * Eigen::Matrix3d::Identity();
        K.block<3, 3>(3 * a, 3) = x.c_k(a) * Eigen::Matrix3d::Identity();
    }
    return kKappa * Q * K;
}

Mat6 block_k(const Matrix69& Q, const AllocationResult& x) {
    // (I kron s_j) s_k + (I kron c_j) c_k
    Eigen::Matrix<double, 9, 6> K = Eigen::Matrix<double, 9, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
        K.block<3, 1>(3 * a, a) = x.s_j;
        K.block<3, 1>(3 * a, 3 + a) = x.c_j;
    }
    return kKappa * Q * K;
}

void canonicalise(AllocationResult& x) {
    const double scale = std::sqrt(2.0 * cost(x));
    for (int i = 0; i < 3; ++i) {
        if (std::abs(x.c_k(i)) > 1e-12 * scale) {
            if (x.c_k(i) < 0.0) {
                x.c_k = -x.c_k;
                x.c_j = -x.c_j;
            }
            break;
        }
    }
}

} // namespace

AllocationResult solve_primal(const Matrix69& Q, const Vector6& u,
                              const std::optional<AllocationResult>& seed) {
    AllocationResult x;
    const double unorm = u.norm();
    if (unorm == 0.0) return x;

    if (seed) {
        x = *seed;
    } else {
        const DualResult d = solve_dual(Q, u);
        if (!d.feasible) {
            x.converged = false;
            x.residual = unorm;
            return x;
        }
        x = from_dual(Q, u, d);
    }

    const double tol = 1e-8 * unorm;
    double prev = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < 2000; ++it) {
        Mat6 A = block_j(Q, x);
        Eigen::VectorXd vj = A.completeOrthogonalDecomposition().solve(u);
        set_j(x, vj);
        A = block_k(Q, x);
        Eigen::VectorXd vk = A.completeOrthogonalDecomposition().solve(u);
        set_k(x, vk);
        const double c = cost(x);
        const double res = (forward(Q, x) - u).norm();
        if (res <= tol && std::abs(prev - c) <= 1e-14 * c) break;
        prev = c;
    }

    // Gauss-Newton correction on the joint constraint.
    for (int k = 0; k < 20; ++k) {
        const Vector6 r = forward(Q, x) - u;
        if (r.norm() <= 1e-3 * tol) break;
        Eigen::Matrix<double, 6, 12> Jc;
        Jc.leftCols<6>() = block_j(Q, x);
        Jc.rightCols<6>() = block_k(Q, x);
        const Eigen::Matrix<double, 12, 1> dx = Jc.completeOrthogonalDecomposition().solve(r);
        x.s_j -= dx.segment<3>(0);
        x.c_j -= dx.segment<3>(3);
        x.s_k -= dx.segment<3>(6);
        x.c_k -= dx.segment<3>(9);
    }

    canonicalise(x);
    x.J_p = cost(x);
    x.residual = (forward(Q, x) - u).norm();
    x.iterations = it;
    x.converged = x.residual <= tol;
    return x;
}

double required_moment(double J_d) {
    if (J_d < 0.0) throw DomainError("negative dual value");
    return std::sqrt(J_d);
}

double force_cost(const Eigen::Vector3d& force, const Eigen::Vector3d& r, bool constrain_torque) {
    Vector6 u = Vector6::Zero();
    u.head<3>() = force;
    Matrix69 Q = magnetics::interaction_matrix(r);
    if (!constrain_torque) Q.bottomRows<3>().setZero();
    return solve_dual(Q, u).J_d;
}

} // namespace emff::allocation
