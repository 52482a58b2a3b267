#include "emff/krylov.hpp"
#include "emff/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace emff::krylov {

Operator as_operator(const SpMat& A) {
    return [&A](const Vec& x, Vec& y) { y.noalias() = A * x; };
}

ExpvResult expv(const Operator& A, double t, const Vec& v, const ExpvOptions& opt) {
    ExpvResult res;
    const Eigen::Index n = v.size();
    res.y = v;
    if (t == 0.0 || n == 0) return res;
    const double vnorm = v.norm();
    if (vnorm == 0.0) return res;

    const int m_cap = static_cast<int>(std::min<Eigen::Index>(opt.m_max, n));
    const double btol = 1e-14;

    Vec w = v;
    Eigen::MatrixXd V(n, m_cap + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m_cap + 1, m_cap + 1);
    Vec p(n);
    double t_now = 0.0;
    double err_total = 0.0;

    while (t_now < t) {
        if (++res.substeps > opt.max_substeps) {
            res.converged = false;
            break;
        }
        const double beta = w.norm();
        if (beta == 0.0) break;
        double tau = t - t_now;
        V.col(0) = w / beta;
        H.setZero();

        // Local error target scales with the fraction of the interval covered.
        auto target = [&](double tt) { return opt.tol * vnorm * std::max(tt / t, 1e-3); };
        bool done = false;
        int j = 0;
        for (; j < m_cap && !done; ++j) {
            A(V.col(j), p);
            ++res.matvecs;
            const double pn0 = p.norm();
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(p);
                p.noalias() -= H(i, j) * V.col(i);
            }
            if (p.norm() < 0.7 * pn0) {
                for (int i = 0; i <= j; ++i) {
                    const double c = V.col(i).dot(p);
                    H(i, j) += c;
                    p.noalias() -= c * V.col(i);
                }
            }
            const double s = p.norm();
            if (s <= btol * std::max(1.0, pn0)) {
                // invariant subspace: the projected exponential is exact
                const int k = j + 1;
                const Eigen::MatrixXd F = (tau * H.topLeftCorner(k, k)).exp();
                w = beta * V.leftCols(k) * F.col(0);
                res.happy_breakdown = true;
                done = true;
                break;
            }
            H(j + 1, j) = s;
            V.col(j + 1) = p / s;
            const int k = j + 1;
            if (k >= 3 && (k % 2 == 1 || k == m_cap)) {
                const Eigen::MatrixXd F = (tau * H.topLeftCorner(k + 1, k + 1)).exp();
                const double err = beta * std::abs(F(k, 0));
                if (err <= target(tau)) {
                    w = beta * V.leftCols(k + 1) * F.col(0);
                    err_total += err;
                    done = true;
                }
            }
        }
        if (!done) {
            // basis exhausted: shorten the step on the same subspace
            const int k = m_cap;
            for (int tries = 0;; ++tries) {
                tau *= 0.5;
                const Eigen::MatrixXd F = (tau * H.topLeftCorner(k + 1, k + 1)).exp();
                const double err = beta * std::abs(F(k, 0));
                if (err <= target(tau) || tries > 60) {
                    if (tries > 60) res.converged = false;
                    w = beta * V.leftCols(k + 1) * F.col(0);
                    err_total += err;
                    break;
                }
            }
        }
        t_now += tau;
    }
    res.y = w;
    res.err_est = err_total;
    return res;
}

ExpvResult step_affine(const Operator& A, double h, const Vec& x, const Vec& d, const ExpvOptions& opt) {
    const Eigen::Index n = x.size();
    const double eta = std::max(x.norm(), h * d.norm());
    if (eta == 0.0) {
        ExpvResult r;
        r.y = Vec::Zero(n);
        return r;
    }
    // [x; eta] under [[A, d/eta], [0, 0]]
    Operator aug = [&](const Vec& z, Vec& out) {
        Vec head = z.head(n);
        Vec y(n);
        A(head, y);
        out.resize(n + 1);
        out.head(n) = y + d * (z(n) / eta);
        out(n) = 0.0;
    };
    Vec z(n + 1);
    z.head(n) = x;
    z(n) = eta;
    ExpvResult r = expv(aug, h, z, opt);
    Vec y = r.y.head(n);
    r.y = std::move(y);
    return r;
}

PropagationResult propagate_krylov(const Operator& A, const Vec& x0, const std::vector<double>& breaks,
                                   const std::vector<Vec>& forcing, const ExpvOptions& opt) {
    if (breaks.size() != forcing.size() + 1) throw DomainError("forcing and breakpoints disagree");
    PropagationResult out;
    out.x = x0;
    for (std::size_t k = 0; k < forcing.size(); ++k) {
        const double h = breaks[k + 1] - breaks[k];
        if (h < 0.0) throw DomainError("breakpoints must be non-decreasing");
        if (h == 0.0) continue;
        ExpvResult r = step_affine(A, h, out.x, forcing[k], opt);
        out.x = std::move(r.y);
        out.err_est += r.err_est;
        out.matvecs += r.matvecs;
        out.converged = out.converged && r.converged;
    }
    return out;
}

} // namespace emff::krylov
