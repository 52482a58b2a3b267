#include "emff/formation.hpp"
#include "emff/allocation.hpp"
#include "emff/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace emff::formation {

GridGraph build_grid(int n) {
    if (n < 1) throw DomainError("grid half-width must be at least 1");
    GridGraph g;
    g.n = n;
    g.N_l = 2 * n + 1;
    g.N_all = g.N_l * g.N_l;
    g.node_i.resize(g.N_all);
    g.node_j.resize(g.N_all);
    for (int i = -n; i <= n; ++i) {
        for (int j = -n; j <= n; ++j) {
            const int a = g.node(i, j);
            g.node_i[a] = i;
            g.node_j[a] = j;
            if (i < n) {
                g.edges.emplace_back(a, g.node(i + 1, j));
                g.edge_axis.push_back(0);
            }
            if (j < n) {
                g.edges.emplace_back(a, g.node(i, j + 1));
                g.edge_axis.push_back(1);
            }
        }
    }
    const int ne = g.num_edges();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * ne);
    for (int e = 0; e < ne; ++e) {
        trip.emplace_back(g.edges[e].first, e, 1.0);
        trip.emplace_back(g.edges[e].second, e, -1.0);
    }
    g.E.resize(g.N_all, ne);
    g.E.setFromTriplets(trip.begin(), trip.end());
    g.L_e = SpMat(g.E.transpose() * g.E);
    g.L_e.makeCompressed();
    return g;
}

void check_gains(const ControlGains& g) {
    if (!(g.k_A > 0.0)) throw SolverError("gain rejected: k_A must be positive for a decaying -2C1 error");
    if (!(g.gamma * g.k_A > 0.0)) throw SolverError("gain rejected: gamma * k_A must be positive");
    if (!std::isfinite(g.k_gamma) || !std::isfinite(g.k_0)) throw SolverError("gain rejected: non-finite gain");
}

Eigen::Matrix3Xd node_positions(const GridGraph& g, const Layout& lay, const orbit::OrbitConfig& cfg,
                                double t) {
    Eigen::Matrix3Xd P(3, g.N_all);
    orbit::SwarmGeometry geom{lay.Theta_P, lay.Theta_z_xy, 0.0};
    for (int a = 0; a < g.N_all; ++a) {
        const double i = g.node_i[a], j = g.node_j[a];
        geom.r_xyd = 0.5 * lay.d_sat * std::hypot(i, j);
        const double th = std::atan2(j, i);
        P.col(a) = orbit::desired_trajectory(geom, th, cfg, t);
    }
    return P;
}

Disturbance gravity_residual(const GridGraph& g, const Layout& lay, const orbit::OrbitConfig& cfg) {
    Disturbance d;
    std::ostringstream tag;
    tag << std::setprecision(17) << "gravity_residual;r=" << cfg.r_ref << ";i=" << cfg.incl
        << ";kJ2=" << cfg.k_J2 << ";TP=" << lay.Theta_P << ";Tz=" << lay.Theta_z_xy;
    d.tag = tag.str();
    d.eval = [&g, lay, cfg](double t, Vec& dx, Vec& dy) {
        const Eigen::Matrix3Xd P = node_positions(g, lay, cfg, t);
        const double theta = cfg.omega_zref * t;
        const Eigen::Vector3d Pref(cfg.r_ref, 0.0, 0.0);
        const Eigen::Vector3d g0 = orbit::gravity_gradient(Pref, cfg.incl, theta, cfg);
        dx.resize(g.N_all);
        dy.resize(g.N_all);
        for (int a = 0; a < g.N_all; ++a) {
            const Eigen::Vector3d ga = orbit::gravity_gradient(Pref + P.col(a) * 1e-3, cfg.incl, theta, cfg);
            const Eigen::Vector3d diff = (ga - g0) * 1e3;
            dx(a) = diff.x();
            dy(a) = diff.y();
        }
    };
    return d;
}

Disturbance sinusoidal(const GridGraph& g, double d_sat, double a_x, double a_y, double omega,
                       double phase) {
    Disturbance d;
    std::ostringstream tag;
    tag << std::setprecision(17) << "sinusoidal;ax=" << a_x << ";ay=" << a_y << ";w=" << omega
        << ";p=" << phase;
    d.tag = tag.str();
    d.eval = [&g, d_sat, a_x, a_y, omega, phase](double t, Vec& dx, Vec& dy) {
        const double s = std::sin(omega * t + phase), c = std::cos(omega * t + phase);
        dx.resize(g.N_all);
        dy.resize(g.N_all);
        for (int a = 0; a < g.N_all; ++a) {
            const double i = g.node_i[a], j = g.node_j[a];
            dx(a) = a_x * d_sat * (i * s + j * c);
            dy(a) = a_y * d_sat * (i * c - j * s);
        }
    };
    return d;
}

Disturbance constant(const Vec& d_x, const Vec& d_y) {
    Disturbance d;
    d.tag = "constant";
    d.eval = [d_x, d_y](double, Vec& dx, Vec& dy) {
        dx = d_x;
        dy = d_y;
    };
    return d;
}

Disturbance none(int N_all) {
    Disturbance d;
    d.tag = "none";
    d.eval = [N_all](double, Vec& dx, Vec& dy) {
        dx = Vec::Zero(N_all);
        dy = Vec::Zero(N_all);
    };
    return d;
}

double forcing_gain(const orbit::OrbitConfig& cfg) {
    return 2.0 * cfg.c_plus / (cfg.c_minus * cfg.omega_xy);
}

SpMat closed_loop_matrix(const GridGraph& g, const ControlGains& k, const orbit::OrbitConfig& cfg) {
    const int m = g.num_edges();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * g.L_e.nonZeros() + m);
    const double a11 = -0.5 * k.k_A;
    const double a21 = -0.5 * cfg.eps2 * 0.5 * k.gamma * k.k_gamma;
    const double a22 = -0.5 * k.gamma * k.k_A;
    for (int r = 0; r < m; ++r) {
        for (SpMat::InnerIterator it(g.L_e, r); it; ++it) {
            const int c = static_cast<int>(it.col());
            trip.emplace_back(r, c, a11 * it.value());
            trip.emplace_back(m + r, c, a21 * it.value());
            trip.emplace_back(m + r, m + c, a22 * it.value());
        }
        trip.emplace_back(m + r, r, 0.5 * cfg.eps2);
    }
    SpMat A(2 * m, 2 * m);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
}

void edge_control(const GridGraph& g, const ControlGains& k, const orbit::OrbitConfig& cfg,
                  const Vec& X, Vec& a_x, Vec& a_y) {
    const int m = g.num_edges();
    const double kap = forcing_gain(cfg);
    const Vec L1 = g.L_e * X.head(m);
    const Vec L4 = g.L_e * X.tail(m);
    a_y = (0.5 * k.k_A / kap) * L1;
    a_x = (0.25 * cfg.eps2 * k.gamma * k.k_gamma / kap) * L1 + (0.5 * k.gamma * k.k_A / kap) * L4;
}

namespace {

struct Forcing {
    const GridGraph& g;
    const Disturbance& dist;
    double scale; // -k0 * kappa
    Vec dx, dy;

    void at(double t, Vec& f) {
        dist.eval(t, dx, dy);
        const int m = g.num_edges();
        f.resize(2 * m);
        f.head(m).noalias() = scale * (g.E.transpose() * dy);
        f.tail(m).noalias() = scale * (g.E.transpose() * dx);
    }
};

} // namespace

SimResult simulate_drift_dynamics(const GridGraph& g, const ControlGains& gains,
                                  const orbit::OrbitConfig& cfg, const Disturbance& dist,
                                  const SimOptions& opt) {
    check_gains(gains);
    if (!(opt.dt > 0.0)) throw DomainError("time step must be positive");
    const int m = g.num_edges();
    const SpMat A = closed_loop_matrix(g, gains, cfg);
    const double period = 2.0 * M_PI / cfg.omega_xy;
    const double T = opt.T > 0.0 ? opt.T : 3.0 * period;
    const int K = std::max(1, static_cast<int>(std::ceil(T / opt.dt - 1e-9)));
    const double h = T / K;

    bool use_krylov = false;
    switch (opt.integrator) {
    case Integrator::RK4: use_krylov = false; break;
    case Integrator::Krylov: use_krylov = true; break;
    case Integrator::Auto: use_krylov = g.N_all > opt.krylov_threshold; break;
    }

    Vec X = opt.e0.size() == 2 * m ? opt.e0 : Vec::Zero(2 * m);
    if (opt.e0.size() != 0 && opt.e0.size() != 2 * m) throw DomainError("initial state has wrong size");
    Forcing F{g, dist, -gains.k_0 * forcing_gain(cfg), {}, {}};

    SimResult res;
    res.used_krylov = use_krylov;
    res.time.reserve(K + 1);
    Vec ax, ay;
    auto record = [&](double t) {
        res.time.push_back(t);
        res.e1_norm.push_back(X.head(m).norm());
        res.e4_norm.push_back(X.tail(m).norm());
        if (opt.record_edges) res.states.push_back(X);
        edge_control(g, gains, cfg, X, ax, ay);
        for (int e = 0; e < m; ++e) {
            const double a = std::hypot(ax(e), ay(e));
            if (a > res.max_control) {
                res.max_control = a;
                res.worst_edge = e;
                res.worst_time = t;
            }
        }
        if (opt.on_step) opt.on_step(t, ax, ay);
    };
    record(0.0);

    const double n0 = X.norm();
    double ref = n0;
    const krylov::Operator op = krylov::as_operator(A);
    krylov::ExpvOptions kopt;
    kopt.tol = 1e-11;
    Vec f1, f2, f3, k1, k2, k3, k4, tmp;
    for (int s = 0; s < K; ++s) {
        const double t = s * h;
        if (use_krylov) {
            F.at(t + 0.5 * h, f1);
            krylov::ExpvResult r = krylov::step_affine(op, h, X, f1, kopt);
            X = std::move(r.y);
        } else {
            F.at(t, f1);
            F.at(t + 0.5 * h, f2);
            F.at(t + h, f3);
            k1 = A * X + f1;
            tmp = X + 0.5 * h * k1;
            k2 = A * tmp + f2;
            tmp = X + 0.5 * h * k2;
            k3 = A * tmp + f2;
            tmp = X + h * k3;
            k4 = A * tmp + f3;
            X += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        const double t1 = (s + 1) * h;
        const double nx = X.norm();
        if (!std::isfinite(nx)) throw SolverError("closed-loop divergence: non-finite state");
        if (t1 <= period) ref = std::max(ref, nx);
        else if (ref > 0.0 && nx > 1e6 * ref) throw SolverError("closed-loop divergence: error growth beyond 1e6");
        record(t1);
    }
    res.max_wrench = 0.5 * res.max_control;
    return res;
}

namespace {

constexpr int kPhiPoints = 181;

std::vector<double> make_phi_table(bool torque) {
    std::vector<double> v(kPhiPoints);
    for (int k = 0; k < kPhiPoints; ++k) {
        const double a = 0.5 * M_PI * k / (kPhiPoints - 1);
        v[k] = allocation::force_cost(Eigen::Vector3d(std::cos(a), std::sin(a), 0.0),
                                      Eigen::Vector3d::UnitX(), torque);
    }
    return v;
}

const std::vector<double>& phi_table(bool torque) {
    static const std::vector<double> free_t = make_phi_table(false);
    static const std::vector<double> zero_t = make_phi_table(true);
    return torque ? zero_t : free_t;
}

struct Candidate {
    double proxy;
    Eigen::Vector3d force;
    Eigen::Vector3d r;
    int edge;
    double t;
};

} // namespace

double cost_direction_factor(double alpha, bool constrain_torque) {
    const auto& tab = phi_table(constrain_torque);
    double a = std::abs(std::remainder(alpha, M_PI));
    if (a > 0.5 * M_PI) a = M_PI - a;
    const double x = a / (0.5 * M_PI) * (kPhiPoints - 1);
    const int k = std::min(kPhiPoints - 2, static_cast<int>(x));
    const double w = x - k;
    return (1.0 - w) * tab[k] + w * tab[k + 1];
}

JdSample estimate_Jd(int n, double d_sat, const ControlGains& gains, const orbit::OrbitConfig& cfg,
                     const JdOptions& opt) {
    if (!(d_sat > 0.0)) throw DomainError("spacing must be positive");
    const GridGraph g = build_grid(n);
    Layout lay = opt.layout;
    lay.d_sat = d_sat;
    Disturbance base = opt.disturbance ? opt.disturbance(g, lay, cfg) : gravity_residual(g, lay, cfg);
    Disturbance dist = base;
    if (opt.disturbance_scale != 1.0) {
        const double sc = opt.disturbance_scale;
        dist.eval = [base, sc](double t, Vec& dx, Vec& dy) {
            base.eval(t, dx, dy);
            dx *= sc;
            dy *= sc;
        };
    }

    const int K = std::max(1, opt.top_k);
    std::vector<Candidate> top;
    const int ne = g.num_edges();
    const double half_m = 0.5 * opt.mass;
    SimOptions so = opt.sim;
    so.on_step = [&](double t, const Vec& ax, const Vec& ay) {
        const Eigen::Matrix3Xd P = node_positions(g, lay, cfg, t);
        for (int e = 0; e < ne; ++e) {
            const double a = std::hypot(ax(e), ay(e));
            if (a == 0.0) continue;
            const Eigen::Vector3d r = P.col(g.edges[e].second) - P.col(g.edges[e].first);
            const double rn = r.norm();
            const Eigen::Vector3d f(half_m * ax(e), half_m * ay(e), 0.0);
            const double ca = std::clamp(std::abs(f.dot(r)) / (f.norm() * rn), 0.0, 1.0);
            const double r2 = rn * rn;
            const double proxy = f.norm() * r2 * r2 * cost_direction_factor(std::acos(ca), opt.constrain_torque);
            if (static_cast<int>(top.size()) < K || proxy > top.back().proxy) {
                // keep one entry per edge and time; the list stays sorted descending
                Candidate c{proxy, f, r, e, t};
                auto pos = std::upper_bound(top.begin(), top.end(), c,
                                            [](const Candidate& x, const Candidate& y) { return x.proxy > y.proxy; });
                top.insert(pos, c);
                if (static_cast<int>(top.size()) > K) top.pop_back();
            }
        }
    };
    const SimResult sim = simulate_drift_dynamics(g, gains, cfg, dist, so);

    JdSample out;
    out.n = n;
    out.peak_accel = sim.max_control;
    out.peak_force = half_m * sim.max_control;
    out.used_krylov = sim.used_krylov;
    for (const Candidate& c : top) {
        const double J = allocation::force_cost(c.force, c.r, opt.constrain_torque);
        if (J > out.J_d) {
            out.J_d = J;
            out.worst_edge = c.edge;
            out.worst_time = c.t;
        }
    }
    return out;
}

double ControlIndexModel::raw(double n) const {
    double v = 0.0;
    for (int k = 4; k >= 0; --k) v = v * n + coeffs(k);
    return v;
}

double ControlIndexModel::value(double n) const { return std::max(0.0, raw(n)); }

ControlIndexModel fit_control_index(const std::vector<std::pair<double, double>>& samples, double d_sat) {
    if (samples.size() < 5) throw SolverError("quartic fit needs at least 5 samples");
    const int S = static_cast<int>(samples.size());
    double scale = 0.0;
    for (const auto& s : samples) scale = std::max(scale, std::abs(s.first));
    if (scale == 0.0) throw SolverError("quartic fit: rank deficient sample abscissae");
    Eigen::MatrixXd V(S, 5);
    Eigen::VectorXd y(S);
    for (int r = 0; r < S; ++r) {
        const double x = samples[r].first / scale;
        double p = 1.0;
        for (int k = 0; k < 5; ++k) {
            V(r, k) = p;
            p *= x;
        }
        y(r) = samples[r].second;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    qr.setThreshold(1e-12);
    if (qr.rank() < 5) throw SolverError("quartic fit: rank deficient sample abscissae");
    const Eigen::VectorXd b = qr.solve(y);

    ControlIndexModel m;
    m.d_sat = d_sat;
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
        m.coeffs(k) = b(k) / p;
        p *= scale;
    }
    m.samples = samples;
    m.n_min = samples.front().first;
    m.n_max = samples.front().first;
    double ss = 0.0;
    for (const auto& s : samples) {
        const double r = s.second - m.raw(s.first);
        m.residuals.push_back(r);
        ss += r * r;
        m.n_min = std::min(m.n_min, s.first);
        m.n_max = std::max(m.n_max, s.first);
    }
    m.rms_residual = std::sqrt(ss / S);
    return m;
}

std::vector<int> default_sample_points() { return {3, 6, 10, 15, 22, 31, 46, 71}; }

ControlIndexModel build_model(double d_sat, const ControlGains& gains, const orbit::OrbitConfig& cfg,
                              const std::vector<int>& ns, const JdOptions& opt, int jobs,
                              std::vector<JdSample>* raw) {
    check_gains(gains);
    std::vector<JdSample> out(ns.size());
    std::vector<std::exception_ptr> errs(ns.size());
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(jobs > 0 ? jobs : hw, static_cast<unsigned>(ns.size()));
    // largest grids first so the pool drains evenly
    std::vector<std::size_t> order(ns.size());
    for (std::size_t k = 0; k < ns.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ns[a] > ns[b]; });
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t q; (q = next.fetch_add(1)) < order.size();) {
            const std::size_t k = order[q];
            try {
                out[k] = estimate_Jd(ns[k], d_sat, gains, cfg, opt);
            } catch (...) {
                errs[k] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);

    std::vector<std::pair<double, double>> samples;
    for (std::size_t k = 0; k < ns.size(); ++k) samples.emplace_back(ns[k], out[k].J_d / opt.mass);
    if (raw) *raw = out;
    ControlIndexModel m = fit_control_index(samples, d_sat);
    m.per_kg = true;
    return m;
}

void write_csv(const ControlIndexModel& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "n,N_l,Jd (A^2 m^4/kg),fit_value (A^2 m^4/kg),residual (A^2 m^4/kg)\n";
    f << std::setprecision(17);
    for (std::size_t k = 0; k < m.samples.size(); ++k) {
        const double n = m.samples[k].first;
        f << n << ',' << 2 * n + 1 << ',' << m.samples[k].second << ',' << m.raw(n) << ','
          << m.residuals[k] << '\n';
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

ControlIndexModel read_csv(const std::string& path, double d_sat) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(f, line);
    std::vector<std::pair<double, double>> samples;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        std::getline(ss, a, ',');
        std::getline(ss, b, ',');
        std::getline(ss, c, ',');
        samples.emplace_back(std::stod(a), std::stod(c));
    }
    return fit_control_index(samples, d_sat);
}

} // namespace emff::formation
