#include "emff/optimizer.hpp"
#include "emff/antenna.hpp"
#include "emff/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

namespace emff::optimizer {

using sizing::SatelliteDesign;
using Vec = Eigen::VectorXd;

double received_indicator(const CaseConfig& c) {
    return antenna::link_indicator_d2d(antenna::dbm_to_watt(c.link.P_R_dBm), antenna::from_db(c.link.G_R_dBi),
                                       c.link.zeta, c.link.h, c.lambda)
        .I_R;
}

sizing::DesignBounds case_bounds(const CaseConfig& c) {
    return sizing::design_bounds(c.d_sat, c.m_sys_target, c.consts);
}

std::string reason_code(const sizing::ConstraintReport& r) {
    const std::string& w = r.worst_name;
    if (w == "power") return "power";
    if (w.rfind("mass", 0) == 0 || w == "system_mass") return "mass";
    if (w.rfind("sidelobe", 0) == 0) return "sidelobe";
    if (w.rfind("coil_", 0) == 0 || w.rfind("satellite_", 0) == 0) return "size";
    return "bounds";
}

namespace {

double control_index(const CaseConfig& c, double n, double m_sat) {
    if (!c.model) throw ValidationError("case has no control-index model");
    const double v = c.model->value(n);
    return c.model->per_kg ? v * m_sat : v;
}

double system_mass(const CaseConfig& c, double N_all, double m_sat) {
    const double g = c.consts.gamma_sys;
    return std::clamp(N_all * m_sat, (1.0 - g) * c.m_sys_target, (1.0 + g) * c.m_sys_target);
}

double transmit_power(const CaseConfig& c, double I_R, double N_l, double u) {
    if (c.mode == PtMode::Prescribed) return c.P_t;
    const double p = antenna::transmit_power_at(I_R, N_l, u);
    return std::isfinite(p) ? std::min(p, 1e9) : 1e9;
}

// Search-side constraint evaluation. Kept separate from sizing::check_constraints so that
// the final re-check is an independent path.
struct Problem {
    const CaseConfig& c;
    sizing::DesignBounds b;
    double I_R = 0.0;
    bool sidelobe = false;
    bool fix_n = false;
    double n_fixed = 0.0;

    Problem(const CaseConfig& cc) : c(cc), b(case_bounds(cc)) {
        sidelobe = cc.mode == PtMode::SidelobeSized;
        if (sidelobe) I_R = received_indicator(cc);
    }

    int dim() const { return 3 + (sidelobe ? 1 : 0) + (fix_n ? 0 : 1); }

    SatelliteDesign decode(const Vec& z) const {
        SatelliteDesign x;
        x.a_sat = b.a_sat_lo + z(0) * (b.a_sat_hi - b.a_sat_lo);
        x.a_coil = b.a_coil_lo + z(1) * (b.a_coil_hi - b.a_coil_lo);
        x.q_coil = std::exp(std::log(b.q_lo) + z(2) * (std::log(b.q_hi) - std::log(b.q_lo)));
        int k = 3;
        double t = 0.0;
        if (sidelobe) t = z(k++);
        x.n = fix_n ? n_fixed : b.n_lo + z(k) * (b.n_hi - b.n_lo);
        // u_psl searched inside its bracket: |u| = (1 + t) pi / N_l
        x.u_psl = sidelobe ? -(1.0 + t) * M_PI / x.N_l() : 0.0;
        return x;
    }

    Vec encode(const SatelliteDesign& x) const {
        Vec z(dim());
        auto unit = [](double v, double lo, double hi) { return hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0; };
        z(0) = unit(x.a_sat, b.a_sat_lo, b.a_sat_hi);
        z(1) = unit(x.a_coil, b.a_coil_lo, b.a_coil_hi);
        z(2) = unit(std::log(std::max(x.q_coil, 1e-300)), std::log(b.q_lo), std::log(b.q_hi));
        int k = 3;
        if (sidelobe) z(k++) = std::clamp(-x.u_psl * x.N_l() / M_PI - 1.0, 0.0, 1.0);
        if (!fix_n) z(k) = unit(x.n, b.n_lo, b.n_hi);
        return z;
    }

    static constexpr int kMaxMargins = 10;

    // Scaled margins, >= 0 when satisfied. Returns the count written.
    int margins(const SatelliteDesign& x, double* g) const {
        const auto& k = c.consts;
        const double d = c.d_sat;
        const auto m = sizing::component_masses(x, k);
        const double N_all = x.N_all();
        const double m_sys = system_mass(c, N_all, m.m_sat);
        const double J = control_index(c, x.n, m.m_sat);
        const double P_t = transmit_power(c, I_R, x.N_l(), x.u_psl);
        const auto p = sizing::power_budget(x, J, c.mu_mar, P_t, k);
        const double m_hi = sizing::mass_upper_bound(x.a_sat, k);
        const double m_lo = (m.m_sap + m.m_bat + m.m_bus) / (1.0 - k.eta_str);
        int i = 0;
        g[i++] = (x.a_sat - k.r_mar - x.a_coil) / d;
        g[i++] = (d - k.k_F * x.a_coil) / d;
        g[i++] = (d - 2.0 * x.a_sat) / d;
        g[i++] = (k.side_cap - 2.0 * x.a_sat) / d;
        g[i++] = k.gamma_mass - std::abs(m_sys / N_all - m.m_sat) / m.m_sat;
        g[i++] = (m_hi - m.m_sat) / m_hi;
        g[i++] = (m.m_sat - m_lo) / m_lo;
        g[i++] = k.gamma_sys - std::abs(c.m_sys_target - m_sys) / c.m_sys_target;
        g[i++] = p.margin() / std::max(p.P_sap, 1e-12);
        if (sidelobe) g[i++] = k.gamma_psl - std::abs(antenna::sidelobe_residual(x.N_l(), x.u_psl));
        return i;
    }

    double violation(const SatelliteDesign& x, double tau) const {
        double g[kMaxMargins];
        const int m = margins(x, g);
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const double v = std::min(0.0, g[i] - tau);
            s += v * v;
        }
        return s;
    }

    double worst(const SatelliteDesign& x) const {
        double g[kMaxMargins];
        const int m = margins(x, g);
        double w = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) w = std::min(w, g[i]);
        return w;
    }
};

// Projected quasi-Newton on the unit box with central-difference gradients.
Vec minimize_box(const std::function<double(const Vec&)>& f, Vec z, int max_iter) {
    const int k = static_cast<int>(z.size());
    auto proj = [](Vec v) { return v.cwiseMax(0.0).cwiseMin(1.0); };
    auto grad = [&](const Vec& p, Vec& g) {
        const double h = 1e-7;
        for (int i = 0; i < k; ++i) {
            Vec a = p, b = p;
            a(i) = std::min(1.0, p(i) + h);
            b(i) = std::max(0.0, p(i) - h);
            g(i) = (f(a) - f(b)) / (a(i) - b(i));
        }
    };
    z = proj(z);
    double fz = f(z);
    Vec g(k), gn(k);
    grad(z, g);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(k, k);
    for (int it = 0; it < max_iter; ++it) {
        std::vector<bool> bound(k, false);
        for (int i = 0; i < k; ++i)
            bound[i] = (z(i) <= 0.0 && g(i) > 0.0) || (z(i) >= 1.0 && g(i) < 0.0);
        Vec d = -H * g;
        for (int i = 0; i < k; ++i)
            if (bound[i]) d(i) = 0.0;
        if (g.dot(d) >= 0.0) {
            H.setIdentity();
            d = -g;
            for (int i = 0; i < k; ++i)
                if (bound[i]) d(i) = 0.0;
        }
        if (d.norm() < 1e-14) break;
        double t = 1.0;
        Vec zn;
        double fn = fz;
        bool ok = false;
        for (int ls = 0; ls < 50; ++ls) {
            zn = proj(z + t * d);
            fn = f(zn);
            if (fn <= fz + 1e-4 * g.dot(zn - z)) {
                ok = true;
                break;
            }
            t *= 0.5;
        }
        if (!ok) break;
        grad(zn, gn);
        const Vec s = zn - z;
        const Vec y = gn - g;
        const double sy = s.dot(y);
        const double df = fz - fn;
        z = zn;
        fz = fn;
        g = gn;
        if (sy > 1e-16) {
            const double r = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
            H = (I - r * s * y.transpose()) * H * (I - r * y * s.transpose()) + r * s * s.transpose();
        }
        if (s.lpNorm<Eigen::Infinity>() < 1e-12 || df < 1e-15 * (1.0 + std::abs(fz))) break;
    }
    return z;
}

// Feasibility re-solve with n held at an integer.
std::optional<SatelliteDesign> resolve_fixed_n(const CaseConfig& c, const SatelliteDesign& from, int n) {
    Problem pb(c);
    pb.fix_n = true;
    pb.n_fixed = n;
    SatelliteDesign x = from;
    x.n = n;
    if (pb.sidelobe) x.u_psl = antenna::solve_peak_sidelobe(x.N_l()).u_psl;
    const double tau = c.solver.buffer;
    auto f = [&](const Vec& z) { return pb.violation(pb.decode(z), tau); };
    Vec z = pb.encode(x);
    if (f(z) > 0.0) z = minimize_box(f, z, c.solver.max_iter * 2);
    x = pb.decode(z);
    if (pb.worst(x) < -1e-9) return std::nullopt;
    return x;
}

} // namespace

std::optional<SatelliteDesign> warm_start_from_xi(const CaseConfig& c, const std::array<double, 6>& xi) {
    const auto& k = c.consts;
    const auto b = case_bounds(c);
    const double a_coil_hi = b.a_coil_hi;
    const double a_sat_hi = b.a_sat_hi;
    SatelliteDesign x;
    // xi[0..5] correspond to xi_1..xi_6
    x.a_coil = std::min(c.d_sat / k.k_F, b.a_coil_lo + xi[1] * (a_coil_hi - b.a_coil_lo));
    x.a_sat = std::min(c.d_sat / 2.0, b.a_sat_lo + xi[0] * (a_sat_hi - b.a_sat_lo));
    const double m_sys_lo = (1.0 - k.gamma_sys) * c.m_sys_target;
    const double m_sys_hi = (1.0 + k.gamma_sys) * c.m_sys_target;
    const double m_sys0 = m_sys_lo + xi[2] * (m_sys_hi - m_sys_lo);

    // coil wiring budget left under the mass cap
    SatelliteDesign bare = x;
    bare.q_coil = 0.0;
    const auto m0 = sizing::component_masses(bare, k);
    const double m_coil_hi = (1.0 - k.eta_str) * sizing::mass_upper_bound(x.a_sat, k) - m0.m_sap - m0.m_bat - m0.m_bus;
    if (!(m_coil_hi > 0.0)) return std::nullopt;
    const double q_hi0 = m_coil_hi / (6.0 * M_PI * M_PI * k.rho_c * x.a_coil);
    const double q_top = std::min(q_hi0, b.q_hi);
    if (q_top < b.q_lo) return std::nullopt;
    x.q_coil = b.q_lo + xi[5] * (q_top - b.q_lo);

    const double n_hi = 0.5 * (-1.0 + std::sqrt(m_sys0 / m0.m_sat));
    if (n_hi < b.n_lo) return std::nullopt;
    x.n = b.n_lo + xi[3] * (n_hi - b.n_lo);
    const double N = 2.0 * x.n + 1.0;
    x.u_psl = (1.0 - 2.0 * k.gamma_u) * M_PI / N * xi[4] - (2.0 - k.gamma_u) * M_PI / N;
    return x;
}

std::optional<SatelliteDesign> warm_start_sample(const CaseConfig& c, std::mt19937_64& rng, int max_retries) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int r = 0; r < max_retries; ++r) {
        std::array<double, 6> xi;
        for (auto& v : xi) v = U(rng);
        if (auto x = warm_start_from_xi(c, xi)) return x;
    }
    return std::nullopt;
}

OptimResult evaluate_design(const SatelliteDesign& x_in, const CaseConfig& c) {
    OptimResult r;
    SatelliteDesign x = x_in;
    x.n = std::round(x.n);
    r.n = static_cast<int>(x.n);
    r.N_l = 2 * r.n + 1;
    r.N_all = x.N_all();
    r.objective = r.N_all;

    const bool sidelobe = c.mode == PtMode::SidelobeSized;
    antenna::SidelobeSolution sll;
    if (r.N_l >= 3) {
        sll = antenna::solve_peak_sidelobe(r.N_l);
        r.sll_dB = antenna::to_db(sll.B_env);
    }
    if (!sidelobe) x.u_psl = sll.u_psl;
    r.x = x;

    r.mass = sizing::component_masses(x, c.consts);
    r.m_sys = system_mass(c, r.N_all, r.mass.m_sat);
    r.J_d = control_index(c, x.n, r.mass.m_sat);
    r.extrapolated = c.model->extrapolated(x.n);
    r.P_t = sidelobe ? antenna::transmit_power_at(received_indicator(c), r.N_l, x.u_psl) : c.P_t;
    r.power = sizing::power_budget(x, r.J_d, c.mu_mar, r.P_t, c.consts);
    r.eirp_W = antenna::eirp(r.P_t, r.N_l);
    r.eirp_dBW = antenna::watt_to_dbw(r.eirp_W);
    r.gain_dBi = antenna::to_db(antenna::directivity_gain(r.N_l));

    antenna::ArrayGeometry geo;
    geo.N_l = r.N_l;
    geo.d_sat = c.d_sat;
    geo.lambda = c.lambda;
    geo.theta0 = c.link.theta0;
    geo.h = c.link.h;
    try {
        const auto fp = antenna::first_null_footprint(geo);
        r.footprint_m = fp.D_fp;
        r.theta_n1 = fp.theta_n1;
    } catch (const DomainError&) {
        r.footprint_m = std::numeric_limits<double>::quiet_NaN();
        r.theta_n1 = std::numeric_limits<double>::quiet_NaN();
    }

    sizing::ConstraintInputs in;
    in.d_sat = c.d_sat;
    in.m_sys_target = c.m_sys_target;
    in.m_sys = r.m_sys;
    in.sidelobe_active = sidelobe;
    r.report = sizing::check_constraints(x, r.mass, r.power, in, c.consts);
    r.feasible = r.report.feasible(1e-6);
    if (!r.feasible) r.reason = reason_code(r.report);
    return r;
}

OptimResult local_solve(const SatelliteDesign& x0, const CaseConfig& c) {
    Problem pb(c);
    const auto& s = c.solver;
    const double span = std::max(pb.b.n_hi - pb.b.n_lo, 1.0);

    // relaxed phase: n continuous, penalty continuation
    Vec z = pb.encode(x0);
    for (double rho = s.rho0; rho <= s.rho_max * 1.0000001; rho *= s.rho_factor) {
        auto f = [&](const Vec& v) {
            const SatelliteDesign x = pb.decode(v);
            return -(x.n - pb.b.n_lo) / span + rho * pb.violation(x, 0.0);
        };
        z = minimize_box(f, z, s.max_iter);
    }
    const SatelliteDesign xc = pb.decode(z);

    // integer phase: snap, then walk up while the re-solve stays feasible
    std::optional<SatelliteDesign> best;
    const int lo = static_cast<int>(std::ceil(pb.b.n_lo - 1e-9));
    const int fl = std::max(lo, static_cast<int>(std::floor(xc.n)));
    const int ce = std::max(lo, static_cast<int>(std::ceil(xc.n)));
    if (auto x = resolve_fixed_n(c, xc, ce)) best = x;
    if (!best && fl != ce)
        if (auto x = resolve_fixed_n(c, xc, fl)) best = x;
    for (int n = fl - 1; !best && n >= std::max(lo, fl - s.snap_down); --n)
        if (auto x = resolve_fixed_n(c, xc, n)) best = x;

    if (!best) {
        SatelliteDesign x = xc;
        x.n = std::max<double>(lo, std::round(xc.n));
        if (pb.sidelobe && x.N_l() >= 3) x.u_psl = antenna::solve_peak_sidelobe(x.N_l()).u_psl;
        OptimResult r = evaluate_design(x, c);
        r.feasible = false;
        if (r.reason.empty()) r.reason = reason_code(r.report);
        return r;
    }
    const int n_top = static_cast<int>(std::floor(pb.b.n_hi + 1e-9));
    for (int k = 0; k < s.polish_up && best->n + 1 <= n_top; ++k) {
        auto up = resolve_fixed_n(c, *best, static_cast<int>(best->n) + 1);
        if (!up) break;
        best = up;
    }
    return evaluate_design(*best, c);
}

OptimResult global_search(const CaseConfig& c) {
    if (c.N_GS < 1) throw ValidationError("N_GS must be at least 1");
    if (!c.model) throw ValidationError("case has no control-index model");
    std::vector<std::optional<OptimResult>> res(c.N_GS);
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int s = next++; s < c.N_GS; s = next++) {
            std::seed_seq seq{static_cast<std::uint32_t>(c.seed & 0xffffffffu), static_cast<std::uint32_t>(c.seed >> 32),
                              static_cast<std::uint32_t>(s)};
            std::mt19937_64 rng(seq);
            auto x0 = warm_start_sample(c, rng);
            if (!x0) continue;
            OptimResult r = local_solve(*x0, c);
            r.start_index = s;
            res[s] = std::move(r);
        }
    };
    int jobs = c.jobs > 0 ? c.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min(jobs, c.N_GS);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::optional<OptimResult> best;
    int feasible = 0, ran = 0;
    for (auto& r : res) {
        if (!r) continue;
        ++ran;
        if (r->feasible) ++feasible;
        if (!best) {
            best = *r;
            continue;
        }
        const bool better =
            r->feasible != best->feasible
                ? r->feasible
                : r->feasible ? (r->N_all > best->N_all ||
                                 (r->N_all == best->N_all && r->mass.m_sat < best->mass.m_sat))
                              : r->report.worst > best->report.worst;
        if (better) best = *r;
    }
    if (!best) {
        OptimResult r;
        r.feasible = false;
        r.reason = "no_start";
        r.starts = c.N_GS;
        return r;
    }
    best->starts = ran;
    best->feasible_starts = feasible;
    return *best;
}

} // namespace emff::optimizer
