#include "emff/sizing.hpp"
#include "emff/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

namespace emff::sizing {

std::vector<std::pair<double, double>> reference_satellites() {
    return {
        {2.0 * 2.0 * 0.075, 10.0},
        {9.0 * 9.5 * 1.0, 70.0},
        {9.0 * 9.0 * 1.0, 100.0},
        {4.0 * 4.0 * 4.25, 95.5},
        {3.3 * 3.3 * 0.5, 9.9},
    };
}

std::pair<double, double> fit_empirical_mass(const std::vector<std::pair<double, double>>& rows) {
    if (rows.size() < 2) throw DomainError("empirical mass fit needs two rows");
    Eigen::MatrixXd A(rows.size(), 2);
    Eigen::VectorXd b(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = rows[i].first;
        b(i) = rows[i].second;
    }
    const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    return {c(0), c(1)};
}

SizingConstants::SizingConstants() {
    const auto c = fit_empirical_mass(reference_satellites());
    emp_c0 = c.first;
    emp_c1 = c.second;
}

namespace {

struct Entry {
    const char* name;
    double SizingConstants::*ptr;
    bool allow_zero;
};

const std::vector<Entry>& entries() {
    static const std::vector<Entry> e = {
        {"p_c", &SizingConstants::p_c, false},
        {"rho_c", &SizingConstants::rho_c, false},
        {"rho_bat", &SizingConstants::rho_bat, true},
        {"rho_sap", &SizingConstants::rho_sap, true},
        {"nu_sap", &SizingConstants::nu_sap, false},
        {"P_W_m2", &SizingConstants::P_W_m2, false},
        {"k_sap", &SizingConstants::k_sap, false},
        {"eta_str", &SizingConstants::eta_str, true},
        {"r_mar", &SizingConstants::r_mar, true},
        {"P_bus", &SizingConstants::P_bus, true},
        {"m_bus", &SizingConstants::m_bus, true},
        {"k_bat", &SizingConstants::k_bat, true},
        {"h_charge", &SizingConstants::h_charge, true},
        {"gamma_mass", &SizingConstants::gamma_mass, false},
        {"gamma_sys", &SizingConstants::gamma_sys, false},
        {"gamma_psl", &SizingConstants::gamma_psl, false},
        {"gamma_u", &SizingConstants::gamma_u, true},
        {"eta_tra", &SizingConstants::eta_tra, false},
        {"k_F", &SizingConstants::k_F, false},
        {"k_mbar", &SizingConstants::k_mbar, false},
        {"side_cap", &SizingConstants::side_cap, false},
        {"a_sat_min", &SizingConstants::a_sat_min, false},
        {"a_coil_min", &SizingConstants::a_coil_min, false},
        {"r_wire_min", &SizingConstants::r_wire_min, false},
        {"r_wire_max", &SizingConstants::r_wire_max, false},
        {"n_min", &SizingConstants::n_min, false},
        {"emp_c0", &SizingConstants::emp_c0, true},
        {"emp_c1", &SizingConstants::emp_c1, false},
    };
    return e;
}

const Entry& lookup(const std::string& name) {
    for (const auto& e : entries())
        if (name == e.name) return e;
    throw ValidationError("unknown constant '" + name + "'");
}

} // namespace

std::vector<std::string> constant_names() {
    std::vector<std::string> out;
    for (const auto& e : entries()) out.emplace_back(e.name);
    return out;
}

void set_constant(SizingConstants& c, const std::string& name, double value) {
    const Entry& e = lookup(name);
    if (!std::isfinite(value) || value < 0.0 || (!e.allow_zero && value == 0.0))
        throw ValidationError("constant '" + name + "' must be positive");
    if (name == "eta_str" && value >= 1.0) throw ValidationError("eta_str must lie in [0, 1)");
    if (name == "eta_tra" && value > 1.0) throw ValidationError("eta_tra must lie in (0, 1]");
    c.*(e.ptr) = value;
}

double get_constant(const SizingConstants& c, const std::string& name) { return c.*(lookup(name).ptr); }

double solar_power(double a_sat, const SizingConstants& c) {
    const double side = 2.0 * a_sat;
    return c.k_sap * c.P_W_m2 * side * side;
}

double coil_mass(double a_coil, double q_coil, const SizingConstants& c) {
    return 3.0 * (2.0 * M_PI * M_PI * a_coil) * q_coil * c.rho_c;
}

MassBreakdown component_masses(const SatelliteDesign& x, const SizingConstants& c) {
    if (c.eta_str >= 1.0 || c.eta_str < 0.0) throw DomainError("eta_str must lie in [0, 1)");
    MassBreakdown m;
    const double side = 2.0 * x.a_sat;
    m.m_3coil = coil_mass(x.a_coil, x.q_coil, c);
    m.m_sap = c.nu_sap * c.rho_sap * side * side;
    m.m_bat = c.rho_bat * c.k_bat * c.h_charge * solar_power(x.a_sat, c);
    m.m_bus = c.m_bus;
    m.m_sat = (m.m_3coil + m.m_sap + m.m_bat + m.m_bus) / (1.0 - c.eta_str);
    m.m_str = c.eta_str * m.m_sat;
    return m;
}

double empirical_mass(double a_sat, const SizingConstants& c) {
    const double side_cm = 200.0 * a_sat;
    return 1e-3 * (c.emp_c0 + c.emp_c1 * side_cm * side_cm * side_cm);
}

double mass_upper_bound(double a_sat, const SizingConstants& c) {
    const double side = 2.0 * a_sat;
    if (side >= 0.1) return c.k_mbar * side * side * side;
    return empirical_mass(a_sat, c);
}

double mass_branch_gap(const SizingConstants& c) {
    return c.k_mbar * 1e-3 - empirical_mass(0.05, c);
}

double mass_lower_bound(double a_sat, const SizingConstants& c) {
    SatelliteDesign x;
    x.a_sat = a_sat;
    return component_masses(x, c).m_sat;
}

double coil_power(double mu_sq, double q_coil, double a_coil, const SizingConstants& c) {
    if (!(q_coil > 0.0) || !(a_coil > 0.0)) throw DomainError("coil parameter and radius must be positive");
    return 2.0 * c.p_c * mu_sq / (M_PI * M_PI * q_coil * a_coil * a_coil * a_coil);
}

PowerBreakdown power_budget(const SatelliteDesign& x, double J_d_star, double mu_mar, double P_t,
                            const SizingConstants& c) {
    PowerBreakdown p;
    p.P_sap = solar_power(x.a_sat, c);
    // two axes, each sized for the bidirectional peak 2 J_d
    p.P_cont = 2.0 * coil_power(2.0 * J_d_star, x.q_coil, x.a_coil, c);
    p.P_mis = P_t / c.eta_tra;
    p.P_bus = c.P_bus;
    p.P_mar = coil_power(mu_mar * mu_mar, x.q_coil, x.a_coil, c);
    p.P_tot = p.P_cont + p.P_mis + p.P_bus + p.P_mar;
    return p;
}

const Margin* ConstraintReport::find(const std::string& name) const {
    for (const auto& m : margins)
        if (m.name == name) return &m;
    return nullptr;
}

ConstraintReport check_constraints(const SatelliteDesign& x, const MassBreakdown& m, const PowerBreakdown& p,
                                   const ConstraintInputs& in, const SizingConstants& c) {
    ConstraintReport r;
    auto add = [&](const char* name, char fam, double raw, double scale) {
        r.margins.push_back({name, fam, raw, raw / scale});
    };
    const double d = in.d_sat;
    add("coil_in_satellite", 'A', x.a_sat - c.r_mar - x.a_coil, d);
    add("coil_spacing", 'A', d - c.k_F * x.a_coil, d);
    add("satellite_spacing", 'A', d - 2.0 * x.a_sat, d);
    add("satellite_cap", 'A', c.side_cap - 2.0 * x.a_sat, d);

    const double N_all = x.N_all();
    add("mass_consistency", 'A', c.gamma_mass * m.m_sat - std::abs(in.m_sys / N_all - m.m_sat), m.m_sat);
    const double m_hi = mass_upper_bound(x.a_sat, c);
    add("mass_upper", 'A', m_hi - m.m_sat, m_hi);
    const double m_lo = mass_lower_bound(x.a_sat, c);
    add("mass_lower", 'A', m.m_sat - m_lo, m_lo);
    add("system_mass", 'A', c.gamma_sys * in.m_sys_target - std::abs(in.m_sys_target - in.m_sys),
        in.m_sys_target);
    add("power", 'A', p.margin(), std::max(p.P_sap, 1e-12));

    if (in.sidelobe_active) {
        const double N = x.N_l();
        add("sidelobe_stationarity", 'B',
            c.gamma_psl - std::abs(N * std::sin(x.u_psl) * std::cos(N * x.u_psl) -
                                   std::cos(x.u_psl) * std::sin(N * x.u_psl)),
            c.gamma_psl);
        add("sidelobe_bracket_lo", 'B', std::abs(x.u_psl) - M_PI / N, M_PI / N);
        add("sidelobe_bracket_hi", 'B', 2.0 * M_PI / N - std::abs(x.u_psl), M_PI / N);
    }

    add("a_sat_min", 'X', x.a_sat - c.a_sat_min, d);
    add("a_coil_min", 'X', x.a_coil - c.a_coil_min, d);
    const DesignBounds b = design_bounds(d, in.m_sys_target, c);
    add("q_min", 'X', x.q_coil - b.q_lo, b.q_lo);
    add("q_max", 'X', b.q_hi - x.q_coil, b.q_hi);
    add("n_min", 'X', x.n - c.n_min, 1.0);

    r.worst = std::numeric_limits<double>::infinity();
    for (const auto& mg : r.margins) {
        const double v = std::isfinite(mg.scaled) ? mg.scaled : -std::numeric_limits<double>::infinity();
        if (v < r.worst) {
            r.worst = v;
            r.worst_name = mg.name;
        }
    }
    return r;
}

DesignBounds design_bounds(double d_sat, double m_sys_target, const SizingConstants& c) {
    if (!(d_sat > 0.0)) throw DomainError("spacing must be positive");
    DesignBounds b;
    b.a_sat_lo = c.a_sat_min;
    b.a_sat_hi = std::min(0.5 * d_sat, 0.5 * c.side_cap);
    b.a_coil_lo = c.a_coil_min;
    b.a_coil_hi = 0.5 * d_sat - c.r_mar;
    b.q_lo = 1.0 * c.r_wire_min * c.r_wire_min;
    b.q_hi = (b.a_sat_hi / c.r_wire_min) * c.r_wire_max * c.r_wire_max;
    b.n_lo = c.n_min;
    const double m_lo = mass_lower_bound(b.a_sat_lo, c);
    const double m_sys_hi = (1.0 + c.gamma_sys) * m_sys_target;
    b.n_hi = std::max(b.n_lo, 0.5 * (-1.0 + std::sqrt(std::max(m_sys_hi, 0.0) / m_lo)));
    return b;
}

} // namespace emff::sizing
