#pragma once

#include <cmath>

#include <string>
#include <utility>
#include <vector>

namespace emff::sizing {

// Previously flown small satellites: (volume cm^3, mass g).
std::vector<std::pair<double, double>> reference_satellites();

// Affine least-squares fit m [g] = c0 + c1 V [cm^3]; returns {c0, c1}.
std::pair<double, double> fit_empirical_mass(const std::vector<std::pair<double, double>>& rows);

struct SizingConstants {
    double p_c = 1.68e-8;        // Ohm m
    double rho_c = 8960.0;       // kg/m^3
    double rho_bat = 0.005;      // kg/Wh
    double rho_sap = 0.6;        // kg/m^2
    double nu_sap = 4.0;
    double P_W_m2 = 1367.0 * 0.3; // W/m^2
    double k_sap = 1.0;
    double eta_str = 0.25;
    double r_mar = 0.005;        // m
    double P_bus = 0.2;          // W
    double m_bus = 0.2;          // kg
    double k_bat = 0.1;
    double h_charge = 12.0;      // h
    double gamma_mass = 1e-2;    // relative
    double gamma_sys = 1e-2;     // relative
    double gamma_psl = 1e-5;
    double gamma_u = 0.1;
    double eta_tra = 0.3;
    double k_F = 4.0;
    double k_mbar = 1e3;         // kg/m^3, applied to the side length cubed
    double side_cap = 0.1;       // m; upper bound on 2 a_sat
    double a_sat_min = 0.015;    // m
    double a_coil_min = 0.005;   // m
    double r_wire_min = 0.03937e-3; // m
    double r_wire_max = 0.00105;    // m
    double n_min = 3.0;
    // f_emp coefficients, g and cm^3
    double emp_c0 = 0.0;
    double emp_c1 = 0.0;

    SizingConstants();
};

// Names accepted by set_constant; matches the member names.
std::vector<std::string> constant_names();
// Throws ValidationError for unknown names or non-positive values.
void set_constant(SizingConstants& c, const std::string& name, double value);
double get_constant(const SizingConstants& c, const std::string& name);

struct SatelliteDesign {
    double a_sat = 0.0;  // m
    double a_coil = 0.0; // m
    double q_coil = 0.0; // m^2
    double n = 0.0;      // grid half-width
    double u_psl = 0.0;  // rad

    double N_l() const { return 2.0 * n + 1.0; }
    double N_all() const { return N_l() * N_l(); }
};

struct MassBreakdown {
    double m_3coil = 0.0, m_sap = 0.0, m_bat = 0.0, m_str = 0.0, m_bus = 0.0, m_sat = 0.0;
};

struct PowerBreakdown {
    double P_sap = 0.0, P_cont = 0.0, P_mis = 0.0, P_bus = 0.0, P_mar = 0.0, P_tot = 0.0;
    double margin() const { return P_sap - P_tot; }
};

double solar_power(double a_sat, const SizingConstants& c);

double coil_mass(double a_coil, double q_coil, const SizingConstants& c);

MassBreakdown component_masses(const SatelliteDesign& x, const SizingConstants& c);

// Empirical branch (grams fit, returned in kg) evaluated at side 2 a_sat.
double empirical_mass(double a_sat, const SizingConstants& c);

double mass_upper_bound(double a_sat, const SizingConstants& c);

// Cubic minus empirical branch at 2 a_sat = 0.1 m.
double mass_branch_gap(const SizingConstants& c);

// Mass with a coil-free satellite: (m_sap + m_bat + m_bus) / (1 - eta_str).
double mass_lower_bound(double a_sat, const SizingConstants& c);

// Resistive power of one coil axis delivering a peak moment mu.
double coil_power(double mu_sq, double q_coil, double a_coil, const SizingConstants& c);

PowerBreakdown power_budget(const SatelliteDesign& x, double J_d_star, double mu_mar, double P_t,
                            const SizingConstants& c);

struct Margin {
    std::string name;
    char family = 'A'; // A: satellite, B: antenna, X: box bounds
    double raw = 0.0;
    double scaled = 0.0;
};

struct ConstraintReport {
    std::vector<Margin> margins;
    double worst = 0.0; // smallest scaled margin
    std::string worst_name;

    bool feasible(double tol = 1e-6) const { return worst >= -tol; }
    const Margin* find(const std::string& name) const;
};

struct ConstraintInputs {
    double d_sat = 0.15;
    double m_sys_target = 0.0;
    double m_sys = 0.0;
    bool sidelobe_active = false; // u_psl constraints enforced
};

ConstraintReport check_constraints(const SatelliteDesign& x, const MassBreakdown& m, const PowerBreakdown& p,
                                   const ConstraintInputs& in, const SizingConstants& c);

// Box of the design vector for a given spacing.
struct DesignBounds {
    double a_sat_lo = 0, a_sat_hi = 0;
    double a_coil_lo = 0, a_coil_hi = 0;
    double q_lo = 0, q_hi = 0;
    double n_lo = 0, n_hi = 0;
    double u_lo = -2.0 * M_PI / 3.0, u_hi = 0.0;
};

DesignBounds design_bounds(double d_sat, double m_sys_target, const SizingConstants& c);

} // namespace emff::sizing
