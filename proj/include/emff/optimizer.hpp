#pragma once

#include "emff/formation.hpp"
#include "emff/sizing.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace emff::optimizer {

enum class PtMode {
    SidelobeSized, // P_t from the sidelobe equality, u_psl searched
    Prescribed,    // fixed P_t
};

struct LinkConstants {
    double P_R_dBm = -87.2;
    double G_R_dBi = 0.0;
    double zeta = 0.5;
    double h = 5.0e5;          // m
    double theta0 = M_PI / 6.0;
};

struct SolverSettings {
    double rho0 = 10.0;
    double rho_max = 1e8;
    double rho_factor = 10.0;
    int max_iter = 300;
    double buffer = 1e-7;  // scaled slack demanded by the integer re-solve
    int snap_down = 3;     // extra integers tried below floor(n)
    int polish_up = 20;    // extra integers tried above the snapped value
};

struct CaseConfig {
    double d_sat = 0.15;
    double lambda = 0.30;
    double m_sys_target = 3000.0; // kg
    PtMode mode = PtMode::SidelobeSized;
    double mu_mar = 0.0; // A m^2
    double P_t = 0.0;    // W, prescribed mode
    std::shared_ptr<const formation::ControlIndexModel> model;
    int N_GS = 64;
    std::uint64_t seed = 1;
    int jobs = 0;
    LinkConstants link;
    sizing::SizingConstants consts;
    SolverSettings solver;
};

struct OptimResult {
    sizing::SatelliteDesign x;
    int n = 0;
    int N_l = 0;
    double N_all = 0.0;
    double objective = 0.0; // N_all
    bool feasible = false;
    std::string reason;     // empty when feasible
    sizing::ConstraintReport report;
    sizing::MassBreakdown mass;
    sizing::PowerBreakdown power;
    double m_sys = 0.0;
    double J_d = 0.0;        // A^2 m^4
    double P_t = 0.0;        // W
    double eirp_W = 0.0;
    double eirp_dBW = 0.0;
    double gain_dBi = 0.0;
    double sll_dB = 0.0;
    double footprint_m = 0.0;
    double theta_n1 = 0.0;
    bool extrapolated = false;
    int start_index = -1;
    int starts = 0;
    int feasible_starts = 0;
};

// Received-power indicator for the case wavelength.
double received_indicator(const CaseConfig& c);

// Design box for the case.
sizing::DesignBounds case_bounds(const CaseConfig& c);

// Warm start from explicit uniforms xi_1..xi_6. Returns nullopt when an interval is empty.
std::optional<sizing::SatelliteDesign> warm_start_from_xi(const CaseConfig& c, const std::array<double, 6>& xi);

// Draws uniforms until a warm start exists; nullopt after max_retries.
std::optional<sizing::SatelliteDesign> warm_start_sample(const CaseConfig& c, std::mt19937_64& rng,
                                                         int max_retries = 100);

// Fixed design, no search. n is rounded to the nearest integer.
OptimResult evaluate_design(const sizing::SatelliteDesign& x, const CaseConfig& c);

OptimResult local_solve(const sizing::SatelliteDesign& x0, const CaseConfig& c);

OptimResult global_search(const CaseConfig& c);

// Family of the worst violated constraint: size, mass, power, sidelobe, bounds.
std::string reason_code(const sizing::ConstraintReport& r);

} // namespace emff::optimizer
