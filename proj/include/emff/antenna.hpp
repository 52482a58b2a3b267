#pragma once

#include <cmath>

namespace emff::antenna {

struct ArrayGeometry {
    double N_l = 1.0;   // elements per side; non-integer values allowed for relaxed search
    double d_sat = 0.15; // m
    double lambda = 0.30; // m
    double theta0 = M_PI / 6.0;
    double phi0 = M_PI / 4.0;
    double h = 5.0e5; // m
};

struct SidelobeSolution {
    double u_psl = 0.0;  // signed root on the negative bracket
    double B_env = 1.0;
    double residual = 0.0;
    int iterations = 0;
};

struct LinkBudget {
    double P_R = 0.0; // W
    double G_R = 1.0;
    double zeta = 1.0;
    double L_f = 1.0;
    double I_R = 0.0; // W
};

struct Footprint {
    double theta_n1 = 0.0; // rad
    double D_fp = 0.0;     // m
};

double to_db(double ratio);
double from_db(double db);
double dbm_to_watt(double dbm);
double watt_to_dbw(double w);

// sin(N u) / (N sin u), continuous through sin u = 0.
double linear_factor(double N, double u);

// Wavenumber used by the phase variables (pi / lambda).
double wavenumber(double lambda);

double array_factor(const ArrayGeometry& g, double theta, double phi);

double directivity_gain(double N_l);

double eirp(double P_t, double N_l);

// Throws DomainError when the first null leaves visible space.
Footprint first_null_footprint(const ArrayGeometry& g);

// Left side of the stationarity condition for the sidelobe envelope.
double sidelobe_residual(double N_l, double u);

// Envelope (sin(N u) / (N sin u))^2.
double sidelobe_envelope(double N_l, double u);

// Root on (-2 pi / N, -pi / N). Throws DomainError for N_l < 3, SolverError without a sign change.
SidelobeSolution solve_peak_sidelobe(double N_l);

LinkBudget link_indicator_d2d(double P_R, double G_R, double zeta, double h, double lambda);

double transmit_power_from_sll(double I_R, double N_l, const SidelobeSolution& sll);

// Same expression with an arbitrary envelope abscissa (used when u_psl is a search variable).
double transmit_power_at(double I_R, double N_l, double u);

// True when no secondary unit-magnitude peak appears in visible space on a dense scan.
bool grating_lobe_free(const ArrayGeometry& g, int samples = 721);

} // namespace emff::antenna
