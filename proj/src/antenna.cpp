#include "emff/antenna.hpp"
#include "emff/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cstdint>

namespace emff::antenna {

double to_db(double ratio) { return 10.0 * std::log10(ratio); }
double from_db(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watt(double dbm) { return from_db(dbm - 30.0); }
double watt_to_dbw(double w) { return to_db(w); }

double linear_factor(double N, double u) {
    const double s = std::sin(u);
    if (std::abs(s) < 1e-8) {
        // L'Hopital at sin u = 0
        return std::cos(N * u) / std::cos(u);
    }
    return std::sin(N * u) / (N * s);
}

double wavenumber(double lambda) { return M_PI / lambda; }

double array_factor(const ArrayGeometry& g, double theta, double phi) {
    const double k = wavenumber(g.lambda);
    const double ux = k * g.d_sat * (std::sin(theta) * std::cos(phi) - std::sin(g.theta0) * std::cos(g.phi0));
    const double uy = k * g.d_sat * (std::sin(theta) * std::sin(phi) - std::sin(g.theta0) * std::sin(g.phi0));
    return linear_factor(g.N_l, ux) * linear_factor(g.N_l, uy);
}

double directivity_gain(double N_l) {
    if (N_l < 1.0) throw DomainError("N_l must be at least 1");
    return N_l * N_l;
}

double eirp(double P_t, double N_l) {
    if (P_t < 0.0) throw DomainError("transmit power must be nonnegative");
    const double n2 = N_l * N_l;
    return P_t * n2 * n2;
}

Footprint first_null_footprint(const ArrayGeometry& g) {
    const double arg = std::sqrt(2.0) * g.lambda / (g.N_l * g.d_sat) + std::sin(g.theta0);
    if (arg > 1.0 || arg < -1.0) throw DomainError("beam edge undefined: first null outside visible space");
    Footprint f;
    f.theta_n1 = std::asin(arg);
    f.D_fp = 2.0 * std::abs(f.theta_n1 - g.theta0) * g.h;
    return f;
}

double sidelobe_residual(double N, double u) {
    return N * std::sin(u) * std::cos(N * u) - std::cos(u) * std::sin(N * u);
}

double sidelobe_envelope(double N, double u) {
    const double a = linear_factor(N, u);
    return a * a;
}

SidelobeSolution solve_peak_sidelobe(double N) {
    if (!(N >= 3.0)) throw DomainError("peak sidelobe needs N_l >= 3");
    const double lo = -2.0 * M_PI / N;
    const double hi = -M_PI / N;
    auto f = [N](double u) { return sidelobe_residual(N, u); };
    const double flo = f(lo), fhi = f(hi);
    if (flo * fhi > 0.0) throw SolverError("peak sidelobe root not bracketed");

    std::uintmax_t it = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(52);
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
    SidelobeSolution s;
    s.u_psl = 0.5 * (a + b);
    s.B_env = sidelobe_envelope(N, s.u_psl);
    s.residual = f(s.u_psl);
    s.iterations = static_cast<int>(it);
    return s;
}

LinkBudget link_indicator_d2d(double P_R, double G_R, double zeta, double h, double lambda) {
    if (!(P_R > 0.0 && G_R > 0.0 && h > 0.0 && lambda > 0.0)) throw DomainError("link inputs must be positive");
    if (!(zeta > 0.0 && zeta <= 1.0)) throw DomainError("attenuation factor outside (0, 1]");
    LinkBudget lb;
    lb.P_R = P_R;
    lb.G_R = G_R;
    lb.zeta = zeta;
    const double r = 4.0 * M_PI * h / lambda;
    lb.L_f = r * r;
    lb.I_R = zeta * P_R * lb.L_f / G_R;
    return lb;
}

double transmit_power_from_sll(double I_R, double N_l, const SidelobeSolution& sll) {
    return I_R / (N_l * N_l * N_l * N_l * sll.B_env);
}

double transmit_power_at(double I_R, double N_l, double u) {
    const double r = std::sin(u) / std::sin(N_l * u);
    return I_R / (N_l * N_l) * r * r;
}

bool grating_lobe_free(const ArrayGeometry& g, int samples) {
    const double k = wavenumber(g.lambda);
    const double sx0 = std::sin(g.theta0) * std::cos(g.phi0);
    const double sy0 = std::sin(g.theta0) * std::sin(g.phi0);
    for (int a = 0; a < samples; ++a) {
        const double theta = 0.5 * M_PI * a / (samples - 1);
        for (int b = 0; b < samples; ++b) {
            const double phi = 2.0 * M_PI * b / samples;
            const double ux = k * g.d_sat * (std::sin(theta) * std::cos(phi) - sx0);
            const double uy = k * g.d_sat * (std::sin(theta) * std::sin(phi) - sy0);
            if (std::max(std::abs(ux), std::abs(uy)) < 0.5 * M_PI) continue;
            const double A = std::abs(linear_factor(g.N_l, ux) * linear_factor(g.N_l, uy));
            if (A > 0.99) return false;
        }
    }
    return true;
}

} // namespace emff::antenna
