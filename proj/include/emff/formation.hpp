#pragma once

#include "emff/krylov.hpp"
#include "emff/orbit.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace emff::formation {

using SpMat = krylov::SpMat;
using Vec = Eigen::VectorXd;

// Square grid of (2n+1)^2 nodes, indices i,j in [-n, n].
struct GridGraph {
    int n = 0;
    int N_l = 0;
    int N_all = 0;
    std::vector<std::pair<int, int>> edges; // (tail, head); head is the +i or +j neighbour
    std::vector<int> edge_axis;              // 0: along i, 1: along j
    std::vector<int> node_i, node_j;
    SpMat E;   // N_all x N_edges
    SpMat L_e; // E^T E

    int num_edges() const { return static_cast<int>(edges.size()); }
    int node(int i, int j) const { return (i + n) * N_l + (j + n); }
};

GridGraph build_grid(int n);

struct ControlGains {
    double k_A = 0.0560; // 1/s
    double gamma = 1.0;
    double k_gamma = 1.0;
    double k_0 = 1.0;
};

// Throws SolverError when the block system has no strictly stable part.
void check_gains(const ControlGains& g);

// Per-node in-plane disturbance accelerations (m/s^2) at time t.
struct Disturbance {
    std::string tag; // identifies the model for caching
    std::function<void(double t, Vec& d_x, Vec& d_y)> eval;
};

// Desired-trajectory layout: node (i, j) sits on the stable relative orbit with
// in-plane amplitude (d/2) sqrt(i^2 + j^2) and phase atan2(j, i).
struct Layout {
    double d_sat = 0.15;         // m
    double Theta_P = M_PI / 6.0; // swarm angle; pi/6 keeps neighbour spacing near d_sat
    double Theta_z_xy = 0.0;
};

// Node positions (m), 3 x N_all, at time t.
Eigen::Matrix3Xd node_positions(const GridGraph& g, const Layout& lay, const orbit::OrbitConfig& cfg,
                                double t);

// Differential point-mass + J2 gravity between each node's desired position and the reference.
Disturbance gravity_residual(const GridGraph& g, const Layout& lay, const orbit::OrbitConfig& cfg);

// d_x = a_x (i sin(wt+p) + j cos(wt+p)) d, d_y = a_y (i cos(wt+p) - j sin(wt+p)) d.
Disturbance sinusoidal(const GridGraph& g, double d_sat, double a_x, double a_y, double omega,
                       double phase);

Disturbance constant(const Vec& d_x, const Vec& d_y);

Disturbance none(int N_all);

// Closed-loop block operator on [e_{-2C1}; e_{C4}].
SpMat closed_loop_matrix(const GridGraph& g, const ControlGains& gains, const orbit::OrbitConfig& cfg);

// -(2 c+ / (c- w_xy)): converts an in-plane acceleration into the index rates.
double forcing_gain(const orbit::OrbitConfig& cfg);

enum class Integrator { Auto, RK4, Krylov };

struct SimOptions {
    double T = 0.0;  // s; 0 selects three in-plane periods
    double dt = 10.0;
    Integrator integrator = Integrator::Auto;
    int krylov_threshold = 400; // N_all above which Auto picks Krylov
    Vec e0;                     // initial [e1; e4]; empty means zero
    bool record_edges = false;  // keep every state (small grids only)
    // Called once per step with the commanded per-edge accelerations (a_x, a_y), m/s^2.
    std::function<void(double t, const Vec& a_x, const Vec& a_y)> on_step;
};

struct SimResult {
    std::vector<double> time;
    std::vector<double> e1_norm, e4_norm; // 2-norm of each block per step
    std::vector<Vec> states;              // only when record_edges
    double max_control = 0.0;             // peak |a_edge| over the horizon, m/s^2
    double max_wrench = 0.0;              // peak per-pair force for unit satellite mass, N/kg
    int worst_edge = -1;
    double worst_time = 0.0;
    bool used_krylov = false;
};

// Commanded relative acceleration per edge from the current index errors.
void edge_control(const GridGraph& g, const ControlGains& gains, const orbit::OrbitConfig& cfg,
                  const Vec& state, Vec& a_x, Vec& a_y);

SimResult simulate_drift_dynamics(const GridGraph& g, const ControlGains& gains,
                                  const orbit::OrbitConfig& cfg, const Disturbance& dist,
                                  const SimOptions& opt = {});

// Direction factor: force_cost(F, r) = |F| |r|^4 phi(angle(F, r)).
double cost_direction_factor(double alpha, bool constrain_torque = false);

struct JdSample {
    int n = 0;
    double J_d = 0.0;          // A^2 m^4 for the given mass
    double peak_accel = 0.0;   // m/s^2
    double peak_force = 0.0;   // N
    int worst_edge = -1;
    double worst_time = 0.0;
    bool used_krylov = false;
};

struct JdOptions {
    double mass = 1.0; // kg per satellite
    SimOptions sim;
    int top_k = 16;    // candidates re-solved with the exact dual
    // Disturbance factory; defaults to gravity_residual.
    std::function<Disturbance(const GridGraph&, const Layout&, const orbit::OrbitConfig&)> disturbance;
    double disturbance_scale = 1.0;
    // Torque is left to the attitude loop by default: only the force rows are targeted.
    bool constrain_torque = false;
    Layout layout;
};

JdSample estimate_Jd(int n, double d_sat, const ControlGains& gains, const orbit::OrbitConfig& cfg,
                     const JdOptions& opt = {});

struct ControlIndexModel {
    double d_sat = 0.0;
    Eigen::Matrix<double, 5, 1> coeffs = Eigen::Matrix<double, 5, 1>::Zero(); // ascending powers of n
    std::vector<std::pair<double, double>> samples;
    std::vector<double> residuals;
    double rms_residual = 0.0;
    double n_min = 0.0, n_max = 0.0;
    // true when samples are J_d per kg of satellite mass
    bool per_kg = true;

    double raw(double n) const;
    // Clamped at zero.
    double value(double n) const;
    bool extrapolated(double n) const { return n < n_min || n > n_max; }
};

ControlIndexModel fit_control_index(const std::vector<std::pair<double, double>>& samples,
                                    double d_sat = 0.0);

std::vector<int> default_sample_points();

// Samples estimate_Jd over ns concurrently (jobs <= 0: hardware concurrency) and fits.
ControlIndexModel build_model(double d_sat, const ControlGains& gains, const orbit::OrbitConfig& cfg,
                              const std::vector<int>& ns, const JdOptions& opt, int jobs = 0,
                              std::vector<JdSample>* raw = nullptr);

// Columns: n, N_l, Jd, fit_value, residual.
void write_csv(const ControlIndexModel& m, const std::string& path);
ControlIndexModel read_csv(const std::string& path, double d_sat);

} // namespace emff::formation
