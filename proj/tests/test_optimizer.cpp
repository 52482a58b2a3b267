#include "emff/antenna.hpp"
#include "emff/errors.hpp"
#include "emff/optimizer.hpp"

#include <doctest.h>

#include <random>

using namespace emff;
using namespace emff::optimizer;

namespace {

// Flat per-kg control index, close to the value the 0.15 m simulation produces.
std::shared_ptr<const formation::ControlIndexModel> flat_model(double per_kg, double d_sat) {
    std::vector<std::pair<double, double>> s;
    for (int n : formation::default_sample_points()) s.emplace_back(n, per_kg);
    return std::make_shared<const formation::ControlIndexModel>(formation::fit_control_index(s, d_sat));
}

CaseConfig case1(double mu, double msys) {
    CaseConfig c;
    c.mu_mar = mu;
    c.m_sys_target = msys;
    c.model = flat_model(2.4e-4, 0.15);
    c.N_GS = 8;
    c.jobs = 2;
    return c;
}

} // namespace

TEST_CASE("warm starts stay in the box and the sidelobe bracket") {
    for (double msys : {500.0, 3000.0, 6000.0}) {
        const auto c = case1(0.25, msys);
        const auto b = case_bounds(c);
        std::mt19937_64 rng(51);
        int got = 0;
        for (int k = 0; k < 10000; ++k) {
            const auto x = warm_start_sample(c, rng);
            if (!x) continue;
            ++got;
            CHECK(x->a_sat >= b.a_sat_lo);
            CHECK(x->a_sat <= b.a_sat_hi);
            CHECK(x->a_coil >= b.a_coil_lo);
            CHECK(x->a_coil <= c.d_sat / c.consts.k_F + 1e-15);
            CHECK(x->q_coil >= b.q_lo);
            CHECK(x->q_coil <= b.q_hi);
            CHECK(x->n >= b.n_lo);
            const double N = x->N_l();
            CHECK(x->u_psl <= -(1.0 + c.consts.gamma_u) * M_PI / N + 1e-12);
            CHECK(x->u_psl >= -(2.0 - c.consts.gamma_u) * M_PI / N - 1e-12);
        }
        CHECK(got > 9000);
    }
}

TEST_CASE("warm start from explicit uniforms is deterministic") {
    const auto c = case1(0.25, 3000.0);
    const std::array<double, 6> xi{0.9, 0.5, 0.5, 0.5, 0.5, 0.5};
    const auto a = warm_start_from_xi(c, xi), b = warm_start_from_xi(c, xi);
    REQUIRE(a);
    // a small satellite leaves no mass for the coil
    CHECK_FALSE(warm_start_from_xi(c, {0.0, 0.5, 0.5, 0.5, 0.5, 0.5}));
    CHECK(a->a_sat == b->a_sat);
    CHECK(a->q_coil == b->q_coil);
}

TEST_CASE("evaluate_design reports the 93-element reference design consistently") {
    auto c = case1(0.25, 3000.0);
    sizing::SatelliteDesign x{0.0425, 0.0375, 1.47e-6, 46.2, 0.0};
    x.u_psl = antenna::solve_peak_sidelobe(93).u_psl;
    const auto r = evaluate_design(x, c);
    CHECK(r.n == 46);
    CHECK(r.N_l == 93);
    CHECK(r.gain_dBi == doctest::Approx(39.37).epsilon(1e-3));
    CHECK(std::abs(r.eirp_dBW - 39.5) <= 0.2);
    CHECK(r.J_d == doctest::Approx(2.4e-4 * r.mass.m_sat).epsilon(1e-9));
    CHECK(r.report.find("power")->raw == doctest::Approx(r.power.P_sap - r.power.P_tot));
    CHECK(std::abs(r.footprint_m - 34.7e3) < 0.05 * 34.7e3);
}

TEST_CASE("case 1 search at 0.25 A m^2, 3000 kg") {
    const auto c = case1(0.25, 3000.0);
    const auto r = global_search(c);
    REQUIRE(r.feasible);
    CHECK(r.reason.empty());
    CHECK(r.report.worst >= -1e-6);
    CHECK(std::abs(r.N_l - 93) <= 4);
    CHECK(std::abs(2e3 * r.x.a_sat - 85.0) <= 3.0);
    CHECK(r.N_l % 2 == 1);
    CHECK(r.feasible_starts <= r.starts);
    // independent re-check of the winner
    sizing::ConstraintInputs in{c.d_sat, c.m_sys_target, r.m_sys, true};
    const auto rep = sizing::check_constraints(r.x, sizing::component_masses(r.x, c.consts),
                                               sizing::power_budget(r.x, r.J_d, c.mu_mar, r.P_t, c.consts), in, c.consts);
    CHECK(rep.feasible(1e-6));
}

TEST_CASE("search is reproducible for a fixed seed and independent of thread count") {
    auto c = case1(0.5, 500.0);
    const auto a = global_search(c);
    c.jobs = 1;
    const auto b = global_search(c);
    CHECK(a.N_l == b.N_l);
    CHECK(a.x.a_sat == b.x.a_sat);
    CHECK(a.x.q_coil == b.x.q_coil);
    CHECK(a.start_index == b.start_index);
}

TEST_CASE("more system mass never shrinks the array") {
    int prev = 0;
    for (double msys : {500.0, 3000.0, 6000.0}) {
        const auto r = global_search(case1(0.5, msys));
        REQUIRE(r.feasible);
        CHECK(r.N_all >= prev);
        prev = static_cast<int>(r.N_all);
    }
}

TEST_CASE("prescribed power mode pins u to the sidelobe root") {
    auto c = case1(0.25, 3000.0);
    c.mode = PtMode::Prescribed;
    c.P_t = 0.1;
    const auto r = global_search(c);
    REQUIRE(r.feasible);
    CHECK(r.P_t == 0.1);
    CHECK(r.x.u_psl == doctest::Approx(antenna::solve_peak_sidelobe(r.N_l).u_psl));
    CHECK(r.report.find("sidelobe_stationarity") == nullptr);
}

TEST_CASE("impossible power budget gives a reason code") {
    auto c = case1(0.25, 3000.0);
    c.mode = PtMode::Prescribed;
    c.P_t = 50.0;
    const auto r = global_search(c);
    CHECK_FALSE(r.feasible);
    CHECK(r.reason == "power");
}

TEST_CASE("missing model and bad start count are rejected") {
    auto c = case1(0.25, 3000.0);
    c.N_GS = 0;
    CHECK_THROWS_AS(global_search(c), ValidationError);
    c.N_GS = 2;
    c.model.reset();
    CHECK_THROWS_AS(global_search(c), ValidationError);
}
