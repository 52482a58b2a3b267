#include "emff/errors.hpp"
#include "emff/studio.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace emff;
using namespace emff::studio;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("emff_studio_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

// Pre-seeds the cache so the study skips the formation simulation.
void seed_cache(const StudyManifest& m, double per_kg) {
    std::vector<std::pair<double, double>> s;
    for (int n : m.control.samples) s.emplace_back(n, per_kg * (1.0 + 1e-3 * n));
    const auto model = formation::fit_control_index(s, m.d_sat);
    fs::create_directories(m.control.cache_dir);
    formation::write_csv(model, (fs::path(m.control.cache_dir) /
                                 ("jdstar_" + control_index_key(m.d_sat, m.control, m.link.h) + ".csv"))
                                    .string());
}

StudyManifest small_study(const fs::path& dir) {
    json j = {{"case", 1}, {"mu_mar", {0.25, 0.75}}, {"m_sys", {500, 3000}}, {"N_GS", 4}, {"jobs", 2},
              {"control_index", {{"cache_dir", (dir / "cache").string()}}}};
    auto m = parse_manifest(j);
    seed_cache(m, 2.4e-4);
    return m;
}

} // namespace

TEST_CASE("presets") {
    const auto p1 = preset("1");
    CHECK(p1.mode == optimizer::PtMode::SidelobeSized);
    CHECK(p1.sweep.size() == 5);
    CHECK(p1.m_sys.size() == 3);
    const auto p3 = preset("3");
    CHECK(p3.mode == optimizer::PtMode::Prescribed);
    CHECK(p3.d_sat == 0.6);
    CHECK(p3.lambda == 1.2);
    CHECK(p3.mu_mar == 0.25);
    CHECK(p3.sweep_name == "P_t");
    CHECK_THROWS_AS(preset("7"), ValidationError);
}

TEST_CASE("manifest validation") {
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"colour", "red"}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"mu_mar", json::array()}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", 2}, {"m_sys", json::array()}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"P_t", {0.1}}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"constants", {{"warp", 2.0}}}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"link", {{"gain", 2.0}}}}), ValidationError);
    CHECK_THROWS_AS(parse_manifest(json{{"case", "custom"}}), ValidationError);
    // switching mode drops the preset sweep
    CHECK_THROWS_AS(parse_manifest(json{{"case", 1}, {"mode", "prescribed"}}), ValidationError);
    const auto m = parse_manifest(json{{"case", 1}, {"mode", "prescribed"}, {"P_t", {0.2}}, {"mu_mar", 0.1}});
    CHECK(m.sweep == std::vector<double>{0.2});
    CHECK(m.mu_mar == 0.1);
    const auto back = parse_manifest(to_json(m));
    CHECK(back.sweep == m.sweep);
    CHECK(back.mode == m.mode);
}

TEST_CASE("constants overrides") {
    const auto m = parse_manifest(json{{"case", 1}, {"constants", {{"r_mar", 0.004}}}});
    CHECK(resolve_constants(m).r_mar == 0.004);
    const auto j = constants_json(resolve_constants(m));
    CHECK(j["r_mar"] == 0.004);
    sizing::SizingConstants c;
    CHECK_THROWS_AS(apply_constants(c, json{{"r_mar", "x"}}), ValidationError);
}

TEST_CASE("FNV-1a reference vectors and cache keys") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
    ControlIndexSettings s;
    const auto k1 = control_index_key(0.15, s, 5e5);
    CHECK(k1 == control_index_key(0.15, s, 5e5));
    CHECK(k1 != control_index_key(0.60, s, 5e5));
    s.gains.k_A = 0.05;
    CHECK(k1 != control_index_key(0.15, s, 5e5));
}

TEST_CASE("cache hit skips the simulation; unstable gains are rejected") {
    const auto dir = scratch("cache");
    ControlIndexSettings s;
    s.cache_dir = (dir / "c").string();
    StudyManifest m;
    m.control = s;
    seed_cache(m, 1e-3);
    bool hit = false;
    const auto model = build_control_index(0.15, s, 5e5, 1, nullptr, &hit);
    CHECK(hit);
    CHECK(model.value(10.0) == doctest::Approx(1e-3 * 1.01).epsilon(1e-6));
    s.gains.k_A = 0.0;
    CHECK_THROWS_AS(build_control_index(0.15, s, 5e5, 1), SolverError);
}

TEST_CASE("study emits stable, re-checkable reports") {
    const auto dir = scratch("run");
    auto m = small_study(dir);
    const auto t = run_study(m);
    REQUIRE(t.cells.size() == 4);
    CHECK(t.feasible_count() == 4);
    emit_reports(t, (dir / "a").string());
    emit_reports(run_study(m), (dir / "b").string());
    for (const char* f : {"table.csv", "margins.csv", "table.json", "jdstar_0.15.csv"}) {
        CHECK(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }

    const auto csv = read_csv_table((dir / "a" / "table.csv").string());
    CHECK(csv.header == table_columns());
    REQUIRE(csv.rows.size() == 4);
    const int nl = csv.column("N_l"), db = csv.column("EIRP (dBW)"), gi = csv.column("gain (dBi)");
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::stoi(csv.rows[i][nl]) == t.cells[i].result.N_l);
        const auto& s = csv.rows[i][db];
        CHECK(s.size() - s.find('.') == 2);
        CHECK(csv.rows[i][gi].size() - csv.rows[i][gi].find('.') == 2);
        CHECK(std::stod(csv.rows[i][csv.column("a_sat (m)")]) == t.cells[i].result.x.a_sat);
    }

    const auto mg = read_csv_table((dir / "a" / "margins.csv").string());
    CHECK(mg.header == margin_columns());
    const int pc = mg.column("power (W)");
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& r = t.cells[i].result;
        CHECK(std::stod(mg.rows[i][pc]) == doctest::Approx(r.power.P_sap - r.power.P_tot).epsilon(1e-12));
    }

    const auto rep = check_table((dir / "a" / "table.csv").string());
    CHECK(rep.cells == 4);
    CHECK(rep.feasible == 4);
    CHECK(rep.failures == 0);
    CHECK(rep.worst >= -1e-6);
}

TEST_CASE("permuting the sweep permutes rows only") {
    const auto dir = scratch("perm");
    auto m = small_study(dir);
    const auto a = run_study(m);
    std::reverse(m.sweep.begin(), m.sweep.end());
    const auto b = run_study(m);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        const auto& x = a.cells[i];
        bool found = false;
        for (const auto& y : b.cells)
            if (y.sweep_value == x.sweep_value && y.m_sys_target == x.m_sys_target) {
                found = true;
                CHECK(y.result.N_l == x.result.N_l);
                CHECK(y.result.x.a_sat == x.result.x.a_sat);
            }
        CHECK(found);
    }
}

TEST_CASE("infeasible cells render as dashes with a reason") {
    const auto dir = scratch("infeasible");
    json j = {{"case", 2}, {"P_t", {50.0}}, {"m_sys", {3000}}, {"N_GS", 2}, {"jobs", 1},
              {"control_index", {{"cache_dir", (dir / "cache").string()}}}};
    auto m = parse_manifest(j);
    seed_cache(m, 2.4e-4);
    const auto t = run_study(m);
    CHECK(t.feasible_count() == 0);
    emit_reports(t, (dir / "o").string());
    const auto csv = read_csv_table((dir / "o" / "table.csv").string());
    CHECK(csv.rows[0][csv.column("feasible")] == "0");
    CHECK(csv.rows[0][csv.column("reason")] == "power");
    CHECK(csv.rows[0][csv.column("N_l")] == "--");
    CHECK(check_table((dir / "o" / "table.csv").string()).failures == 0);
}

TEST_CASE("design file evaluation") {
    const auto dir = scratch("eval");
    auto m = small_study(dir);
    json j = {{"manifest", to_json(m)},
              {"design", {{"a_sat", 0.0425}, {"a_coil", 0.0375}, {"q_coil", 1.47e-6}, {"n", 46}}},
              {"m_sys_target", 3000},
              {"sweep_value", 0.25}};
    j["manifest"]["control_index"]["cache_dir"] = m.control.cache_dir;
    const auto path = dir / "d.json";
    std::ofstream(path) << j.dump();
    const auto r = evaluate_file(path.string());
    CHECK(r.N_l == 93);
    CHECK(r.mass.m_3coil == doctest::Approx(0.0293).epsilon(1e-2));
    json bad = j;
    bad["design"]["radius"] = 1.0;
    std::ofstream(dir / "bad.json") << bad.dump();
    CHECK_THROWS_AS(evaluate_file((dir / "bad.json").string()), ValidationError);
}
