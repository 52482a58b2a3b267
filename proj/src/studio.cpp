#include "emff/studio.hpp"
#include "emff/errors.hpp"
#include "emff/orbit.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <charconv>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace emff::studio {

namespace fs = std::filesystem;
using nlohmann::json;
using optimizer::PtMode;

StudyManifest preset(const std::string& id) {
    StudyManifest m;
    m.case_id = id;
    m.m_sys = {500.0, 3000.0, 6000.0};
    if (id == "1") {
        m.mode = PtMode::SidelobeSized;
        m.sweep_name = "mu_mar";
        m.sweep = {0.0, 0.25, 0.5, 0.75, 1.0};
    } else if (id == "2" || id == "3") {
        m.mode = PtMode::Prescribed;
        m.sweep_name = "P_t";
        m.sweep = {0.1, 0.2, 0.3, 0.4, 0.5};
        m.mu_mar = 0.25;
        if (id == "3") {
            m.d_sat = 0.60;
            m.lambda = 1.20;
        }
    } else if (id == "custom") {
        m.m_sys.clear();
    } else {
        throw ValidationError("unknown case '" + id + "' (expected 1, 2, 3 or custom)");
    }
    return m;
}

namespace {

std::vector<double> number_list(const json& v, const char* key) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& e : v) {
            if (!e.is_number()) throw ValidationError(std::string("'") + key + "' must hold numbers");
            out.push_back(e.get<double>());
        }
    } else {
        throw ValidationError(std::string("'") + key + "' must be a number or a list of numbers");
    }
    return out;
}

double number(const json& v, const char* key) {
    if (!v.is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
    return v.get<double>();
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

std::string mode_name(PtMode m) { return m == PtMode::SidelobeSized ? "sidelobe" : "prescribed"; }

PtMode parse_mode(const std::string& s) {
    if (s == "sidelobe") return PtMode::SidelobeSized;
    if (s == "prescribed") return PtMode::Prescribed;
    throw ValidationError("mode must be 'sidelobe' or 'prescribed'");
}

// shortest text that round-trips
std::string fmt(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt1(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.1f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

void write_row(std::ostream& f, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) f << ',';
        f << csv_field(row[i]);
    }
    f << '\n';
}

std::vector<std::string> split_csv_line(std::istream& in, bool& ok) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false, any = false;
    ok = false;
    for (int ch; (ch = in.get()) != EOF;) {
        any = true;
        if (quoted) {
            if (ch == '"') {
                if (in.peek() == '"') {
                    cur += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                cur += static_cast<char>(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch == '\n') {
            ok = true;
            break;
        } else if (ch != '\r') {
            cur += static_cast<char>(ch);
        }
    }
    if (any) {
        out.push_back(cur);
        ok = true;
    }
    return out;
}

std::string dsat_label(double d) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", d);
    return buf;
}

} // namespace

StudyManifest parse_manifest(const json& j) {
    static const std::set<std::string> keys = {"case", "d_sat", "lambda", "mode", "mu_mar", "P_t", "m_sys",
                                               "constants", "constants_file", "out", "seed", "jobs", "N_GS",
                                               "link", "control_index"};
    reject_unknown(j, keys, "manifest");
    std::string id = "custom";
    if (j.contains("case")) {
        const auto& c = j["case"];
        if (c.is_number_integer()) id = std::to_string(c.get<int>());
        else if (c.is_string()) id = c.get<std::string>();
        else throw ValidationError("'case' must be 1, 2, 3 or \"custom\"");
    }
    StudyManifest m = preset(id);
    const PtMode preset_mode = m.mode;
    if (j.contains("mode")) {
        if (!j["mode"].is_string()) throw ValidationError("'mode' must be a string");
        m.mode = parse_mode(j["mode"].get<std::string>());
    }
    if (m.mode != preset_mode) {
        m.sweep.clear();
        m.mu_mar = 0.0;
    }
    m.sweep_name = m.mode == PtMode::SidelobeSized ? "mu_mar" : "P_t";

    if (j.contains("d_sat")) m.d_sat = number(j["d_sat"], "d_sat");
    if (j.contains("lambda")) m.lambda = number(j["lambda"], "lambda");
    if (m.mode == PtMode::SidelobeSized) {
        if (j.contains("P_t")) throw ValidationError("'P_t' is derived from the sidelobe limit in sidelobe mode");
        if (j.contains("mu_mar")) m.sweep = number_list(j["mu_mar"], "mu_mar");
    } else {
        if (j.contains("P_t")) m.sweep = number_list(j["P_t"], "P_t");
        if (j.contains("mu_mar")) {
            const auto v = number_list(j["mu_mar"], "mu_mar");
            if (v.size() != 1) throw ValidationError("prescribed mode sweeps P_t; 'mu_mar' must be a single value");
            m.mu_mar = v[0];
        }
    }
    if (j.contains("m_sys")) m.m_sys = number_list(j["m_sys"], "m_sys");
    if (j.contains("constants")) {
        if (!j["constants"].is_object()) throw ValidationError("constants must be an object");
        m.constants = j["constants"];
        for (auto it = m.constants.begin(); it != m.constants.end(); ++it) {
            bool known = false;
            for (const auto& n : sizing::constant_names()) known = known || n == it.key();
            if (!known) throw ValidationError("unknown constant '" + it.key() + "'");
        }
    }
    if (j.contains("constants_file")) m.constants_file = j["constants_file"].get<std::string>();
    if (j.contains("out")) m.out_dir = j["out"].get<std::string>();
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0)
            throw ValidationError("'seed' must be a nonnegative integer");
        m.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("jobs")) m.jobs = j["jobs"].get<int>();
    if (j.contains("N_GS")) m.N_GS = j["N_GS"].get<int>();
    if (j.contains("link")) {
        const auto& l = j["link"];
        reject_unknown(l, {"P_R_dBm", "G_R_dBi", "zeta", "h", "theta0"}, "link");
        if (l.contains("P_R_dBm")) m.link.P_R_dBm = number(l["P_R_dBm"], "P_R_dBm");
        if (l.contains("G_R_dBi")) m.link.G_R_dBi = number(l["G_R_dBi"], "G_R_dBi");
        if (l.contains("zeta")) m.link.zeta = number(l["zeta"], "zeta");
        if (l.contains("h")) m.link.h = number(l["h"], "h");
        if (l.contains("theta0")) m.link.theta0 = number(l["theta0"], "theta0");
    }
    if (j.contains("control_index")) {
        const auto& c = j["control_index"];
        reject_unknown(c, {"samples", "k_A", "gamma", "k_gamma", "k_0", "incl", "disturbance_scale",
                           "constrain_torque", "T", "dt", "top_k", "cache_dir"},
                       "control_index");
        auto& s = m.control;
        if (c.contains("samples")) {
            s.samples.clear();
            for (double v : number_list(c["samples"], "samples")) s.samples.push_back(static_cast<int>(v));
        }
        if (c.contains("k_A")) s.gains.k_A = number(c["k_A"], "k_A");
        if (c.contains("gamma")) s.gains.gamma = number(c["gamma"], "gamma");
        if (c.contains("k_gamma")) s.gains.k_gamma = number(c["k_gamma"], "k_gamma");
        if (c.contains("k_0")) s.gains.k_0 = number(c["k_0"], "k_0");
        if (c.contains("incl")) s.incl = number(c["incl"], "incl");
        if (c.contains("disturbance_scale")) s.disturbance_scale = number(c["disturbance_scale"], "disturbance_scale");
        if (c.contains("constrain_torque")) s.constrain_torque = c["constrain_torque"].get<bool>();
        if (c.contains("T")) s.T = number(c["T"], "T");
        if (c.contains("dt")) s.dt = number(c["dt"], "dt");
        if (c.contains("top_k")) s.top_k = c["top_k"].get<int>();
        if (c.contains("cache_dir")) s.cache_dir = c["cache_dir"].get<std::string>();
    }
    validate(m);
    return m;
}

StudyManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open manifest " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("manifest parse error: ") + e.what());
    }
    return parse_manifest(j);
}

json to_json(const StudyManifest& m) {
    json j;
    j["case"] = m.case_id;
    j["mode"] = mode_name(m.mode);
    j["d_sat"] = m.d_sat;
    j["lambda"] = m.lambda;
    if (m.mode == PtMode::SidelobeSized) {
        j["mu_mar"] = m.sweep;
    } else {
        j["P_t"] = m.sweep;
        j["mu_mar"] = m.mu_mar;
    }
    j["m_sys"] = m.m_sys;
    j["constants"] = m.constants;
    if (!m.constants_file.empty()) j["constants_file"] = m.constants_file;
    j["seed"] = m.seed;
    j["N_GS"] = m.N_GS;
    j["link"] = {{"P_R_dBm", m.link.P_R_dBm}, {"G_R_dBi", m.link.G_R_dBi}, {"zeta", m.link.zeta},
                 {"h", m.link.h}, {"theta0", m.link.theta0}};
    const auto& s = m.control;
    j["control_index"] = {{"samples", s.samples},
                          {"k_A", s.gains.k_A},
                          {"gamma", s.gains.gamma},
                          {"k_gamma", s.gains.k_gamma},
                          {"k_0", s.gains.k_0},
                          {"incl", s.incl},
                          {"disturbance_scale", s.disturbance_scale},
                          {"constrain_torque", s.constrain_torque},
                          {"T", s.T},
                          {"dt", s.dt},
                          {"top_k", s.top_k}};
    return j;
}

void validate(const StudyManifest& m) {
    if (m.sweep.empty()) throw ValidationError("sweep list '" + m.sweep_name + "' is empty");
    if (m.m_sys.empty()) throw ValidationError("m_sys list is empty");
    if (!(m.d_sat > 0.0) || !(m.lambda > 0.0)) throw ValidationError("d_sat and lambda must be positive");
    if (m.N_GS < 1) throw ValidationError("N_GS must be at least 1");
    for (double v : m.m_sys)
        if (!(v > 0.0)) throw ValidationError("m_sys values must be positive");
    for (double v : m.sweep)
        if (!(v >= 0.0)) throw ValidationError(m.sweep_name + " values must be nonnegative");
    if (m.mode == PtMode::Prescribed && !(m.mu_mar >= 0.0)) throw ValidationError("mu_mar must be nonnegative");
    if (m.control.samples.size() < 5) throw ValidationError("control index needs at least 5 sample points");
    for (int n : m.control.samples)
        if (n < 1) throw ValidationError("control index sample points must be >= 1");
}

void apply_constants(sizing::SizingConstants& c, const json& obj) {
    if (!obj.is_object()) throw ValidationError("constants must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!it.value().is_number()) throw ValidationError("constant '" + it.key() + "' must be a number");
        sizing::set_constant(c, it.key(), it.value().get<double>());
    }
}

sizing::SizingConstants resolve_constants(const StudyManifest& m) {
    sizing::SizingConstants c;
    if (!m.constants_file.empty()) {
        std::ifstream f(m.constants_file);
        if (!f) throw ValidationError("cannot open constants file " + m.constants_file);
        json j;
        try {
            j = json::parse(f);
        } catch (const json::parse_error& e) {
            throw ValidationError(std::string("constants parse error: ") + e.what());
        }
        apply_constants(c, j);
    }
    apply_constants(c, m.constants);
    return c;
}

json constants_json(const sizing::SizingConstants& c) {
    json j = json::object();
    for (const auto& n : sizing::constant_names()) j[n] = sizing::get_constant(c, n);
    return j;
}

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

orbit::OrbitConfig sim_orbit(const ControlIndexSettings& s, double h_m) {
    return orbit::from_altitude(h_m / 1000.0, s.incl);
}

formation::JdOptions jd_options(const ControlIndexSettings& s) {
    formation::JdOptions o;
    o.sim.T = s.T;
    o.sim.dt = s.dt;
    o.top_k = s.top_k;
    o.disturbance_scale = s.disturbance_scale;
    o.constrain_torque = s.constrain_torque;
    return o;
}

} // namespace

std::string control_index_key(double d_sat, const ControlIndexSettings& s, double h_m) {
    const auto cfg = sim_orbit(s, h_m);
    formation::GridGraph g = formation::build_grid(1);
    formation::Layout lay;
    lay.d_sat = d_sat;
    const auto dist = formation::gravity_residual(g, lay, cfg);
    std::ostringstream k;
    k << std::setprecision(17) << "v1;d=" << d_sat << ";kA=" << s.gains.k_A << ";g=" << s.gains.gamma
      << ";kg=" << s.gains.k_gamma << ";k0=" << s.gains.k_0 << ";dist=" << dist.tag
      << ";scale=" << s.disturbance_scale << ";torque=" << s.constrain_torque << ";T=" << s.T << ";dt=" << s.dt
      << ";top=" << s.top_k << ";n=";
    for (int n : s.samples) k << n << ' ';
    return fnv1a_hex(k.str());
}

formation::ControlIndexModel build_control_index(double d_sat, const ControlIndexSettings& s, double h_m, int jobs,
                                                 std::ostream* log, bool* cache_hit) {
    formation::check_gains(s.gains);
    const std::string key = control_index_key(d_sat, s, h_m);
    const fs::path file = fs::path(s.cache_dir) / ("jdstar_" + key + ".csv");
    if (cache_hit) *cache_hit = false;
    if (!s.cache_dir.empty() && fs::exists(file)) {
        if (log) *log << "control index d_sat=" << d_sat << ": cache hit " << file.string() << '\n';
        if (cache_hit) *cache_hit = true;
        return formation::read_csv(file.string(), d_sat);
    }
    if (log) *log << "control index d_sat=" << d_sat << ": building (" << s.samples.size() << " grids)\n";
    const auto m = formation::build_model(d_sat, s.gains, sim_orbit(s, h_m), s.samples, jd_options(s), jobs);
    if (!s.cache_dir.empty()) {
        fs::create_directories(s.cache_dir);
        formation::write_csv(m, file.string());
    }
    return m;
}

int StudyResultTable::feasible_count() const {
    int k = 0;
    for (const auto& c : cells) k += c.result.feasible ? 1 : 0;
    return k;
}

optimizer::CaseConfig cell_case(const StudyManifest& m, const sizing::SizingConstants& c,
                                std::shared_ptr<const formation::ControlIndexModel> model, double v, double ms) {
    optimizer::CaseConfig cc;
    cc.d_sat = m.d_sat;
    cc.lambda = m.lambda;
    cc.m_sys_target = ms;
    cc.mode = m.mode;
    if (m.mode == PtMode::SidelobeSized) {
        cc.mu_mar = v;
    } else {
        cc.mu_mar = m.mu_mar;
        cc.P_t = v;
    }
    cc.model = std::move(model);
    cc.N_GS = m.N_GS;
    cc.seed = m.seed;
    cc.jobs = m.jobs;
    cc.link = m.link;
    cc.consts = c;
    return cc;
}

StudyResultTable run_study(const StudyManifest& m, std::ostream* log) {
    validate(m);
    StudyResultTable t;
    t.manifest = m;
    t.consts = resolve_constants(m);
    if (m.d_sat > m.lambda / 2.0 && log) *log << "warning: d_sat exceeds lambda/2; grating lobes possible\n";
    t.model_key = control_index_key(m.d_sat, m.control, m.link.h);
    t.model = build_control_index(m.d_sat, m.control, m.link.h, m.jobs, log);
    auto model = std::make_shared<const formation::ControlIndexModel>(t.model);
    for (double v : m.sweep)
        for (double ms : m.m_sys) {
            StudyCell cell;
            cell.sweep_value = v;
            cell.m_sys_target = ms;
            t.cells.push_back(cell);
        }

    // bounded cell pool; each cell seeds its own starts, so the order of completion does not matter
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const int workers = std::clamp(m.jobs > 0 ? m.jobs : hw, 1, static_cast<int>(t.cells.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
        for (std::size_t i; (i = next++) < t.cells.size();) {
            auto& cell = t.cells[i];
            try {
                cell.result = optimizer::global_search(cell_case(m, t.consts, model, cell.sweep_value, cell.m_sys_target));
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    if (log)
        for (const auto& cell : t.cells) {
            const auto& r = cell.result;
            *log << m.sweep_name << '=' << cell.sweep_value << " m_sys=" << cell.m_sys_target << ": "
                 << (r.feasible ? "N_l=" + std::to_string(r.N_l) : "-- (" + r.reason + ")") << '\n';
        }
    return t;
}

std::vector<std::string> table_columns() {
    return {"case", "mode", "d_sat (m)", "lambda (m)", "sweep", "sweep_value", "mu_mar (A m^2)",
            "m_sys_target (kg)", "feasible", "reason", "n", "N_l", "N_all", "a_sat (m)", "a_coil (m)",
            "q_coil (m^2)", "u_psl (rad)", "m_sat (kg)", "m_3coil (kg)", "m_bat (kg)", "m_str (kg)", "m_sap (kg)",
            "m_bus (kg)", "m_sys (kg)", "P_sap (W)", "P_cont (W)", "P_mis (W)", "P_bus (W)", "P_mar (W)",
            "P_tot (W)", "P_t (W)", "J_d (A^2 m^4)", "EIRP (W)", "EIRP (dBW)", "gain (dBi)", "SLL (dB)",
            "footprint (km)", "extrapolated", "starts", "feasible_starts", "worst_margin (-)"};
}

namespace {

const std::vector<std::pair<std::string, std::string>>& margin_units() {
    static const std::vector<std::pair<std::string, std::string>> u = {
        {"coil_in_satellite", "m"}, {"coil_spacing", "m"},          {"satellite_spacing", "m"},
        {"satellite_cap", "m"},     {"mass_consistency", "kg"},     {"mass_upper", "kg"},
        {"mass_lower", "kg"},       {"system_mass", "kg"},          {"power", "W"},
        {"sidelobe_stationarity", "-"}, {"sidelobe_bracket_lo", "rad"}, {"sidelobe_bracket_hi", "rad"},
    };
    return u;
}

std::vector<std::string> table_row(const StudyResultTable& t, const StudyCell& c) {
    const auto& m = t.manifest;
    const auto& r = c.result;
    const double mu = m.mode == PtMode::SidelobeSized ? c.sweep_value : m.mu_mar;
    std::vector<std::string> row = {m.case_id,
                                    mode_name(m.mode),
                                    fmt(m.d_sat),
                                    fmt(m.lambda),
                                    m.sweep_name,
                                    fmt(c.sweep_value),
                                    fmt(mu),
                                    fmt(c.m_sys_target),
                                    r.feasible ? "1" : "0",
                                    r.feasible ? "" : r.reason};
    if (!r.feasible) {
        row.resize(table_columns().size(), "--");
        return row;
    }
    auto num = [](double v) { return std::isfinite(v) ? fmt(v) : std::string("--"); };
    const std::vector<std::string> rest = {
        std::to_string(r.n), std::to_string(r.N_l), fmt(r.N_all), fmt(r.x.a_sat), fmt(r.x.a_coil), fmt(r.x.q_coil),
        fmt(r.x.u_psl), fmt(r.mass.m_sat), fmt(r.mass.m_3coil), fmt(r.mass.m_bat), fmt(r.mass.m_str),
        fmt(r.mass.m_sap), fmt(r.mass.m_bus), fmt(r.m_sys), fmt(r.power.P_sap), fmt(r.power.P_cont),
        fmt(r.power.P_mis), fmt(r.power.P_bus), fmt(r.power.P_mar), fmt(r.power.P_tot), fmt(r.P_t), fmt(r.J_d),
        fmt(r.eirp_W), fmt1(r.eirp_dBW), fmt1(r.gain_dBi), fmt1(r.sll_dB),
        std::isfinite(r.footprint_m) ? num(r.footprint_m / 1000.0) : "--", r.extrapolated ? "1" : "0",
        std::to_string(r.starts), std::to_string(r.feasible_starts), fmt(r.report.worst)};
    row.insert(row.end(), rest.begin(), rest.end());
    return row;
}

} // namespace

std::vector<std::string> margin_columns() {
    std::vector<std::string> h = {"case", "sweep", "sweep_value", "m_sys_target (kg)", "feasible"};
    for (const auto& [n, u] : margin_units()) h.push_back(n + " (" + u + ")");
    h.push_back("worst_scaled (-)");
    h.push_back("worst_name");
    return h;
}

namespace {

json cell_json(const StudyCell& c) {
    json j = result_json(c.result);
    j["sweep_value"] = c.sweep_value;
    j["m_sys_target"] = c.m_sys_target;
    return j;
}

} // namespace

json result_json(const optimizer::OptimResult& r) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json j;
    j["feasible"] = r.feasible;
    j["reason"] = r.reason;
    if (!r.feasible && r.reason == "no_start") return j;
    j["design"] = {{"a_sat", r.x.a_sat}, {"a_coil", r.x.a_coil}, {"q_coil", r.x.q_coil},
                   {"n", r.n},           {"u_psl", r.x.u_psl}};
    j["N_l"] = r.N_l;
    j["N_all"] = r.N_all;
    j["mass"] = {{"m_sat", r.mass.m_sat}, {"m_3coil", r.mass.m_3coil}, {"m_bat", r.mass.m_bat},
                 {"m_str", r.mass.m_str}, {"m_sap", r.mass.m_sap},     {"m_bus", r.mass.m_bus}};
    j["m_sys"] = r.m_sys;
    j["power"] = {{"P_sap", r.power.P_sap}, {"P_cont", r.power.P_cont}, {"P_mis", r.power.P_mis},
                  {"P_bus", r.power.P_bus}, {"P_mar", r.power.P_mar},   {"P_tot", r.power.P_tot}};
    j["J_d"] = r.J_d;
    j["P_t"] = r.P_t;
    j["EIRP_W"] = r.eirp_W;
    j["EIRP_dBW"] = r.eirp_dBW;
    j["gain_dBi"] = r.gain_dBi;
    j["SLL_dB"] = r.sll_dB;
    j["footprint_m"] = num(r.footprint_m);
    j["extrapolated"] = r.extrapolated;
    j["starts"] = r.starts;
    j["feasible_starts"] = r.feasible_starts;
    json mg = json::object();
    for (const auto& m : r.report.margins) mg[m.name] = {{"raw", m.raw}, {"scaled", m.scaled}};
    j["margins"] = mg;
    j["worst_margin"] = r.report.worst;
    j["worst_name"] = r.report.worst_name;
    return j;
}

void emit_reports(const StudyResultTable& t, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    auto open = [&](const std::string& name) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        return f;
    };
    {
        auto f = open("table.csv");
        write_row(f, table_columns());
        for (const auto& c : t.cells) write_row(f, table_row(t, c));
        if (!f) throw std::runtime_error("write failed for table.csv");
    }
    {
        auto f = open("margins.csv");
        write_row(f, margin_columns());
        for (const auto& c : t.cells) {
            const auto& r = c.result;
            std::vector<std::string> row = {t.manifest.case_id, t.manifest.sweep_name, fmt(c.sweep_value),
                                            fmt(c.m_sys_target), r.feasible ? "1" : "0"};
            for (const auto& mu : margin_units()) {
                const auto* m = r.report.find(mu.first);
                row.push_back(m ? fmt(m->raw) : "--");
            }
            row.push_back(r.report.margins.empty() ? "--" : fmt(r.report.worst));
            row.push_back(r.report.margins.empty() ? "--" : r.report.worst_name);
            write_row(f, row);
        }
        if (!f) throw std::runtime_error("write failed for margins.csv");
    }
    {
        json j;
        j["manifest"] = to_json(t.manifest);
        j["constants"] = constants_json(t.consts);
        j["control_index"] = {{"d_sat", t.model.d_sat},
                              {"key", t.model_key},
                              {"coeffs", std::vector<double>(t.model.coeffs.data(), t.model.coeffs.data() + 5)},
                              {"per_kg", t.model.per_kg},
                              {"rms_residual", t.model.rms_residual},
                              {"n_min", t.model.n_min},
                              {"n_max", t.model.n_max}};
        json cells = json::array();
        for (const auto& c : t.cells) cells.push_back(cell_json(c));
        j["cells"] = cells;
        auto f = open("table.json");
        f << j.dump(2) << '\n';
        if (!f) throw std::runtime_error("write failed for table.json");
    }
    formation::write_csv(t.model, (fs::path(dir) / ("jdstar_" + dsat_label(t.manifest.d_sat) + ".csv")).string());
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv_table(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open table " + path);
    CsvTable t;
    bool ok = false;
    t.header = split_csv_line(f, ok);
    if (!ok || t.header.empty()) throw ValidationError("table " + path + " has no header");
    while (true) {
        auto row = split_csv_line(f, ok);
        if (!ok) break;
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != t.header.size()) throw ValidationError("ragged row in " + path);
        t.rows.push_back(std::move(row));
    }
    return t;
}

CheckReport check_table(const std::string& csv_path) {
    const CsvTable t = read_csv_table(csv_path);
    sizing::SizingConstants consts;
    const fs::path side = fs::path(csv_path).parent_path() / "table.json";
    if (fs::exists(side)) {
        std::ifstream f(side);
        const json j = json::parse(f);
        if (j.contains("constants")) apply_constants(consts, j["constants"]);
    }
    auto col = [&](const std::string& n) {
        const int c = t.column(n);
        if (c < 0) throw ValidationError("table lacks column '" + n + "'");
        return c;
    };
    const int c_mode = col("mode"), c_d = col("d_sat (m)"), c_feas = col("feasible"), c_n = col("n");
    const int c_as = col("a_sat (m)"), c_ac = col("a_coil (m)"), c_q = col("q_coil (m^2)"), c_u = col("u_psl (rad)");
    const int c_ms = col("m_sys (kg)"), c_mt = col("m_sys_target (kg)"), c_J = col("J_d (A^2 m^4)");
    const int c_pt = col("P_t (W)"), c_mu = col("mu_mar (A m^2)");

    CheckReport rep;
    rep.worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        ++rep.cells;
        if (r[c_feas] != "1") continue;
        ++rep.feasible;
        sizing::SatelliteDesign x;
        x.a_sat = std::stod(r[c_as]);
        x.a_coil = std::stod(r[c_ac]);
        x.q_coil = std::stod(r[c_q]);
        x.n = std::stod(r[c_n]);
        x.u_psl = std::stod(r[c_u]);
        const auto mass = sizing::component_masses(x, consts);
        const auto pw = sizing::power_budget(x, std::stod(r[c_J]), std::stod(r[c_mu]), std::stod(r[c_pt]), consts);
        sizing::ConstraintInputs in;
        in.d_sat = std::stod(r[c_d]);
        in.m_sys_target = std::stod(r[c_mt]);
        in.m_sys = std::stod(r[c_ms]);
        in.sidelobe_active = r[c_mode] == "sidelobe";
        const auto cr = sizing::check_constraints(x, mass, pw, in, consts);
        rep.worst = std::min(rep.worst, cr.worst);
        if (!cr.feasible(1e-6)) {
            ++rep.failures;
            rep.messages.push_back("row " + std::to_string(i + 1) + ": " + cr.worst_name + " margin " + fmt(cr.worst));
        }
    }
    if (rep.feasible == 0) rep.worst = 0.0;
    return rep;
}

optimizer::OptimResult evaluate_file(const std::string& path, std::ostream* log) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open design file " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("design file parse error: ") + e.what());
    }
    reject_unknown(j, {"manifest", "design", "m_sys_target", "sweep_value"}, "design file");
    if (!j.contains("design")) throw ValidationError("design file needs a 'design' object");
    StudyManifest m = j.contains("manifest") ? parse_manifest(j["manifest"]) : preset("1");
    const auto& d = j["design"];
    reject_unknown(d, {"a_sat", "a_coil", "q_coil", "n", "u_psl"}, "design");
    sizing::SatelliteDesign x;
    x.a_sat = number(d.at("a_sat"), "a_sat");
    x.a_coil = number(d.at("a_coil"), "a_coil");
    x.q_coil = number(d.at("q_coil"), "q_coil");
    x.n = number(d.at("n"), "n");
    if (d.contains("u_psl")) x.u_psl = number(d["u_psl"], "u_psl");
    const double ms = j.contains("m_sys_target") ? number(j["m_sys_target"], "m_sys_target") : m.m_sys.at(0);
    const double v = j.contains("sweep_value") ? number(j["sweep_value"], "sweep_value") : m.sweep.at(0);
    const auto consts = resolve_constants(m);
    auto model = std::make_shared<const formation::ControlIndexModel>(
        build_control_index(m.d_sat, m.control, m.link.h, m.jobs, log));
    return optimizer::evaluate_design(x, cell_case(m, consts, model, v, ms));
}

} // namespace emff::studio
