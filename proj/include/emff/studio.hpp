#pragma once

#include "emff/formation.hpp"
#include "emff/optimizer.hpp"
#include "emff/sizing.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace emff::studio {

// Exit codes of the design CLI.
enum ExitCode { kOk = 0, kCheckFailed = 1, kValidation = 2, kAllInfeasible = 3 };

struct ControlIndexSettings {
    std::vector<int> samples = formation::default_sample_points();
    formation::ControlGains gains;
    double incl = M_PI / 4.0;      // rad
    double disturbance_scale = 1.0;
    bool constrain_torque = false;
    double T = 0.0;                // s; 0 = three in-plane periods
    double dt = 10.0;              // s
    int top_k = 16;
    std::string cache_dir = ".emff_cache";
};

struct StudyManifest {
    std::string case_id = "custom";
    double d_sat = 0.15;
    double lambda = 0.30;
    optimizer::PtMode mode = optimizer::PtMode::SidelobeSized;
    std::string sweep_name = "mu_mar"; // mu_mar or P_t
    std::vector<double> sweep;
    double mu_mar = 0.0;               // fixed value in prescribed mode
    std::vector<double> m_sys;         // kg
    std::string constants_file;
    nlohmann::json constants = nlohmann::json::object();
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int jobs = 0;
    int N_GS = 64;
    optimizer::LinkConstants link;
    ControlIndexSettings control;
};

// Presets "1", "2", "3": the three reference case studies.
StudyManifest preset(const std::string& case_id);

// A "case" key selects the preset; other keys override it. Unknown keys throw ValidationError.
StudyManifest parse_manifest(const nlohmann::json& j);
StudyManifest load_manifest(const std::string& path);
nlohmann::json to_json(const StudyManifest& m);

// Throws ValidationError on empty sweeps or mode/axis mismatch.
void validate(const StudyManifest& m);

// Flat object keyed by constant names.
void apply_constants(sizing::SizingConstants& c, const nlohmann::json& obj);
sizing::SizingConstants resolve_constants(const StudyManifest& m);
nlohmann::json constants_json(const sizing::SizingConstants& c);

std::string fnv1a_hex(const std::string& s);
std::string control_index_key(double d_sat, const ControlIndexSettings& s, double h_m);

// Builds or loads the fitted control index for d_sat. Gain problems surface as SolverError.
formation::ControlIndexModel build_control_index(double d_sat, const ControlIndexSettings& s, double h_m,
                                                 int jobs, std::ostream* log = nullptr, bool* cache_hit = nullptr);

struct StudyCell {
    double sweep_value = 0.0;
    double m_sys_target = 0.0;
    optimizer::OptimResult result;
};

struct StudyResultTable {
    StudyManifest manifest;
    sizing::SizingConstants consts;
    formation::ControlIndexModel model;
    std::string model_key;
    std::vector<StudyCell> cells;

    int feasible_count() const;
};

optimizer::CaseConfig cell_case(const StudyManifest& m, const sizing::SizingConstants& c,
                                std::shared_ptr<const formation::ControlIndexModel> model, double sweep_value,
                                double m_sys_target);

StudyResultTable run_study(const StudyManifest& m, std::ostream* log = nullptr);

// table.csv, table.json, margins.csv, jdstar_<dsat>.csv
void emit_reports(const StudyResultTable& t, const std::string& dir);

std::vector<std::string> table_columns();
std::vector<std::string> margin_columns();

// Parsed table.csv: header plus raw cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const; // -1 when absent
};
CsvTable read_csv_table(const std::string& path);

struct CheckReport {
    int cells = 0;
    int feasible = 0;
    int failures = 0;
    double worst = 0.0;
    std::vector<std::string> messages;
};

// Re-validates every feasible row of a table.csv with sizing::check_constraints.
// Constants come from a sibling table.json when present.
CheckReport check_table(const std::string& csv_path);

// Single design evaluation from a JSON file: {"case": manifest-like, "design": {...}, "m_sys_target": kg, "sweep_value": v}.
optimizer::OptimResult evaluate_file(const std::string& path, std::ostream* log = nullptr);
nlohmann::json result_json(const optimizer::OptimResult& r);

} // namespace emff::studio
