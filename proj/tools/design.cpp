// design: trade-study driver for the EMFF phased-array swarm.
//
//   design run <manifest.json> [--seed S] [--jobs J] [--out DIR]
//   design jdstar --dsat 0.15 [--out DIR] [--jobs J]
//   design eval <design.json>
//   design check <table.csv>

#include "emff/errors.hpp"
#include "emff/studio.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

using namespace emff;
namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& path, const std::optional<std::uint64_t>& seed, const std::optional<int>& jobs,
            const std::string& out) {
    auto m = studio::load_manifest(path);
    if (seed) m.seed = *seed;
    if (jobs) m.jobs = *jobs;
    if (!out.empty()) m.out_dir = out;
    const auto t = studio::run_study(m, &std::cerr);
    studio::emit_reports(t, m.out_dir);
    const int ok = t.feasible_count();
    std::cout << ok << "/" << t.cells.size() << " cells feasible; reports in " << m.out_dir << "\n";
    return ok == 0 ? studio::kAllInfeasible : studio::kOk;
}

int cmd_jdstar(double d_sat, const std::string& manifest, const std::optional<int>& jobs, const std::string& out) {
    studio::StudyManifest m = manifest.empty() ? studio::preset("1") : studio::load_manifest(manifest);
    if (jobs) m.jobs = *jobs;
    bool hit = false;
    const auto model = studio::build_control_index(d_sat, m.control, m.link.h, m.jobs, &std::cerr, &hit);
    const std::string dir = out.empty() ? m.out_dir : out;
    fs::create_directories(dir);
    char name[48];
    std::snprintf(name, sizeof name, "jdstar_%.2f.csv", d_sat);
    const auto file = (fs::path(dir) / name).string();
    formation::write_csv(model, file);
    std::printf("d_sat=%g m  J_d*/kg(n) = %.6e + %.6e n + %.6e n^2 + %.6e n^3 + %.6e n^4  (rms %.3e)\n", d_sat,
                model.coeffs[0], model.coeffs[1], model.coeffs[2], model.coeffs[3], model.coeffs[4],
                model.rms_residual);
    std::printf("wrote %s%s\n", file.c_str(), hit ? " (cached)" : "");
    return studio::kOk;
}

int cmd_eval(const std::string& path) {
    const auto r = studio::evaluate_file(path, &std::cerr);
    std::cout << studio::result_json(r).dump(2) << "\n";
    return r.feasible ? studio::kOk : studio::kCheckFailed;
}

int cmd_check(const std::string& path) {
    const auto rep = studio::check_table(path);
    for (const auto& msg : rep.messages) std::cout << msg << "\n";
    std::printf("%d cells, %d feasible, %d failed re-check, worst scaled margin %.3e\n", rep.cells, rep.feasible,
                rep.failures, rep.worst);
    return rep.failures ? studio::kCheckFailed : studio::kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMFF swarm antenna trade-study tool"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::string out;

    auto* run = app.add_subcommand("run", "run a case study from a manifest");
    std::string manifest;
    run->add_option("manifest", manifest, "manifest JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "multi-start seed");
    run->add_option("--jobs", jobs, "worker threads (0: all cores)");
    run->add_option("--out", out, "output directory");

    auto* jd = app.add_subcommand("jdstar", "build the control-index model for one spacing");
    double d_sat = 0.15;
    std::string jd_manifest;
    jd->add_option("--dsat", d_sat, "satellite spacing (m)")->required()->check(CLI::PositiveNumber);
    jd->add_option("--manifest", jd_manifest, "manifest supplying gains and sample points");
    jd->add_option("--jobs", jobs, "worker threads (0: all cores)");
    jd->add_option("--out", out, "output directory");

    auto* ev = app.add_subcommand("eval", "evaluate one fixed design");
    std::string design_file;
    ev->add_option("design", design_file, "design JSON")->required()->check(CLI::ExistingFile);

    auto* ck = app.add_subcommand("check", "re-validate feasible rows of a table.csv");
    std::string table;
    ck->add_option("table", table, "table.csv")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : studio::kValidation;
    }

    try {
        if (*run) return cmd_run(manifest, seed, jobs, out);
        if (*jd) return cmd_jdstar(d_sat, jd_manifest, jobs, out);
        if (*ev) return cmd_eval(design_file);
        if (*ck) return cmd_check(table);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return studio::kValidation;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return studio::kValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return studio::kCheckFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return studio::kCheckFailed;
    }
    return studio::kOk;
}
