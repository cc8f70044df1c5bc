// Command-line front end: single solves, convergence studies, the reference suite and mesh tools.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hfv/study.hpp"

namespace fs = std::filesystem;
using namespace hfv;

namespace {

constexpr int kUsageError = 2;

struct CommonFlags {
    std::string config;
    std::optional<std::string> scheme, problem, mesh_family, mesh_file, levels, out, solver;
    std::optional<long long> seed;
    std::optional<double> tol;
    bool vanishing_diffusion = false;
    std::vector<std::string> overrides;

    void add_to(CLI::App* app, bool study_flags) {
        app->add_option("--config", config, "key = value config file");
        app->add_option("--levels", levels, "refinement levels, e.g. 1-6 or 3,4");
        app->add_option("--seed", seed, "seed of the mesh perturbation");
        app->add_option("--mesh-family", mesh_family, "M1..M5, interval or file");
        app->add_option("--mesh-file", mesh_file, "mesh in the plain-text format (mesh family 'file')");
        app->add_option("--out", out, "output directory");
        if (!study_flags) return;
        app->add_option("--scheme", scheme, "upwind1, hybrid2, hybrid2-limited or cellcentered2");
        app->add_option("--problem", problem, "smooth, boundary-layer, eps-1d or hetero");
        app->add_flag("--vanishing-diffusion", vanishing_diffusion, "add |V| h^1.5 to the diffusion");
        app->add_option("--solver", solver, "direct or iterative");
        app->add_option("--tol", tol, "relative residual target");
        app->add_option("--set", overrides, "extra key=value override (repeatable)");
    }

    StudyConfig resolve(StudyConfig base = {}) const {
        StudyConfig c = config.empty() ? base : load_config(config, base);
        auto set = [&](const char* key, const std::optional<std::string>& v) {
            if (v) set_config_value(c, key, *v);
        };
        set("scheme", scheme);
        set("problem", problem);
        set("mesh_family", mesh_family);
        set("mesh_file", mesh_file);
        set("levels", levels);
        set("out", out);
        set("solver", solver);
        if (seed) set_config_value(c, "seed", std::to_string(*seed));
        if (tol) c.solver.tol = *tol;
        if (vanishing_diffusion) c.scheme_options.vanishing_diffusion = true;
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
        }
        return c;
    }
};

int cmd_run(const StudyConfig& c, bool dump_matrix) {
    if (c.levels.size() != 1) throw ConfigError("run expects a single level");
    const LevelRun run = run_level(c, c.levels.front());
    const fs::path dir = c.out;
    write_file_atomic(dir / "solution.vtk",
                      [&](std::ostream& out) { write_vtk(out, run.mesh, run.geom, run.solution); });
    write_file_atomic(dir / "summary.txt", [&](std::ostream& out) { write_summary(out, c, run); });
    write_file_atomic(dir / "config.cfg", [&](std::ostream& out) { serialize_config(out, c); });
    if (dump_matrix) {
        const ProblemSpec p = make_problem(c);
        const SparseSystem sys = c.scheme == Scheme::CellCentered2
                                     ? assemble_cell_centered(run.mesh, run.geom, p, c.scheme_options)
                                     : assemble_hybrid(run.mesh, run.geom, p, c.scheme, c.scheme_options,
                                                       run.solution.phi);
        write_file_atomic(dir / "matrix.mtx", [&](std::ostream& out) { write_matrix_market(out, sys.matrix); });
    }
    write_summary(std::cout, c, run);
    if (!run.row.picard_converged) {
        std::cerr << "error: limiter iteration did not converge\n";
        return 1;
    }
    return 0;
}

int cmd_convergence(const StudyConfig& c) {
    if (c.levels.size() < 2) throw ConfigError("convergence expects at least two levels");
    const StudyResult r = run_study(c);
    const fs::path dir = c.out;
    write_file_atomic(dir / "convergence.csv", [&](std::ostream& out) { write_csv(out, r); });
    write_file_atomic(dir / "config.cfg", [&](std::ostream& out) { serialize_config(out, c); });
    std::printf("%-5s %-10s %-8s %-8s %-11s %-7s %-11s %-7s\n", "level", "h", "cells", "dofs", "E_c", "order",
                "E_g", "order");
    for (const auto& row : r.rows) {
        if (!row.ok()) {
            std::printf("%-5d failed: %s\n", row.level, row.error.c_str());
            continue;
        }
        auto num = [](const std::optional<double>& v, const char* f) {
            char buf[32];
            if (v) std::snprintf(buf, sizeof buf, f, *v);
            else std::snprintf(buf, sizeof buf, "-");
            return std::string(buf);
        };
        std::printf("%-5d %-10.4e %-8lld %-8lld %-11s %-7s %-11s %-7s\n", row.level, row.h,
                    static_cast<long long>(row.n_cells), static_cast<long long>(row.dofs),
                    num(row.E_c, "%.4e").c_str(), num(row.order_c, "%.2f").c_str(), num(row.E_g, "%.4e").c_str(),
                    num(row.order_g, "%.2f").c_str());
    }
    return r.all_ok() ? 0 : 1;
}

int cmd_paper_suite(const StudyConfig& c) {
    SuiteOptions o;
    o.seed = c.seed;
    o.solver = c.solver;
    o.progress = [](std::string_view label) { std::cerr << "running " << label << '\n'; };
    const PaperSuite suite = run_paper_suite(o);
    write_paper_suite(suite, c.out);
    bool ok = true;
    for (const auto& crit : suite.criteria) {
        std::printf("[%s] %d %s\n       %s\n", crit.passed ? "PASS" : "FAIL", crit.id, crit.title.c_str(),
                    crit.detail.c_str());
        ok = ok && crit.passed;
    }
    std::printf("outputs written to %s\n", c.out.c_str());
    return ok ? 0 : 1;
}

int cmd_mesh(const StudyConfig& c, const std::string& input, const std::string& output) {
    PolyMesh mesh;
    if (!input.empty()) {
        std::ifstream in(input);
        if (!in) throw ConfigError("cannot open mesh file " + input);
        mesh = read_mesh(in);
    } else {
        if (c.levels.size() != 1) throw ConfigError("mesh expects a single level");
        // Interval meshes belong to the 1D problem whatever problem the config names.
        StudyConfig pc = c;
        if (c.mesh_family == MeshFamily::Interval) pc.problem = ProblemId::Eps1d;
        mesh = family_mesh(pc, c.levels.front(), make_problem(pc));
    }
    const GeometryCache geom = compute_geometry(mesh);
    const RegularityReport reg = regularity(mesh, geom);
    std::printf("dim        %d\nvertices   %lld\ncells      %lld\nfaces      %lld\nboundary   %lld\nh          %.4e\n"
                "regul      %.4f\n",
                mesh.dim(), static_cast<long long>(mesh.n_vertices()), static_cast<long long>(mesh.n_cells()),
                static_cast<long long>(mesh.n_faces()), static_cast<long long>(mesh.n_boundary_faces()), geom.h,
                reg.regul);
    if (!output.empty()) {
        write_file_atomic(output, [&](std::ostream& out) { write_mesh(out, mesh); });
        std::printf("written    %s\n", output.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid finite-volume solver for stationary advection-diffusion"};
    app.require_subcommand(1);

    CommonFlags run_flags, conv_flags, suite_flags, mesh_flags;
    bool dump_matrix = false;
    auto* run = app.add_subcommand("run", "solve one level and write VTK and a summary");
    run_flags.add_to(run, true);
    run->add_flag("--matrix", dump_matrix, "also write the assembled matrix in Matrix Market format");

    auto* conv = app.add_subcommand("convergence", "solve a ladder of levels and write a CSV");
    conv_flags.add_to(conv, true);

    auto* suite = app.add_subcommand("paper-suite", "run every reference experiment and check the thresholds");
    suite->add_option("--out", suite_flags.out, "output directory");
    suite->add_option("--seed", suite_flags.seed, "seed of the mesh perturbation");
    suite->add_option("--solver", suite_flags.solver, "direct or iterative");
    suite->add_option("--tol", suite_flags.tol, "relative residual target");

    std::string mesh_input, mesh_output;
    auto* mesh = app.add_subcommand("mesh", "generate or inspect a mesh");
    mesh_flags.add_to(mesh, false);
    mesh->add_option("--input", mesh_input, "inspect an existing mesh file");
    mesh->add_option("--write", mesh_output, "write the mesh in the plain-text format");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*run) {
            StudyConfig base;
            base.levels = {4};
            return cmd_run(run_flags.resolve(base), dump_matrix);
        }
        if (*conv) return cmd_convergence(conv_flags.resolve());
        if (*suite) {
            StudyConfig c = suite_flags.resolve();
            if (!suite_flags.out) c.out = "paper_suite";
            return cmd_paper_suite(c);
        }
        if (*mesh) {
            StudyConfig base;
            base.levels = {1};
            const StudyConfig c = mesh_flags.resolve(base);
            return cmd_mesh(c, mesh_input, mesh_output);
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsageError;
}
