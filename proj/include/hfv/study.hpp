#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hfv/assembly.hpp"
#include "hfv/mesh.hpp"
#include "hfv/problems.hpp"

namespace hfv {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class MeshFamily {
    M1,        ///< Cartesian, n = 4·2^{r-1} per direction
    M2,        ///< triangulated Cartesian, same n
    M3,        ///< M1 with interior vertices moved
    M4,        ///< M2 with interior vertices moved
    M5,        ///< Kershaw, n = 12·r per direction
    Interval,  ///< 1D, 100·2^{r-1} cells
    File,      ///< read from mesh_file; single level
};

std::string to_string(MeshFamily family);
std::optional<MeshFamily> parse_mesh_family(std::string_view name);

enum class ProblemId { Eps1d, Smooth, BoundaryLayer, Hetero };

std::string to_string(ProblemId id);
std::optional<ProblemId> parse_problem(std::string_view name);

/// One study. Every field has a default; `serialize_config` writes all of them.
struct StudyConfig {
    ProblemId problem = ProblemId::Smooth;
    double eps = 0x1p-10;  ///< diffusion of the 1D test
    double nu = 1e-4;      ///< diffusion of the boundary-layer test
    Scheme scheme = Scheme::Hybrid2;
    MeshFamily mesh_family = MeshFamily::M1;
    std::string mesh_file;
    std::vector<int> levels{1, 2, 3, 4, 5, 6};
    std::uint64_t seed = 42;
    double perturb_factor = 0.4;
    double kershaw_distortion = kKershawDistortion;
    SchemeOptions scheme_options;
    ErrorNorm error_norm = ErrorNorm::CellAverage;
    SolverOptions solver;
    std::string out = "out";

    bool operator==(const StudyConfig&) const = default;
};

/// Sets one key from its text form. Throws ConfigError on an unknown key or bad value.
void set_config_value(StudyConfig& config, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment.
StudyConfig parse_config(std::istream& in, StudyConfig base = {});
StudyConfig load_config(const std::filesystem::path& path, StudyConfig base = {});
void serialize_config(std::ostream& out, const StudyConfig& config);

/// "1-6", "3,4,5" or "2".
std::vector<int> parse_levels(std::string_view text);
std::string format_levels(std::span<const int> levels);

ProblemSpec make_problem(const StudyConfig& config);

/// Mesh of the family at refinement level r ≥ 1. Coefficient interfaces of the
/// problem are matched by snapping grid lines before any perturbation.
PolyMesh family_mesh(const StudyConfig& config, int level, const ProblemSpec& problem);

/// Degrees of freedom: N_K + N_e for the hybrid schemes, N_K + boundary faces otherwise.
Index scheme_dofs(const PolyMesh& mesh, Scheme scheme);

struct LevelResult {
    int level = 0;
    double h = 0.0;
    Index n_cells = 0;
    Index n_faces = 0;
    Index dofs = 0;
    std::optional<double> E_c;
    std::optional<double> E_g;
    std::optional<double> order_c;
    std::optional<double> order_g;
    std::optional<double> overshoot;  ///< fraction of the physical range, when bounds exist
    double residual = 0.0;
    double seconds = 0.0;
    double max_value = 0.0;
    double min_value = 0.0;
    Index misaligned = 0;
    int picard_iterations = 0;
    bool picard_converged = true;
    std::string error;  ///< non-empty when the level failed

    bool ok() const { return error.empty(); }
};

struct StudyResult {
    std::vector<LevelResult> rows;

    bool all_ok() const;
    std::vector<double> E_c() const;
    std::vector<double> h() const;
};

/// Everything produced by one level, for file output.
struct LevelRun {
    PolyMesh mesh;
    GeometryCache geom;
    SolveResult solution;
    LevelResult row;
};

/// Solves one level. Module errors propagate.
LevelRun run_level(const StudyConfig& config, int level);

/// Runs every level, recording failures per level, then fills the rates.
StudyResult run_study(const StudyConfig& config);

/// Rates between consecutive successful levels.
void fill_orders(StudyResult& result);

inline constexpr std::string_view kCsvHeader =
    "level,h,n_cells,n_faces,dofs,E_c,E_g,order_c,order_g,overshoot,residual,seconds";

void write_csv(std::ostream& out, const StudyResult& result, bool with_timing = true);

/// Human-readable summary of one solve.
void write_summary(std::ostream& out, const StudyConfig& config, const LevelRun& run);

/// Legacy ASCII VTK unstructured grid with cell data "c" and "grad_c". In 1D the
/// cells are written as line segments.
void write_vtk(std::ostream& out, const PolyMesh& mesh, const GeometryCache& geom, const SolveResult& solution);

/// Per-cell gradient: hull-measure weighted mean of the per-hull gradient.
std::vector<Point> cell_gradient(const GeometryCache& geom, std::span<const Point> per_hull);

/// Writes `path` through a temporary file in the same directory and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body);

// ---------------------------------------------------------------------------
// Reference experiment suite.

struct CriterionResult {
    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
};

struct SuiteStudy {
    std::string name;
    StudyConfig config;
    StudyResult result;
};

struct EpsRun {
    double eps = 0.0;
    std::string scheme;  ///< scheme name, "+vd" when vanishing diffusion is on
    double max_value = 0.0;
    double min_value = 0.0;
    double overshoot = 0.0;
    double E_c = 0.0;
    int picard_iterations = 0;
    std::vector<double> x;
    std::vector<double> c;
    std::vector<double> exact;
};

struct HeteroRun {
    std::string mesh;
    bool vanishing_diffusion = false;
    Index n_cells = 0;
    Index misaligned = 0;
    double max_value = 0.0;
    double min_value = 0.0;
};

struct PaperSuite {
    std::vector<SuiteStudy> studies;
    std::vector<EpsRun> eps_runs;
    std::vector<HeteroRun> hetero_runs;
    std::vector<CriterionResult> criteria;

    /// Throws std::out_of_range for an unknown name.
    const StudyResult& study(std::string_view name) const;
};

/// Refinement level of the heterogeneous runs (32 x 32 before snapping).
inline constexpr int kHeteroLevel = 4;

struct SuiteOptions {
    std::uint64_t seed = 42;
    SolverOptions solver;
    /// Called with a short label before each study.
    std::function<void(std::string_view)> progress;
};

/// Runs the 1D, smooth, boundary-layer and heterogeneous experiments and
/// evaluates the acceptance thresholds that depend on them.
PaperSuite run_paper_suite(const SuiteOptions& options = {});

/// Criteria 1-8 from the suite data.
std::vector<CriterionResult> evaluate_criteria(const PaperSuite& suite);

/// One CSV per experiment, the Table-1 analog and `report.csv`.
void write_paper_suite(const PaperSuite& suite, const std::filesystem::path& dir);

/// Rows `r,h,N_K,N_e,dofs_hybrid,dofs_cell_centered` on M1, h truncated to four digits.
void write_dof_table(std::ostream& out, std::span<const int> levels);

}  // namespace hfv
