#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "hfv/fluxes.hpp"
#include "hfv/hybrid_space.hpp"
#include "hfv/mesh.hpp"
#include "hfv/problems.hpp"

namespace hfv {

class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Scheme {
    Upwind1,         ///< hybrid first-order upwind
    Hybrid2,         ///< hybrid second-order upwind
    Hybrid2Limited,  ///< hybrid second-order with a limited correction
    CellCentered2,   ///< cell-centered second-order upwind with two-point diffusion
};

std::string to_string(Scheme scheme);
/// Accepts upwind1, hybrid2, hybrid2-limited, cellcentered2.
std::optional<Scheme> parse_scheme(std::string_view name);

/// Boundary handling of the cell-centered scheme.
enum class CellCenteredBoundary {
    /// Inflow boundary faces supply the Dirichlet value as c^up in the upwind gradient.
    BoundaryValue,
    /// Cells owning a boundary face fall back to first-order upwind values.
    FirstOrder,
};

/// Gradient compared with ∇c in E_g for the hybrid schemes.
enum class ErrorGradient {
    Consistent,  ///< ∇̄_K c_h, constant per cell
    Stabilised,  ///< ∇̄_K c_h + S_{K,σ}(c_h) per hull
};

struct SchemeOptions {
    CorrectionGradient gradient = CorrectionGradient::Consistent;
    CellCenteredBoundary cc_boundary = CellCenteredBoundary::BoundaryValue;
    ErrorGradient error_gradient = ErrorGradient::Consistent;
    bool vanishing_diffusion = false;
    FaceQuadrature face_rule = FaceQuadrature::Midpoint;
    /// Debug switch for the limited scheme: φ ≡ 0.
    bool force_phi_zero = false;
    double picard_tol = 1e-10;
    int picard_max = 100;
    /// Picard damping ω in (0, 1].
    double relaxation = 1.0;

    bool operator==(const SchemeOptions&) const = default;
};

enum class RowRole { Balance, Conservation, Boundary };

/// Global system. Unknowns are ordered cells first, then face unknowns; row i
/// for i < n_cells is the balance row of cell i, the remaining rows belong to
/// the face unknowns in the same order.
struct SparseSystem {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
    Eigen::VectorXd rhs;
    Index n_cells = 0;
    std::vector<RowRole> roles;
    /// Mesh face carried by unknown n_cells + j.
    std::vector<Index> face_of_unknown;
    /// Every balance row involves its own cell unknown only, so cells can be eliminated.
    bool condensable = false;

    Index size() const { return static_cast<Index>(rhs.size()); }
};

struct BackSubstitution {
    double pivot = 0.0;
    double rhs = 0.0;
    std::vector<std::pair<Index, double>> terms;  ///< (condensed unknown, coefficient)
};

/// Face-only system left after eliminating every cell unknown through its
/// balance row: c_K = (rhs - Σ coefficient·c_σ) / pivot.
struct CondensedSystem {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
    Eigen::VectorXd rhs;
    std::vector<BackSubstitution> cells;

    Index size() const { return static_cast<Index>(rhs.size()); }
    /// Full unknown vector (cells then faces) from the face values.
    Eigen::VectorXd expand(const Eigen::VectorXd& faces) const;
};

struct SolverOptions {
    enum class Kind { Direct, Iterative };
    Kind kind = Kind::Direct;
    /// Relative residual target; 0 selects 1e-12 (direct) or 1e-10 (iterative).
    double tol = 0.0;
    int max_iter = 5000;
    /// Solve the condensed face system when the scheme allows it.
    bool condense = true;

    double tolerance() const { return tol > 0.0 ? tol : (kind == Kind::Direct ? 1e-12 : 1e-10); }
    bool operator==(const SolverOptions&) const = default;
};

struct SolveReport {
    double residual = 0.0;  ///< ‖Ax - b‖ / ‖b‖ on the full system
    int iterations = 0;     ///< linear iterations (iterative path)
    double seconds = 0.0;
    Index dofs = 0;
    Index condensed_dofs = 0;
    int picard_iterations = 0;
    double picard_change = 0.0;  ///< max |Δc| between the last two Picard iterates
    bool converged = true;
};

/// Assembles the hybrid system. For Hybrid2Limited, `phi` holds the frozen
/// limiter value per cell (empty means φ ≡ 1); it is ignored by other schemes.
SparseSystem assemble_hybrid(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                             Scheme scheme, const SchemeOptions& options = {},
                             const std::vector<double>& phi = {});

/// Throws AssemblyError on a zero pivot (naming the cell) or when a balance
/// row couples two cell unknowns.
CondensedSystem condense(const SparseSystem& system);

/// Solves the system, through the condensed face system when possible.
/// Throws SolveError when the residual target is missed.
Eigen::VectorXd solve(const SparseSystem& system, const SolverOptions& options, SolveReport& report);

/// Solves a square sparse system without condensation.
Eigen::VectorXd solve_linear(const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix, const Eigen::VectorXd& rhs,
                             const SolverOptions& options, int& iterations);

/// Cell values plus boundary-face values; Dirichlet rows on boundary faces.
SparseSystem assemble_cell_centered(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                                    const SchemeOptions& options = {});

/// Maximum |row residual| of (A x - b) per row role.
struct RowResiduals {
    double balance = 0.0;
    double conservation = 0.0;
    double boundary = 0.0;
};
RowResiduals row_residuals(const SparseSystem& system, const Eigen::VectorXd& x);

/// Limiter values of the hybrid solution, one per cell.
std::vector<double> limiter_values(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& field,
                                   CorrectionGradient gradient);

struct SolveResult {
    HybridField field;
    SolveReport report;
    /// Discrete gradient per hull, laid out like geom.cell_faces.
    std::vector<Point> gradient;
    /// Final limiter values (limited scheme only).
    std::vector<double> phi;
    Index dofs = 0;
};

/// Picard iteration on the limited scheme, starting from φ ≡ 1. After ten sweeps φ
/// is rounded down to multiples of 1/8 and may only decrease in each cell.
SolveResult solve_limited(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                          const SchemeOptions& options = {}, const SolverOptions& solver = {});

/// Assembles and solves any scheme and computes the discrete gradient used in E_g.
SolveResult solve_problem(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem, Scheme scheme,
                          const SchemeOptions& options = {}, const SolverOptions& solver = {});

/// Upwind-valued gradient of a cell-centered solution, replicated on each hull.
/// Boundary faces take the stored face value when they are upwind.
std::vector<Point> cell_centered_gradient(const PolyMesh& mesh, const GeometryCache& geom, const FaceVelocity& fv,
                                          const HybridField& field);

/// Matrix Market coordinate dump.
void write_matrix_market(std::ostream& out, const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix);

}  // namespace hfv
