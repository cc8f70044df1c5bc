#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "hfv/hybrid_space.hpp"
#include "hfv/mesh.hpp"

namespace hfv {

using Tensor = Eigen::Matrix2d;
using TensorField = std::function<Tensor(const Point&)>;

class FluxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FaceQuadrature { Midpoint, Gauss2 };

/// Which gradient feeds the second-order correction of the hybrid advective flux.
enum class CorrectionGradient {
    Stabilised,  ///< ∇̄_K c + S_{K,σ}(c) on each hull D_{K,σ}
    Consistent,  ///< ∇̄_K c only
};

/// Normal velocity averages, stored once per face with respect to the face owner.
struct FaceVelocity {
    std::vector<double> owner_value;

    /// V_{K,σ} for cell k adjacent to face f.
    double value(const PolyMesh& mesh, Index f, Index k) const {
        const double v = owner_value[static_cast<std::size_t>(f)];
        return mesh.face(f).owner == k ? v : -v;
    }
    static double plus(double v) { return v > 0.0 ? v : 0.0; }
    static double minus(double v) { return v < 0.0 ? -v : 0.0; }
};

/// V_{K,σ} = (1/|σ|) ∫_σ V·n_{K,σ}, computed with the given face rule.
FaceVelocity face_velocity(const PolyMesh& mesh, const GeometryCache& geom, const VectorField& velocity,
                           FaceQuadrature rule = FaceQuadrature::Midpoint);

/// (1/|σ|) ∫_σ u ds with the given face rule (point value in 1D).
double face_average(const PolyMesh& mesh, const GeometryCache& geom, Index f, const ScalarField& u,
                    FaceQuadrature rule = FaceQuadrature::Midpoint);

/// Symmetric positive definite check with a relative symmetry tolerance of 1e-14.
void require_spd(const Tensor& lambda, int dim);

/// Symmetric positive semidefinite matrix A on local differences with
/// Σ_σ (A δ(c))_σ δ_σ(v) = Σ_σ |D_{K,σ}| Λ_K ∇_D c · ∇_D v on cell K.
Eigen::MatrixXd diffusion_difference_matrix(std::span<const CellFace> local, const Point& center,
                                            double cell_measure, const Tensor& lambda, int dim);

// Local flux blocks map the local unknowns (c_K, c_σ1, ..., c_σn) to the face
// fluxes (|σ| F_{K,σ})_σ. Column 0 is the cell unknown.

/// HMM diffusive block: |σ| F^D_{K,σ} = Σ_τ A_{στ} (c_K - c_τ).
Eigen::MatrixXd diffusion_local_operator(std::span<const CellFace> local, const Point& center,
                                         double cell_measure, const Tensor& lambda, int dim);

/// F^A = c_K V⁺ - c_σ V⁻.
Eigen::MatrixXd advective_upwind_hybrid(std::span<const CellFace> local, std::span<const double> velocity);

/// Rows r_σ with ∇̃c·(x_σ - x_K) = r_σ · δ for the chosen correction gradient.
Eigen::MatrixXd correction_matrix(std::span<const CellFace> local, const Point& center, double cell_measure,
                                  int dim, CorrectionGradient gradient);

/// F^A = (c_K + φ ∇̃c·(x_σ - x_K)) V⁺ - c_σ V⁻. With φ = 0 the block is
/// bit-identical to the first-order hybrid block.
Eigen::MatrixXd advective_second_order_hybrid(std::span<const CellFace> local, const Point& center,
                                              double cell_measure, int dim, std::span<const double> velocity,
                                              CorrectionGradient gradient = CorrectionGradient::Stabilised,
                                              double phi = 1.0);

/// Barth–Jespersen limiter over {c_K} ∪ {c_σ}: largest φ in [0, 1] such that each
/// face reconstruction c_K + φ ∇̃c·(x_σ - x_K) stays within the local bounds; zero when
/// c_K is a strict local extremum.
double limiter_phi(std::span<const CellFace> local, const Point& center, double cell_measure, int dim,
                   double cell_value, const Eigen::VectorXd& face_values,
                   CorrectionGradient gradient = CorrectionGradient::Stabilised);

/// Λ̃_K = U'(D + |V_K| h^{1.5})U: eigenvalues shifted, eigenvectors kept.
Tensor vanishing_diffusion(const Tensor& lambda, double speed, double h);

// ---------------------------------------------------------------------------
// Cell-centered second-order upwind fluxes.

/// A linear term of a cell-centered flux: a cell unknown, or a boundary face value.
struct FluxTerm {
    Index cell = -1;
    Index face = -1;
    double coefficient = 0.0;
};

/// Cells where the second-order reconstruction is unavailable (a boundary face).
std::vector<bool> near_boundary_cells(const PolyMesh& mesh);

/// Upwind-valued gradient ∇̃c_K = (1/|K|) Σ_σ |σ| (c^up_σ - c_K) n_{K,σ}, with
/// c^up_σ = c_K when V_{K,σ} > 0 and the neighbour value otherwise (the boundary
/// face value on inflow boundary faces), as terms in the unknowns. Requires an
/// unflagged cell.
std::vector<FluxTerm> upwind_gradient_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                            const FaceVelocity& fv, const std::vector<bool>& flagged, Index k,
                                            int component);

/// Terms of |σ| F^A_{K,σ} for local face `s` of cell k: the upwind cell's
/// linear reconstruction on unflagged cells, its cell value on flagged cells,
/// and the boundary value on inflow boundary faces. An empty `flagged` means no
/// cell is flagged.
std::vector<FluxTerm> cell_centered_advective_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                                    const FaceVelocity& fv, const std::vector<bool>& flagged,
                                                    Index k, std::size_t s);

/// Evaluates the cell-centered advective fluxes |σ| F^A_{K,σ} per (cell, local face).
std::vector<double> advective_cell_centered(const PolyMesh& mesh, const GeometryCache& geom,
                                            const FaceVelocity& fv, const std::vector<bool>& flagged,
                                            const Eigen::VectorXd& cell_values, const Eigen::VectorXd& face_values);

/// Two-point diffusive terms of |σ| F^D_{K,σ} with λ = n·Λn harmonically
/// averaged across the face.
std::vector<FluxTerm> two_point_diffusive_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                                std::span<const Tensor> lambda, Index k, std::size_t s);

}  // namespace hfv
