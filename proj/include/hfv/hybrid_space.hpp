#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "hfv/mesh.hpp"

namespace hfv {

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;
using LocalGradientMatrix = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Element of the hybrid space: one value per cell and one per face.
struct HybridField {
    Eigen::VectorXd cells;
    Eigen::VectorXd faces;

    static HybridField zeros(const PolyMesh& mesh) {
        return {Eigen::VectorXd::Zero(mesh.n_cells()), Eigen::VectorXd::Zero(mesh.n_faces())};
    }
    bool matches(const PolyMesh& mesh) const {
        return cells.size() == mesh.n_cells() && faces.size() == mesh.n_faces();
    }
};

class FieldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Point values: w_K = u(x_K), w_σ = u(x_σ).
HybridField interpolate(const PolyMesh& mesh, const GeometryCache& geom, const ScalarField& u);

// ---------------------------------------------------------------------------
// Local operators. All act on the local difference vector δ_σ = q_σ - q_K,
// ordered like geom.local(K).

/// Matrix G with ∇̄_K q = G δ.
LocalGradientMatrix consistent_gradient_matrix(std::span<const CellFace> local, double cell_measure);

/// Matrix B_σ with (∇̄_K q + S_{K,σ}(q)) = B_σ δ, the stabilised gradient on D_{K,σ}.
LocalGradientMatrix stabilised_gradient_matrix(std::span<const CellFace> local, const Point& center,
                                               const LocalGradientMatrix& consistent, std::size_t sigma,
                                               int dim);

/// Local differences q_σ - q_K for cell k.
Eigen::VectorXd local_differences(const PolyMesh& mesh, const HybridField& q, Index k);

// ---------------------------------------------------------------------------
// Global evaluations.

/// ∇̄_K q = (1/|K|) Σ_σ |σ| (q_σ - q_K) n_{K,σ} for every cell.
std::vector<Point> consistent_gradient(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q);

/// S_{K,σ} per (cell, local face), laid out like geom.cell_faces.
std::vector<Point> stabilisation(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q,
                                 std::span<const Point> consistent);

/// ∇_D q restricted to each hull D_{K,σ}, laid out like geom.cell_faces.
std::vector<Point> stabilised_gradient(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q);

/// Π_D q: the piecewise-constant cell function, as cell values.
inline const Eigen::VectorXd& reconstruct(const HybridField& q) { return q.cells; }

/// (Σ_K |K| q_K²)^{1/2}
double norm_l2(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q);

/// (Σ_K Σ_σ |σ|/d_{K,σ} (q_K - q_σ)²)^{1/2}
double norm_h1_like(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q);

/// L² norm of a field piecewise constant on the hulls: (Σ |D_{K,σ}| |g_{K,σ}|²)^{1/2}.
double hull_l2(const GeometryCache& geom, std::span<const Point> per_hull);

/// L² norm of a cellwise constant vector field.
double cell_l2(const GeometryCache& geom, std::span<const Point> per_cell);

}  // namespace hfv
