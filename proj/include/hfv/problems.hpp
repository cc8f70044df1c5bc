#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hfv/fluxes.hpp"
#include "hfv/hybrid_space.hpp"
#include "hfv/mesh.hpp"

namespace hfv {

struct ExactSolution {
    ScalarField value;
    VectorField gradient;
};

/// Data of a stationary advection-diffusion problem
///   div(-Λ∇c + cV) = f in Ω,  c = g on ∂Ω.
struct ProblemSpec {
    std::string name;
    int dim = 2;
    Rectangle domain{};
    TensorField diffusion;
    VectorField velocity;
    ScalarField source;
    ScalarField boundary;
    std::optional<ExactSolution> exact;
    /// Cells whose centroid satisfies the mask enter the error norms (empty: all cells).
    std::function<bool(const Point&)> subdomain;
    /// Physical bounds of the solution, used for overshoot diagnostics.
    std::optional<std::pair<double, double>> bounds;
    /// Lines x = const / y = const where Λ is discontinuous.
    std::vector<double> x_interfaces;
    std::vector<double> y_interfaces;
};

/// c' - εc'' = 0 on (0,1), c(0) = 1, c(1) = 0.
ProblemSpec problem_eps_1d(double eps);

/// c = sin(πx) sin(πy), V = (1,2), Λ = [[1.5e-4, 1e-6], [1e-6, 1e-8]].
ProblemSpec problem_smooth_2d();

/// c = (x - e^{2(x-1)/ν})(y² - e^{3(y-1)/ν}), V = (2,3), Λ = νI, errors on [0,0.8]².
ProblemSpec problem_boundary_layer_2d(double nu = 1e-4);

/// Rotating flow with a piecewise-constant anisotropic tensor (jumps at x, y = 2/3),
/// Gaussian ring source, homogeneous Dirichlet data. No exact solution.
ProblemSpec problem_hetero_rotation();

/// Number of cells straddling a coefficient interface of the problem.
Index misaligned_cells(const PolyMesh& mesh, const ProblemSpec& problem);

/// How the exact solution enters E_c and E_g.
enum class ErrorNorm {
    /// c_K compared with the cell average of c, the discrete gradient with the
    /// cell average of ∇c (Green's formula with 3-point Gauss on each face).
    CellAverage,
    /// Exact values and gradients sampled at cell centroids.
    CellCenter,
    /// Exact functions integrated over each hull D_{K,σ} with a degree-2 rule.
    Quadrature,
};

struct ErrorReport {
    double h = 0.0;
    Index n_cells = 0;
    Index n_faces = 0;
    double E_c = 0.0;
    double E_g = 0.0;
    double overshoot = 0.0;   ///< fraction of (upper - lower)
    double undershoot = 0.0;  ///< fraction of (upper - lower)
    double max_value = 0.0;
    double min_value = 0.0;
};

/// Relative errors E_c = ‖Π c_h - c‖/‖c‖ and E_g = ‖∇_h c_h - ∇c‖/‖c‖_{H¹},
/// restricted to the problem's subdomain, with ‖c‖_{H¹} = ‖c‖ + ‖∇c‖.
/// `gradient` is the scheme's discrete gradient per hull D_{K,σ}, laid out like
/// geom.cell_faces.
ErrorReport error_metrics(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& solution,
                          std::span<const Point> gradient, const ProblemSpec& problem,
                          ErrorNorm norm = ErrorNorm::CellAverage);

struct Overshoot {
    double over = 0.0;
    double under = 0.0;
    double over_fraction = 0.0;
    double under_fraction = 0.0;
};

/// max(0, max_K c_K - upper) and max(0, lower - min_K c_K).
Overshoot overshoot(const Eigen::VectorXd& cell_values, double lower, double upper);

/// Pairwise rates log(E_i/E_{i+1}) / log(h_i/h_{i+1}); nullopt where undefined.
std::vector<std::optional<double>> observed_order(std::span<const double> errors, std::span<const double> hs);

/// Cell average of f using the degree-2 rule on each hull (2-point Gauss in 1D).
double cell_average(const PolyMesh& mesh, const GeometryCache& geom, Index k, const ScalarField& f);

/// Cell average of ∇c from Green's formula, (1/|K|) Σ_σ ∫_σ c n_{K,σ}, with
/// 3-point Gauss on each face (exact end values in 1D).
Point cell_average_gradient(const PolyMesh& mesh, const GeometryCache& geom, Index k, const ScalarField& c);

}  // namespace hfv
