#include "hfv/hybrid_space.hpp"

#include <cmath>
#include <string>

namespace hfv {

namespace {
std::size_t idx(Index i) { return static_cast<std::size_t>(i); }

double checked_eval(const ScalarField& u, const Point& x, const char* what, Index i) {
    double v = 0.0;
    try {
        v = u(x);
    } catch (const std::exception& e) {
        throw FieldError(std::string("evaluation failed at ") + what + " " + std::to_string(i) + ": " + e.what());
    }
    if (!std::isfinite(v)) {
        throw FieldError(std::string("non-finite value at ") + what + " " + std::to_string(i));
    }
    return v;
}
}  // namespace

HybridField interpolate(const PolyMesh& mesh, const GeometryCache& geom, const ScalarField& u) {
    HybridField q = HybridField::zeros(mesh);
    for (Index k = 0; k < mesh.n_cells(); ++k) q.cells[k] = checked_eval(u, geom.center(k), "cell", k);
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        q.faces[f] = checked_eval(u, geom.face_midpoint[idx(f)], "face", f);
    }
    return q;
}

LocalGradientMatrix consistent_gradient_matrix(std::span<const CellFace> local, double cell_measure) {
    LocalGradientMatrix g(2, static_cast<Eigen::Index>(local.size()));
    for (std::size_t s = 0; s < local.size(); ++s) {
        g.col(static_cast<Eigen::Index>(s)) = (local[s].measure / cell_measure) * local[s].normal;
    }
    return g;
}

LocalGradientMatrix stabilised_gradient_matrix(std::span<const CellFace> local, const Point& center,
                                               const LocalGradientMatrix& consistent, std::size_t sigma,
                                               int dim) {
    const CellFace& cf = local[sigma];
    // S_{K,σ} = (√d / d_{K,σ}) [δ_σ - (G δ)·(x_σ - x_K)] n_{K,σ}
    Eigen::RowVectorXd bracket = -(cf.midpoint - center).transpose() * consistent;
    bracket(static_cast<Eigen::Index>(sigma)) += 1.0;
    const double scale = std::sqrt(static_cast<double>(dim)) / cf.distance;
    return consistent + scale * cf.normal * bracket;
}

Eigen::VectorXd local_differences(const PolyMesh& mesh, const HybridField& q, Index k) {
    const auto faces = mesh.cell_faces(k);
    Eigen::VectorXd d(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t s = 0; s < faces.size(); ++s) {
        d(static_cast<Eigen::Index>(s)) = q.faces[faces[s]] - q.cells[k];
    }
    return d;
}

std::vector<Point> consistent_gradient(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q) {
    std::vector<Point> grad(idx(mesh.n_cells()), Point::Zero());
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        Point g = Point::Zero();
        for (const CellFace& cf : geom.local(k)) {
            g += cf.measure * (q.faces[cf.face] - q.cells[k]) * cf.normal;
        }
        grad[idx(k)] = g / geom.measure(k);
    }
    return grad;
}

std::vector<Point> stabilisation(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q,
                                 std::span<const Point> consistent) {
    std::vector<Point> s(geom.cell_faces.size(), Point::Zero());
    const double root_d = std::sqrt(static_cast<double>(geom.dim));
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        const Point& xk = geom.center(k);
        const Point& gk = consistent[idx(k)];
        std::size_t pos = idx(geom.offsets[idx(k)]);
        for (const CellFace& cf : geom.local(k)) {
            const double jump = q.faces[cf.face] - q.cells[k] - gk.dot(cf.midpoint - xk);
            s[pos++] = (root_d / cf.distance) * jump * cf.normal;
        }
    }
    return s;
}

std::vector<Point> stabilised_gradient(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q) {
    const auto grad = consistent_gradient(mesh, geom, q);
    auto s = stabilisation(mesh, geom, q, grad);
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (Index p = geom.offsets[idx(k)]; p < geom.offsets[idx(k) + 1]; ++p) s[idx(p)] += grad[idx(k)];
    }
    return s;
}

double norm_l2(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q) {
    double sum = 0.0;
    for (Index k = 0; k < mesh.n_cells(); ++k) sum += geom.measure(k) * q.cells[k] * q.cells[k];
    return std::sqrt(sum);
}

double norm_h1_like(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& q) {
    double sum = 0.0;
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (const CellFace& cf : geom.local(k)) {
            const double jump = q.cells[k] - q.faces[cf.face];
            sum += cf.measure / cf.distance * jump * jump;
        }
    }
    return std::sqrt(sum);
}

double hull_l2(const GeometryCache& geom, std::span<const Point> per_hull) {
    double sum = 0.0;
    for (std::size_t p = 0; p < per_hull.size(); ++p) sum += geom.cell_faces[p].hull * per_hull[p].squaredNorm();
    return std::sqrt(sum);
}

double cell_l2(const GeometryCache& geom, std::span<const Point> per_cell) {
    double sum = 0.0;
    for (std::size_t k = 0; k < per_cell.size(); ++k) sum += geom.cell_measure[k] * per_cell[k].squaredNorm();
    return std::sqrt(sum);
}

}  // namespace hfv
