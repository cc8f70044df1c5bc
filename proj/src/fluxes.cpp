#include "hfv/fluxes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace hfv {

namespace {
std::size_t idx(Index i) { return static_cast<std::size_t>(i); }
Eigen::Index eidx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kGaussOffset = 0.28867513459481288225;  // 1 / (2√3)
}  // namespace

FaceVelocity face_velocity(const PolyMesh& mesh, const GeometryCache& geom, const VectorField& velocity,
                           FaceQuadrature rule) {
    FaceVelocity fv;
    fv.owner_value.assign(idx(mesh.n_faces()), 0.0);
    // Owner-side normals are read from the owner's local face list.
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (const CellFace& cf : geom.local(k)) {
            if (mesh.face(cf.face).owner != k) continue;
            double v;
            if (rule == FaceQuadrature::Midpoint || mesh.dim() == 1) {
                v = velocity(cf.midpoint).dot(cf.normal);
            } else {
                const Face& f = mesh.face(cf.face);
                const Point t = mesh.vertex(f.v1) - mesh.vertex(f.v0);
                v = 0.5 * (velocity(cf.midpoint - kGaussOffset * t).dot(cf.normal) +
                           velocity(cf.midpoint + kGaussOffset * t).dot(cf.normal));
            }
            fv.owner_value[idx(cf.face)] = v;
        }
    }
    return fv;
}

double face_average(const PolyMesh& mesh, const GeometryCache& geom, Index f, const ScalarField& u,
                    FaceQuadrature rule) {
    const Point& xs = geom.face_midpoint[idx(f)];
    if (rule == FaceQuadrature::Midpoint || mesh.dim() == 1) return u(xs);
    const Face& fc = mesh.face(f);
    const Point t = mesh.vertex(fc.v1) - mesh.vertex(fc.v0);
    return 0.5 * (u(xs - kGaussOffset * t) + u(xs + kGaussOffset * t));
}

void require_spd(const Tensor& lambda, int dim) {
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !lambda.allFinite()) throw FluxError("diffusion tensor is zero or non-finite");
    if (std::abs(lambda(0, 1) - lambda(1, 0)) > 1e-14 * scale) throw FluxError("diffusion tensor is not symmetric");
    if (dim == 1) {
        if (!(lambda(0, 0) > 0.0)) throw FluxError("diffusion coefficient must be positive");
        return;
    }
    if (!(lambda(0, 0) > 0.0) || !(lambda.determinant() > 0.0)) {
        throw FluxError("diffusion tensor is not positive definite");
    }
}

Eigen::MatrixXd diffusion_difference_matrix(std::span<const CellFace> local, const Point& center,
                                            double cell_measure, const Tensor& lambda, int dim) {
    const auto n = eidx(local.size());
    const LocalGradientMatrix g = consistent_gradient_matrix(local, cell_measure);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t s = 0; s < local.size(); ++s) {
        const LocalGradientMatrix b = stabilised_gradient_matrix(local, center, g, s, dim);
        a.noalias() += local[s].hull * (b.transpose() * lambda * b);
    }
    return a;
}

Eigen::MatrixXd diffusion_local_operator(std::span<const CellFace> local, const Point& center,
                                         double cell_measure, const Tensor& lambda, int dim) {
    require_spd(lambda, dim);
    const Eigen::MatrixXd a = diffusion_difference_matrix(local, center, cell_measure, lambda, dim);
    const auto n = a.rows();
    Eigen::MatrixXd block(n, n + 1);
    block.col(0) = a.rowwise().sum();
    block.rightCols(n) = -a;
    return block;
}

Eigen::MatrixXd advective_upwind_hybrid(std::span<const CellFace> local, std::span<const double> velocity) {
    const auto n = eidx(local.size());
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, n + 1);
    for (std::size_t s = 0; s < local.size(); ++s) {
        const double v = velocity[s];
        block(eidx(s), 0) = local[s].measure * FaceVelocity::plus(v);
        block(eidx(s), eidx(s) + 1) = -local[s].measure * FaceVelocity::minus(v);
    }
    return block;
}

Eigen::MatrixXd correction_matrix(std::span<const CellFace> local, const Point& center, double cell_measure,
                                  int dim, CorrectionGradient gradient) {
    const auto n = eidx(local.size());
    const LocalGradientMatrix g = consistent_gradient_matrix(local, cell_measure);
    Eigen::MatrixXd r(n, n);
    for (std::size_t s = 0; s < local.size(); ++s) {
        const Point offset = local[s].midpoint - center;
        if (gradient == CorrectionGradient::Consistent) {
            r.row(eidx(s)) = offset.transpose() * g;
        } else {
            r.row(eidx(s)) = offset.transpose() * stabilised_gradient_matrix(local, center, g, s, dim);
        }
    }
    return r;
}

Eigen::MatrixXd advective_second_order_hybrid(std::span<const CellFace> local, const Point& center,
                                              double cell_measure, int dim, std::span<const double> velocity,
                                              CorrectionGradient gradient, double phi) {
    Eigen::MatrixXd block = advective_upwind_hybrid(local, velocity);
    if (phi == 0.0) return block;
    const Eigen::MatrixXd r = correction_matrix(local, center, cell_measure, dim, gradient);
    for (std::size_t s = 0; s < local.size(); ++s) {
        const double w = local[s].measure * FaceVelocity::plus(velocity[s]) * phi;
        if (w == 0.0) continue;
        // δ_τ = c_τ - c_K, so the correction moves weight from c_K onto the faces.
        block(eidx(s), 0) -= w * r.row(eidx(s)).sum();
        block.row(eidx(s)).tail(r.cols()) += w * r.row(eidx(s));
    }
    return block;
}

double limiter_phi(std::span<const CellFace> local, const Point& center, double cell_measure, int dim,
                   double cell_value, const Eigen::VectorXd& face_values, CorrectionGradient gradient) {
    const Eigen::MatrixXd r = correction_matrix(local, center, cell_measure, dim, gradient);
    const Eigen::VectorXd delta = face_values.array() - cell_value;
    const double hi = std::max(cell_value, face_values.maxCoeff());
    const double lo = std::min(cell_value, face_values.minCoeff());
    // Strict local extremum: no correction, whatever the gradient.
    if (cell_value > face_values.maxCoeff() || cell_value < face_values.minCoeff()) return 0.0;
    double phi = 1.0;
    for (Eigen::Index s = 0; s < r.rows(); ++s) {
        const double step = r.row(s).dot(delta);
        if (step > 0.0) {
            phi = std::min(phi, (hi - cell_value) / step);
        } else if (step < 0.0) {
            phi = std::min(phi, (lo - cell_value) / step);
        }
    }
    return std::clamp(phi, 0.0, 1.0);
}

Tensor vanishing_diffusion(const Tensor& lambda, double speed, double h) {
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (std::abs(lambda(0, 1) - lambda(1, 0)) > 1e-14 * scale) {
        throw FluxError("vanishing diffusion needs a symmetric tensor");
    }
    // U'(D + sI)U = Λ + sI for orthogonal U.
    return lambda + speed * std::pow(h, 1.5) * Tensor::Identity();
}

std::vector<bool> near_boundary_cells(const PolyMesh& mesh) {
    std::vector<bool> flagged(idx(mesh.n_cells()), false);
    for (const Face& f : mesh.faces()) {
        if (f.is_boundary()) flagged[idx(f.owner)] = true;
    }
    return flagged;
}

namespace {

void append_gradient_terms(const PolyMesh& mesh, const GeometryCache& geom, const FaceVelocity& fv, Index k,
                           const Point& direction, double weight, std::vector<FluxTerm>& terms) {
    for (const CellFace& cf : geom.local(k)) {
        if (fv.value(mesh, cf.face, k) > 0.0) continue;  // c^up_σ = c_K contributes nothing
        const Index nb = mesh.other_cell(cf.face, k);
        const double c = weight * cf.measure / geom.measure(k) * cf.normal.dot(direction);
        // A missing neighbour is replaced by the boundary face value.
        terms.push_back(nb >= 0 ? FluxTerm{nb, -1, c} : FluxTerm{-1, cf.face, c});
        terms.push_back({k, -1, -c});
    }
}

void append_reconstruction(const PolyMesh& mesh, const GeometryCache& geom, const FaceVelocity& fv,
                           const std::vector<bool>& flagged, Index k, const Point& at, double weight,
                           std::vector<FluxTerm>& terms) {
    terms.push_back({k, -1, weight});
    if (flagged.empty() || !flagged[idx(k)]) append_gradient_terms(mesh, geom, fv, k, at - geom.center(k), weight, terms);
}

}  // namespace

std::vector<FluxTerm> upwind_gradient_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                            const FaceVelocity& fv, const std::vector<bool>& flagged, Index k,
                                            int component) {
    if (!flagged.empty() && flagged[idx(k)]) throw FluxError("upwind gradient requested on near-boundary cell " + std::to_string(k));
    std::vector<FluxTerm> terms;
    append_gradient_terms(mesh, geom, fv, k, component == 0 ? Point(1.0, 0.0) : Point(0.0, 1.0), 1.0, terms);
    return terms;
}

std::vector<FluxTerm> cell_centered_advective_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                                    const FaceVelocity& fv, const std::vector<bool>& flagged,
                                                    Index k, std::size_t s) {
    const CellFace& cf = geom.local(k)[s];
    const double v = fv.value(mesh, cf.face, k);
    std::vector<FluxTerm> terms;
    if (v > 0.0) {
        append_reconstruction(mesh, geom, fv, flagged, k, cf.midpoint, cf.measure * v, terms);
    } else if (v < 0.0) {
        const Index nb = mesh.other_cell(cf.face, k);
        if (nb < 0) {
            terms.push_back({-1, cf.face, cf.measure * v});
        } else {
            append_reconstruction(mesh, geom, fv, flagged, nb, cf.midpoint, cf.measure * v, terms);
        }
    }
    return terms;
}

std::vector<double> advective_cell_centered(const PolyMesh& mesh, const GeometryCache& geom,
                                            const FaceVelocity& fv, const std::vector<bool>& flagged,
                                            const Eigen::VectorXd& cell_values, const Eigen::VectorXd& face_values) {
    std::vector<double> flux(geom.cell_faces.size(), 0.0);
    std::size_t pos = 0;
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (std::size_t s = 0; s < geom.local(k).size(); ++s) {
            double sum = 0.0;
            for (const FluxTerm& t : cell_centered_advective_terms(mesh, geom, fv, flagged, k, s)) {
                sum += t.coefficient * (t.cell >= 0 ? cell_values[t.cell] : face_values[t.face]);
            }
            flux[pos++] = sum;
        }
    }
    return flux;
}

std::vector<FluxTerm> two_point_diffusive_terms(const PolyMesh& mesh, const GeometryCache& geom,
                                                std::span<const Tensor> lambda, Index k, std::size_t s) {
    const CellFace& cf = geom.local(k)[s];
    const double lk = cf.normal.dot(lambda[idx(k)] * cf.normal);
    const Index nb = mesh.other_cell(cf.face, k);
    if (nb < 0) {
        const double t = cf.measure * lk / cf.distance;
        return {{k, -1, t}, {-1, cf.face, -t}};
    }
    double dn = 0.0;
    for (const CellFace& other : geom.local(nb)) {
        if (other.face == cf.face) dn = other.distance;
    }
    const double ln = cf.normal.dot(lambda[idx(nb)] * cf.normal);
    const double t = cf.measure / (cf.distance / lk + dn / ln);
    return {{k, -1, t}, {nb, -1, -t}};
}

}  // namespace hfv
