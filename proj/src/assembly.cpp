#include "hfv/assembly.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

namespace hfv {

namespace {

std::size_t idx(Index i) { return static_cast<std::size_t>(i); }
Eigen::Index eidx(std::size_t i) { return static_cast<Eigen::Index>(i); }

using Triplet = Eigen::Triplet<double, Index>;
using RowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor cell_tensor(const ProblemSpec& problem, const GeometryCache& geom, Index k, const SchemeOptions& options) {
    const Point& xk = geom.center(k);
    Tensor lambda = problem.diffusion(xk);
    require_spd(lambda, geom.dim);
    if (options.vanishing_diffusion) lambda = vanishing_diffusion(lambda, problem.velocity(xk).norm(), geom.h);
    return lambda;
}

double relative_residual(const RowMatrix& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
    const double nb = b.norm();
    const double nr = (a * x - b).norm();
    return nb > 0.0 ? nr / nb : nr;
}

}  // namespace

std::string to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::Upwind1: return "upwind1";
        case Scheme::Hybrid2: return "hybrid2";
        case Scheme::Hybrid2Limited: return "hybrid2-limited";
        case Scheme::CellCentered2: return "cellcentered2";
    }
    return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
    for (Scheme s : {Scheme::Upwind1, Scheme::Hybrid2, Scheme::Hybrid2Limited, Scheme::CellCentered2}) {
        if (name == to_string(s)) return s;
    }
    return std::nullopt;
}

SparseSystem assemble_hybrid(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                             Scheme scheme, const SchemeOptions& options, const std::vector<double>& phi) {
    if (scheme == Scheme::CellCentered2) throw AssemblyError("cellcentered2 is not a hybrid scheme");
    if (problem.dim != mesh.dim()) throw AssemblyError("problem and mesh dimensions differ");
    if (scheme == Scheme::Hybrid2Limited && !phi.empty() && phi.size() != idx(mesh.n_cells())) {
        throw AssemblyError("limiter values must be given per cell");
    }
    const Index nk = mesh.n_cells();
    const Index ne = mesh.n_faces();
    const Index n = nk + ne;

    SparseSystem sys;
    sys.n_cells = nk;
    sys.condensable = true;
    sys.rhs = Eigen::VectorXd::Zero(n);
    sys.roles.assign(idx(n), RowRole::Balance);
    sys.face_of_unknown.resize(idx(ne));
    for (Index f = 0; f < ne; ++f) {
        sys.face_of_unknown[idx(f)] = f;
        sys.roles[idx(nk + f)] = mesh.face(f).is_boundary() ? RowRole::Boundary : RowRole::Conservation;
    }

    const FaceVelocity fv = face_velocity(mesh, geom, problem.velocity, options.face_rule);
    std::vector<Triplet> triplets;
    triplets.reserve(idx(nk) * 40);

    for (Index k = 0; k < nk; ++k) {
        const auto local = geom.local(k);
        const auto faces = mesh.cell_faces(k);
        std::vector<double> v(local.size());
        for (std::size_t s = 0; s < local.size(); ++s) v[s] = fv.value(mesh, local[s].face, k);

        const Tensor lambda = cell_tensor(problem, geom, k, options);
        Eigen::MatrixXd block = diffusion_local_operator(local, geom.center(k), geom.measure(k), lambda, mesh.dim());
        switch (scheme) {
            case Scheme::Upwind1: block += advective_upwind_hybrid(local, v); break;
            case Scheme::Hybrid2:
                block += advective_second_order_hybrid(local, geom.center(k), geom.measure(k), mesh.dim(), v,
                                                       options.gradient, 1.0);
                break;
            case Scheme::Hybrid2Limited: {
                double p = phi.empty() ? 1.0 : phi[idx(k)];
                if (options.force_phi_zero) p = 0.0;
                block += advective_second_order_hybrid(local, geom.center(k), geom.measure(k), mesh.dim(), v,
                                                       options.gradient, p);
                break;
            }
            case Scheme::CellCentered2: break;
        }

        // Balance row: Σ_σ |σ| F_{K,σ} = |K| f_K.
        const Eigen::RowVectorXd total = block.colwise().sum();
        triplets.emplace_back(k, k, total(0));
        for (std::size_t s = 0; s < faces.size(); ++s) triplets.emplace_back(k, nk + faces[s], total(eidx(s) + 1));
        sys.rhs[k] = geom.measure(k) * cell_average(mesh, geom, k, problem.source);

        // Conservation rows: |σ| F_{K,σ} + |σ| F_{L,σ} = 0.
        for (std::size_t s = 0; s < faces.size(); ++s) {
            if (mesh.face(faces[s]).is_boundary()) continue;
            const Index row = nk + faces[s];
            triplets.emplace_back(row, k, block(eidx(s), 0));
            for (std::size_t t = 0; t < faces.size(); ++t) {
                triplets.emplace_back(row, nk + faces[t], block(eidx(s), eidx(t) + 1));
            }
        }
    }
    for (Index f = 0; f < ne; ++f) {
        if (!mesh.face(f).is_boundary()) continue;
        triplets.emplace_back(nk + f, nk + f, 1.0);
        sys.rhs[nk + f] = face_average(mesh, geom, f, problem.boundary, options.face_rule);
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    return sys;
}

Eigen::VectorXd CondensedSystem::expand(const Eigen::VectorXd& faces) const {
    const auto nk = eidx(cells.size());
    Eigen::VectorXd x(nk + faces.size());
    x.tail(faces.size()) = faces;
    for (Eigen::Index k = 0; k < nk; ++k) {
        const BackSubstitution& b = cells[idx(k)];
        double r = b.rhs;
        for (const auto& [j, c] : b.terms) r -= c * faces[j];
        x[k] = r / b.pivot;
    }
    return x;
}

CondensedSystem condense(const SparseSystem& system) {
    const Index nk = system.n_cells;
    const Index nf = system.size() - nk;
    const RowMatrix& a = system.matrix;
    CondensedSystem out;
    out.cells.resize(idx(nk));

    for (Index k = 0; k < nk; ++k) {
        BackSubstitution& b = out.cells[idx(k)];
        b.rhs = system.rhs[k];
        double scale = 0.0;
        for (RowMatrix::InnerIterator it(a, k); it; ++it) {
            scale = std::max(scale, std::abs(it.value()));
            if (it.col() == k) {
                b.pivot = it.value();
            } else if (it.col() < nk) {
                if (it.value() != 0.0) {
                    throw AssemblyError("balance row of cell " + std::to_string(k) + " couples cell " +
                                        std::to_string(it.col()));
                }
            } else {
                b.terms.emplace_back(it.col() - nk, it.value());
            }
        }
        if (!(std::abs(b.pivot) > 1e-14 * scale) || !std::isfinite(b.pivot)) {
            throw AssemblyError("zero pivot on cell " + std::to_string(k));
        }
    }

    std::vector<Triplet> triplets;
    triplets.reserve(idx(a.nonZeros()));
    out.rhs = system.rhs.tail(nf);
    for (Index r = 0; r < nf; ++r) {
        for (RowMatrix::InnerIterator it(a, nk + r); it; ++it) {
            if (it.col() >= nk) {
                triplets.emplace_back(r, it.col() - nk, it.value());
                continue;
            }
            const BackSubstitution& b = out.cells[idx(it.col())];
            const double m = it.value() / b.pivot;
            out.rhs[r] -= m * b.rhs;
            for (const auto& [j, c] : b.terms) triplets.emplace_back(r, j, -m * c);
        }
    }
    out.matrix.resize(nf, nf);
    out.matrix.setFromTriplets(triplets.begin(), triplets.end());
    out.matrix.makeCompressed();
    return out;
}

Eigen::VectorXd solve_linear(const RowMatrix& matrix, const Eigen::VectorXd& rhs, const SolverOptions& options,
                             int& iterations) {
    iterations = 0;
    if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size()) throw SolveError("system is not square");
    if (rhs.size() == 0) return rhs;
    if (options.kind == SolverOptions::Kind::Direct) {
        const Eigen::SparseMatrix<double> cm = matrix;
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(cm);
        if (lu.info() != Eigen::Success) throw SolveError("sparse LU failed: " + lu.lastErrorMessage());
        Eigen::VectorXd x = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !x.allFinite()) throw SolveError("sparse LU solve failed");
        // One step of iterative refinement when rounding leaves the target unmet.
        if (relative_residual(matrix, x, rhs) > options.tolerance()) {
            const Eigen::VectorXd r = rhs - matrix * x;
            x += lu.solve(r);
            iterations = 1;
        }
        return x;
    }
    Eigen::BiCGSTAB<RowMatrix, Eigen::IncompleteLUT<double>> solver;
    solver.setTolerance(options.tolerance());
    solver.setMaxIterations(options.max_iter);
    solver.compute(matrix);
    if (solver.info() != Eigen::Success) throw SolveError("ILU preconditioner setup failed");
    Eigen::VectorXd x = solver.solve(rhs);
    iterations = static_cast<int>(solver.iterations());
    if (solver.info() != Eigen::Success || !x.allFinite()) {
        throw SolveError("BiCGSTAB did not converge: residual " + std::to_string(solver.error()) + " after " +
                         std::to_string(iterations) + " iterations");
    }
    return x;
}

Eigen::VectorXd solve(const SparseSystem& system, const SolverOptions& options, SolveReport& report) {
    const auto t0 = std::chrono::steady_clock::now();
    report.dofs = system.size();
    Eigen::VectorXd x;
    if (options.condense && system.condensable) {
        const CondensedSystem cs = condense(system);
        report.condensed_dofs = cs.size();
        x = cs.expand(solve_linear(cs.matrix, cs.rhs, options, report.iterations));
    } else {
        report.condensed_dofs = system.size();
        x = solve_linear(system.matrix, system.rhs, options, report.iterations);
    }
    report.residual = relative_residual(system.matrix, x, system.rhs);
    report.seconds = seconds_since(t0);
    // Condensed solves are judged on the full system, where back-substitution
    // rounding can add a few ulps; allow a small safety factor.
    report.converged = report.residual <= 10.0 * options.tolerance();
    if (!report.converged) {
        throw SolveError("relative residual " + std::to_string(report.residual) + " above tolerance");
    }
    return x;
}

SparseSystem assemble_cell_centered(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                                    const SchemeOptions& options) {
    if (problem.dim != mesh.dim()) throw AssemblyError("problem and mesh dimensions differ");
    const Index nk = mesh.n_cells();
    std::vector<Index> unknown_of_face(idx(mesh.n_faces()), -1);
    SparseSystem sys;
    sys.n_cells = nk;
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        if (!mesh.face(f).is_boundary()) continue;
        unknown_of_face[idx(f)] = nk + static_cast<Index>(sys.face_of_unknown.size());
        sys.face_of_unknown.push_back(f);
    }
    const Index n = nk + static_cast<Index>(sys.face_of_unknown.size());
    sys.rhs = Eigen::VectorXd::Zero(n);
    sys.roles.assign(idx(nk), RowRole::Balance);
    sys.roles.resize(idx(n), RowRole::Boundary);

    std::vector<Tensor> lambda(idx(nk));
    for (Index k = 0; k < nk; ++k) lambda[idx(k)] = cell_tensor(problem, geom, k, options);
    const FaceVelocity fv = face_velocity(mesh, geom, problem.velocity, options.face_rule);
    const std::vector<bool> flagged =
        options.cc_boundary == CellCenteredBoundary::FirstOrder ? near_boundary_cells(mesh) : std::vector<bool>{};

    std::vector<Triplet> triplets;
    triplets.reserve(idx(nk) * 24);
    auto add = [&](Index row, const FluxTerm& t) {
        const Index col = t.cell >= 0 ? t.cell : unknown_of_face[idx(t.face)];
        if (col < 0) throw AssemblyError("flux term on interior face without unknown");
        triplets.emplace_back(row, col, t.coefficient);
    };
    for (Index k = 0; k < nk; ++k) {
        for (std::size_t s = 0; s < geom.local(k).size(); ++s) {
            for (const FluxTerm& t : two_point_diffusive_terms(mesh, geom, lambda, k, s)) add(k, t);
            for (const FluxTerm& t : cell_centered_advective_terms(mesh, geom, fv, flagged, k, s)) add(k, t);
        }
        sys.rhs[k] = geom.measure(k) * cell_average(mesh, geom, k, problem.source);
    }
    for (std::size_t j = 0; j < sys.face_of_unknown.size(); ++j) {
        const Index row = nk + static_cast<Index>(j);
        triplets.emplace_back(row, row, 1.0);
        sys.rhs[row] = face_average(mesh, geom, sys.face_of_unknown[j], problem.boundary, options.face_rule);
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    sys.matrix.makeCompressed();
    return sys;
}

RowResiduals row_residuals(const SparseSystem& system, const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = system.matrix * x - system.rhs;
    RowResiduals out;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double v = std::abs(r[i]);
        switch (system.roles[idx(i)]) {
            case RowRole::Balance: out.balance = std::max(out.balance, v); break;
            case RowRole::Conservation: out.conservation = std::max(out.conservation, v); break;
            case RowRole::Boundary: out.boundary = std::max(out.boundary, v); break;
        }
    }
    return out;
}

std::vector<double> limiter_values(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& field,
                                   CorrectionGradient gradient) {
    std::vector<double> phi(idx(mesh.n_cells()));
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        const auto faces = mesh.cell_faces(k);
        Eigen::VectorXd fv(eidx(faces.size()));
        for (std::size_t s = 0; s < faces.size(); ++s) fv[eidx(s)] = field.faces[faces[s]];
        phi[idx(k)] = limiter_phi(geom.local(k), geom.center(k), geom.measure(k), mesh.dim(), field.cells[k], fv,
                                  gradient);
    }
    return phi;
}

namespace {

std::vector<Point> hybrid_error_gradient(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& field,
                                         ErrorGradient which) {
    if (which == ErrorGradient::Stabilised) return stabilised_gradient(mesh, geom, field);
    const auto per_cell = consistent_gradient(mesh, geom, field);
    std::vector<Point> out(geom.cell_faces.size());
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (Index p = geom.offsets[idx(k)]; p < geom.offsets[idx(k) + 1]; ++p) out[idx(p)] = per_cell[idx(k)];
    }
    return out;
}

HybridField hybrid_from_vector(const PolyMesh& mesh, const Eigen::VectorXd& x) {
    HybridField q;
    q.cells = x.head(mesh.n_cells());
    q.faces = x.tail(mesh.n_faces());
    return q;
}

}  // namespace

namespace {
constexpr int kPicardFreeAfter = 10;
constexpr double kPhiLevels = 8.0;
}  // namespace

SolveResult solve_limited(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem,
                          const SchemeOptions& options, const SolverOptions& solver) {
    if (!(options.relaxation > 0.0 && options.relaxation <= 1.0)) {
        throw AssemblyError("Picard relaxation must lie in (0, 1]");
    }
    const auto t0 = std::chrono::steady_clock::now();
    SolveResult out;
    std::vector<double> phi(idx(mesh.n_cells()), options.force_phi_zero ? 0.0 : 1.0);
    Eigen::VectorXd prev;
    out.report.converged = false;
    for (int it = 1; it <= std::max(1, options.picard_max); ++it) {
        const SparseSystem sys = assemble_hybrid(mesh, geom, problem, Scheme::Hybrid2Limited, options, phi);
        SolveReport step;
        Eigen::VectorXd x = solve(sys, solver, step);
        if (it > 1 && options.relaxation != 1.0) x = options.relaxation * x + (1.0 - options.relaxation) * prev;
        out.report.iterations += step.iterations;
        out.report.residual = step.residual;
        out.report.dofs = step.dofs;
        out.report.condensed_dofs = step.condensed_dofs;
        out.report.picard_iterations = it;
        out.phi = phi;
        out.field = hybrid_from_vector(mesh, x);
        if (it > 1) {
            out.report.picard_change = (x - prev).cwiseAbs().maxCoeff();
            if (out.report.picard_change <= options.picard_tol) {
                out.report.converged = true;
                break;
            }
        }
        prev = std::move(x);
        if (options.force_phi_zero) continue;
        std::vector<double> next = limiter_values(mesh, geom, out.field, options.gradient);
        // Past a few sweeps φ may only decrease, in steps of 1/8, so the iteration
        // cannot cycle and stops after finitely many sweeps. Any φ below the
        // Barth-Jespersen value still keeps the reconstruction within bounds.
        if (it >= kPicardFreeAfter) {
            for (std::size_t k = 0; k < next.size(); ++k) {
                next[k] = std::min(std::floor(next[k] * kPhiLevels) / kPhiLevels, phi[k]);
            }
        }
        phi = std::move(next);
    }
    out.dofs = out.report.dofs;
    out.gradient = hybrid_error_gradient(mesh, geom, out.field, options.error_gradient);
    out.report.seconds = seconds_since(t0);
    return out;
}

std::vector<Point> cell_centered_gradient(const PolyMesh& mesh, const GeometryCache& geom, const FaceVelocity& fv,
                                          const HybridField& field) {
    std::vector<Point> out(geom.cell_faces.size());
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        Point g = Point::Zero();
        for (const CellFace& cf : geom.local(k)) {
            if (fv.value(mesh, cf.face, k) > 0.0) continue;
            const Index nb = mesh.other_cell(cf.face, k);
            const double up = nb >= 0 ? field.cells[nb] : field.faces[cf.face];
            g += cf.measure * (up - field.cells[k]) * cf.normal;
        }
        g /= geom.measure(k);
        for (Index p = geom.offsets[idx(k)]; p < geom.offsets[idx(k) + 1]; ++p) out[idx(p)] = g;
    }
    return out;
}

SolveResult solve_problem(const PolyMesh& mesh, const GeometryCache& geom, const ProblemSpec& problem, Scheme scheme,
                          const SchemeOptions& options, const SolverOptions& solver) {
    if (scheme == Scheme::Hybrid2Limited) return solve_limited(mesh, geom, problem, options, solver);
    SolveResult out;
    if (scheme == Scheme::CellCentered2) {
        const SparseSystem sys = assemble_cell_centered(mesh, geom, problem, options);
        const Eigen::VectorXd x = solve(sys, solver, out.report);
        out.field = HybridField::zeros(mesh);
        out.field.cells = x.head(mesh.n_cells());
        // Interior faces carry no unknown; store the mean of the two cells for output.
        for (Index f = 0; f < mesh.n_faces(); ++f) {
            const Face& fc = mesh.face(f);
            if (!fc.is_boundary()) out.field.faces[f] = 0.5 * (x[fc.owner] + x[fc.neighbor]);
        }
        for (std::size_t j = 0; j < sys.face_of_unknown.size(); ++j) {
            out.field.faces[sys.face_of_unknown[j]] = x[mesh.n_cells() + static_cast<Index>(j)];
        }
        const FaceVelocity fv = face_velocity(mesh, geom, problem.velocity, options.face_rule);
        out.gradient = cell_centered_gradient(mesh, geom, fv, out.field);
    } else {
        const SparseSystem sys = assemble_hybrid(mesh, geom, problem, scheme, options);
        const Eigen::VectorXd x = solve(sys, solver, out.report);
        out.field = hybrid_from_vector(mesh, x);
        out.gradient = hybrid_error_gradient(mesh, geom, out.field, options.error_gradient);
    }
    out.dofs = out.report.dofs;
    return out;
}

void write_matrix_market(std::ostream& out, const RowMatrix& matrix) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << matrix.rows() << ' ' << matrix.cols() << ' ' << matrix.nonZeros() << '\n';
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
        for (RowMatrix::InnerIterator it(matrix, r); it; ++it) {
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
        }
    }
}

}  // namespace hfv
