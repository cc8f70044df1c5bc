#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hfv/assembly.hpp"
#include "hfv/rng.hpp"
#include "hfv/study.hpp"
#include "test_support.hpp"

using namespace hfv;
using hfv::testing::mesh_zoo;

namespace {

ProblemSpec pure_diffusion(const Tensor& lambda, const ScalarField& g, int dim = 2) {
    ProblemSpec p;
    p.diffusion = [lambda](const Point&) { return lambda; };
    p.velocity = [](const Point&) { return Point(0.0, 0.0); };
    p.source = [](const Point&) { return 0.0; };
    p.boundary = g;
    p.dim = dim;
    return p;
}

// Well-conditioned advection-diffusion problem on 1D or 2D meshes.
ProblemSpec transport(int dim) {
    if (dim == 1) return problem_eps_1d(0.05);
    ProblemSpec p = pure_diffusion(0.01 * Tensor::Identity(), [](const Point& x) { return x.x() + x.y() * x.y(); });
    p.velocity = [](const Point& x) { return Point(1.0 + x.y(), 0.5 - x.x()); };
    p.source = [](const Point& x) { return 1.0 + x.x(); };
    return p;
}

Eigen::VectorXd solve_full(const SparseSystem& sys) {
    SolverOptions o;
    o.condense = false;
    SolveReport r;
    return solve(sys, o, r);
}

Eigen::VectorXd solve_condensed(const SparseSystem& sys) {
    SolveReport r;
    return solve(sys, SolverOptions{}, r);
}

}  // namespace

TEST(Schemes, NamesRoundTrip) {
    for (const Scheme s : {Scheme::Upwind1, Scheme::Hybrid2, Scheme::Hybrid2Limited, Scheme::CellCentered2}) {
        EXPECT_EQ(parse_scheme(to_string(s)), s);
    }
    EXPECT_FALSE(parse_scheme("bogus").has_value());
}

TEST(Assembly, PureDiffusionIsExactOnAffineData) {
    SplitMix64 rng(21);
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        Tensor lambda = Tensor::Identity();
        Point a(1.3, -0.4);
        if (m.dim() == 2) {
            Eigen::Matrix2d b;
            b << rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform();
            lambda = b * b.transpose() + 0.2 * Tensor::Identity();
        } else {
            a.y() = 0.0;
        }
        const ScalarField u = [a](const Point& x) { return 0.25 + a.dot(x); };
        const SolveResult r = solve_problem(m, g, pure_diffusion(lambda, u, m.dim()), Scheme::Hybrid2);
        for (Index k = 0; k < m.n_cells(); ++k) EXPECT_NEAR(r.field.cells[k], u(g.center(k)), 1e-10) << name;
        for (Index f = 0; f < m.n_faces(); ++f) {
            EXPECT_NEAR(r.field.faces[f], u(g.face_midpoint[static_cast<std::size_t>(f)]), 1e-10) << name;
        }
    }
}

TEST(Assembly, CondensationMatchesFullSolve) {
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        const ProblemSpec p = transport(m.dim());
        std::vector<double> phi(static_cast<std::size_t>(m.n_cells()));
        for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = 0.1 * static_cast<double>(k % 11);
        for (const Scheme s : {Scheme::Upwind1, Scheme::Hybrid2, Scheme::Hybrid2Limited}) {
            const SparseSystem sys = assemble_hybrid(m, g, p, s, {}, phi);
            ASSERT_TRUE(sys.condensable) << name;
            const Eigen::VectorXd full = solve_full(sys), cond = solve_condensed(sys);
            EXPECT_LT((full - cond).cwiseAbs().maxCoeff(), 1e-10) << name << ' ' << to_string(s);
            const CondensedSystem c = condense(sys);
            EXPECT_EQ(c.size(), m.n_faces());
        }
    }
}

TEST(Assembly, ConservationAndBalanceResiduals) {
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        const ProblemSpec p = transport(m.dim());
        for (const Scheme s : {Scheme::Upwind1, Scheme::Hybrid2}) {
            const SparseSystem sys = assemble_hybrid(m, g, p, s);
            const RowResiduals r = row_residuals(sys, solve_condensed(sys));
            EXPECT_LE(r.balance, 1e-10) << name;
            EXPECT_LE(r.conservation, 1e-10) << name;
            EXPECT_LE(r.boundary, 1e-10) << name;
        }
        const SparseSystem cc = assemble_cell_centered(m, g, p);
        const RowResiduals r = row_residuals(cc, solve_condensed(cc));
        EXPECT_LE(std::max({r.balance, r.conservation, r.boundary}), 1e-10) << name;
    }
}

TEST(Assembly, BalanceRowsSumTheCellFluxes) {
    // Constant field with V = 0: every flux vanishes, so each balance row sums to zero.
    const PolyMesh m = build_triangular(3, 3);
    const GeometryCache g = compute_geometry(m);
    const SparseSystem sys =
        assemble_hybrid(m, g, pure_diffusion(Tensor::Identity(), [](const Point&) { return 1.0; }), Scheme::Hybrid2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(sys.size());
    const Eigen::VectorXd y = sys.matrix * ones;
    for (Index k = 0; k < m.n_cells(); ++k) EXPECT_NEAR(y[k], 0.0, 1e-13);
}

TEST(Assembly, ZeroLimiterEqualsFirstOrderBitForBit) {
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        const ProblemSpec p = transport(m.dim());
        const std::vector<double> zero(static_cast<std::size_t>(m.n_cells()), 0.0);
        const SparseSystem a = assemble_hybrid(m, g, p, Scheme::Upwind1);
        const SparseSystem b = assemble_hybrid(m, g, p, Scheme::Hybrid2Limited, {}, zero);
        EXPECT_TRUE(Eigen::MatrixXd(a.matrix) == Eigen::MatrixXd(b.matrix)) << name;
        EXPECT_TRUE(a.rhs == b.rhs) << name;
        SchemeOptions o;
        o.force_phi_zero = true;
        const SolveResult first = solve_problem(m, g, p, Scheme::Upwind1);
        const SolveResult limited = solve_problem(m, g, p, Scheme::Hybrid2Limited, o);
        EXPECT_TRUE(first.field.cells == limited.field.cells) << name;
        EXPECT_TRUE(first.field.faces == limited.field.faces) << name;
    }
}

TEST(Assembly, TableOneDofs) {
    const Index hybrid[] = {56, 208, 800, 3136, 12416, 49408};
    const Index cc[] = {32, 96, 320, 1152, 4352, 16896};
    const Index cells[] = {16, 64, 256, 1024, 4096, 16384};
    const Index faces[] = {40, 144, 544, 2112, 8320, 33024};
    const ProblemSpec p = problem_smooth_2d();
    for (int r = 1; r <= 6; ++r) {
        const PolyMesh m = family_mesh(StudyConfig{}, r, p);
        const auto i = static_cast<std::size_t>(r - 1);
        EXPECT_EQ(m.n_cells(), cells[i]);
        EXPECT_EQ(m.n_faces(), faces[i]);
        EXPECT_EQ(scheme_dofs(m, Scheme::Hybrid2), hybrid[i]);
        EXPECT_EQ(scheme_dofs(m, Scheme::CellCentered2), cc[i]);
        if (r <= 4) {
            const GeometryCache g = compute_geometry(m);
            EXPECT_EQ(assemble_hybrid(m, g, p, Scheme::Hybrid2).size(), hybrid[i]);
            EXPECT_EQ(assemble_cell_centered(m, g, p).size(), cc[i]);
        }
    }
}

TEST(Assembly, ZeroPivotNamesTheCell) {
    SparseSystem sys;
    sys.n_cells = 2;
    sys.roles = {RowRole::Balance, RowRole::Balance, RowRole::Boundary};
    sys.condensable = true;
    sys.face_of_unknown = {0};
    sys.matrix.resize(3, 3);
    sys.matrix.insert(0, 0) = 1.0;
    sys.matrix.insert(0, 2) = -1.0;
    sys.matrix.insert(1, 2) = 1.0;  // cell 1 has no diagonal entry
    sys.matrix.insert(2, 2) = 1.0;
    sys.rhs = Eigen::VectorXd::Ones(3);
    try {
        condense(sys);
        FAIL() << "expected AssemblyError";
    } catch (const AssemblyError& e) {
        EXPECT_NE(std::string(e.what()).find("cell 1"), std::string::npos) << e.what();
    }
}

TEST(Solver, IterativeMatchesDirect) {
    const PolyMesh m = build_cartesian(16, 16);
    const GeometryCache g = compute_geometry(m);
    const ProblemSpec p = problem_smooth_2d();
    SolverOptions it;
    it.kind = SolverOptions::Kind::Iterative;
    it.tol = 1e-12;
    const SolveResult a = solve_problem(m, g, p, Scheme::Hybrid2);
    const SolveResult b = solve_problem(m, g, p, Scheme::Hybrid2, {}, it);
    EXPECT_LT((a.field.cells - b.field.cells).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_GT(b.report.iterations, 0);
    EXPECT_LE(b.report.residual, 1e-11);
}

TEST(Solver, IterationCapIsReported) {
    const PolyMesh m = build_cartesian(16, 16);
    const GeometryCache g = compute_geometry(m);
    SolverOptions it;
    it.kind = SolverOptions::Kind::Iterative;
    it.tol = 1e-15;
    it.max_iter = 1;
    EXPECT_THROW(solve_problem(m, g, problem_hetero_rotation(), Scheme::Hybrid2, {}, it), SolveError);
}

TEST(Limited, PicardConvergesAndPhiInRange) {
    const PolyMesh m = build_cartesian(8, 8);
    const GeometryCache g = compute_geometry(m);
    const SolveResult r = solve_problem(m, g, problem_smooth_2d(), Scheme::Hybrid2Limited);
    EXPECT_TRUE(r.report.converged);
    EXPECT_LE(r.report.picard_change, 1e-10);
    for (const double phi : r.phi) {
        EXPECT_GE(phi, 0.0);
        EXPECT_LE(phi, 1.0);
    }
}

TEST(Limited, NoOvershootOnSteepLayer) {
    const PolyMesh m = build_interval(100);
    const GeometryCache g = compute_geometry(m);
    const SolveResult r = solve_problem(m, g, problem_eps_1d(0x1p-10), Scheme::Hybrid2Limited);
    EXPECT_TRUE(r.report.converged);
    EXPECT_LE(r.field.cells.maxCoeff(), 1.0 + 1e-10);
    EXPECT_GE(r.field.cells.minCoeff(), -1e-10);
}

TEST(Upwind, DiscreteMaximumPrincipleIn1D) {
    const PolyMesh m = build_interval(100);
    const GeometryCache g = compute_geometry(m);
    for (const int p : {4, 6, 8, 10}) {
        const SolveResult r = solve_problem(m, g, problem_eps_1d(std::ldexp(1.0, -p)), Scheme::Upwind1);
        EXPECT_LE(r.field.cells.maxCoeff(), 1.0 + 1e-10);
        EXPECT_GE(r.field.cells.minCoeff(), -1e-10);
    }
}

TEST(VanishingDiffusion, ReducesTheOvershoot) {
    const PolyMesh m = build_interval(100);
    const GeometryCache g = compute_geometry(m);
    const ProblemSpec p = problem_eps_1d(0x1p-10);
    SchemeOptions vd;
    vd.vanishing_diffusion = true;
    const double plain = solve_problem(m, g, p, Scheme::Hybrid2).field.cells.maxCoeff();
    const double damped = solve_problem(m, g, p, Scheme::Hybrid2, vd).field.cells.maxCoeff();
    EXPECT_GT(plain, 1.0);
    EXPECT_LT(damped, plain);
}

TEST(CellCentered, FirstOrderBoundaryOptionAssembles) {
    const PolyMesh m = build_cartesian(8, 8);
    const GeometryCache g = compute_geometry(m);
    SchemeOptions o;
    o.cc_boundary = CellCenteredBoundary::FirstOrder;
    const SolveResult r = solve_problem(m, g, problem_smooth_2d(), Scheme::CellCentered2, o);
    EXPECT_LE(r.report.residual, 1e-10);
    EXPECT_EQ(r.gradient.size(), g.cell_faces.size());
}

TEST(MatrixMarket, CoordinateFormat) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> a(2, 3);
    a.insert(0, 1) = 2.5;
    a.insert(1, 0) = -1.0;
    std::ostringstream out;
    write_matrix_market(out, a);
    EXPECT_EQ(out.str(), "%%MatrixMarket matrix coordinate real general\n2 3 2\n1 2 2.5\n2 1 -1\n");
}
