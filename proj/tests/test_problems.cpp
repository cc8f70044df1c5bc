#include <gtest/gtest.h>

#include <cmath>

#include "hfv/problems.hpp"
#include "hfv/rng.hpp"
#include "test_support.hpp"

using namespace hfv;

namespace {

// div(-Λ∇c + cV) by central differences of the flux, with the exact gradient inside.
double divergence_oracle(const ProblemSpec& p, const Point& x, double step) {
    auto flux = [&](const Point& y) -> Point {
        return -(p.diffusion(y) * p.exact->gradient(y)) + p.exact->value(y) * p.velocity(y);
    };
    const Point ex(step, 0.0), ey(0.0, step);
    return (flux(x + ex).x() - flux(x - ex).x()) / (2 * step) + (flux(x + ey).y() - flux(x - ey).y()) / (2 * step);
}

// ∫_K u over a polygon by Green's theorem: ∫ x^a y^b = ∮ x^{a+1} y^b/(a+1) dy, 8-point Gauss per edge.
double polygon_moment(const PolyMesh& m, Index k, int a, int b) {
    static const double gx[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static const double gw[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const auto loop = m.cell(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        const Point p = m.vertex(loop[i]), q = m.vertex(loop[(i + 1) % loop.size()]);
        for (int j = 0; j < 8; ++j) {
            const Point x = 0.5 * (p + q) + 0.5 * gx[j] * (q - p);
            sum += 0.5 * gw[j] * std::pow(x.x(), a + 1) * std::pow(x.y(), b) / (a + 1) * (q.y() - p.y());
        }
    }
    return sum;
}

ProblemSpec constant_problem() {
    ProblemSpec p;
    p.exact = ExactSolution{[](const Point&) { return 2.0; }, [](const Point&) { return Point(0.0, 0.0); }};
    return p;
}

}  // namespace

TEST(Eps1d, BoundaryValues) {
    for (const double eps : {0x1p-4, 0x1p-10}) {
        const ProblemSpec p = problem_eps_1d(eps);
        EXPECT_NEAR(p.exact->value(Point(0.0, 0.0)), 1.0, 1e-15);
        EXPECT_NEAR(p.exact->value(Point(1.0, 0.0)), 0.0, 1e-15);
    }
}

TEST(Eps1d, MidpointValueMatchesClosedForm) {
    // Evaluated in long double from (e^{(x-1)/ε} - 1)/(e^{-1/ε} - 1) at x = 0.5, ε = 1/16.
    const long double e = 1.0L / 16.0L;
    const long double oracle = (std::exp(-0.5L / e) - 1.0L) / (std::exp(-1.0L / e) - 1.0L);
    EXPECT_NEAR(problem_eps_1d(0x1p-4).exact->value(Point(0.5, 0.0)), static_cast<double>(oracle), 1e-15);
    EXPECT_NEAR(static_cast<double>(oracle), 0.99966464986953352, 1e-15);
}

TEST(Eps1d, LargeEpsilonGivesLinearProfile) {
    const ProblemSpec p = problem_eps_1d(1e8);
    for (const double x : {0.1, 0.5, 0.9}) EXPECT_NEAR(p.exact->value(Point(x, 0.0)), 1.0 - x, 1e-7);
}

TEST(Eps1d, RejectsNonPositiveEpsilon) {
    EXPECT_THROW(problem_eps_1d(0.0), std::invalid_argument);
    EXPECT_THROW(problem_eps_1d(-1.0), std::invalid_argument);
}

TEST(Smooth, DataAndBoundary) {
    const ProblemSpec p = problem_smooth_2d();
    EXPECT_NEAR(p.exact->value(Point(0.5, 0.5)), 1.0, 1e-15);
    for (const double t : {0.0, 0.3, 0.77, 1.0}) {
        EXPECT_NEAR(p.boundary(Point(t, 0.0)), 0.0, 1e-15);
        EXPECT_NEAR(p.boundary(Point(0.0, t)), 0.0, 1e-15);
        EXPECT_NEAR(p.boundary(Point(1.0, t)), 0.0, 1e-15);
        EXPECT_NEAR(p.boundary(Point(t, 1.0)), 0.0, 1e-15);
    }
    const Tensor l = p.diffusion(Point(0.2, 0.2));
    EXPECT_EQ(l(0, 0), 1.5e-4);
    EXPECT_EQ(l(0, 1), 1e-6);
    EXPECT_EQ(l(1, 1), 1e-8);
}

TEST(Smooth, SourceMatchesFiniteDifferenceDivergence) {
    const ProblemSpec p = problem_smooth_2d();
    SplitMix64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const Point x(rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99));
        const double f = p.source(x);
        EXPECT_NEAR(divergence_oracle(p, x, 1e-5), f, 1e-5 * std::max(1.0, std::abs(f)));
    }
}

TEST(BoundaryLayer, VanishesOnOutflowSides) {
    const ProblemSpec p = problem_boundary_layer_2d();
    for (const double t : {0.0, 0.25, 0.6, 0.95}) {
        EXPECT_NEAR(p.exact->value(Point(1.0, t)), 0.0, 1e-15);
        EXPECT_NEAR(p.exact->value(Point(t, 1.0)), 0.0, 1e-15);
    }
}

TEST(BoundaryLayer, SourceMatchesFiniteDifferenceDivergence) {
    for (const double nu : {1e-2, 1e-4}) {
        const ProblemSpec p = problem_boundary_layer_2d(nu);
        SplitMix64 rng(2);
        for (int i = 0; i < 100; ++i) {
            // Away from the layer the exact data is smooth on the difference scale.
            const Point x(rng.uniform(0.01, 0.95), rng.uniform(0.01, 0.95));
            const double f = p.source(x);
            EXPECT_NEAR(divergence_oracle(p, x, 1e-6), f, 1e-5 * std::max(1.0, std::abs(f)));
        }
    }
}

TEST(BoundaryLayer, SubdomainByCentroid) {
    const ProblemSpec p = problem_boundary_layer_2d();
    EXPECT_TRUE(p.subdomain(Point(0.8, 0.8)));
    EXPECT_FALSE(p.subdomain(Point(0.81, 0.2)));
    EXPECT_FALSE(p.subdomain(Point(0.2, 0.81)));
}

TEST(Hetero, TensorsVelocityAndBoundary) {
    const ProblemSpec p = problem_hetero_rotation();
    const Tensor t1 = p.diffusion(Point(0.2, 0.2));
    EXPECT_EQ(t1(0, 0), 1e-6);
    EXPECT_EQ(t1(1, 1), 1.0);
    const Tensor t2 = p.diffusion(Point(0.9, 0.2));
    EXPECT_EQ(t2(0, 0), 1.0);
    EXPECT_EQ(t2(1, 1), 1e-6);
    EXPECT_EQ(p.diffusion(Point(0.9, 0.9))(0, 0), 1e-6);
    EXPECT_EQ(p.diffusion(Point(0.2, 0.9))(0, 0), 1.0);
    EXPECT_EQ(p.velocity(Point(0.5, 0.5)).norm(), 0.0);
    EXPECT_EQ(p.boundary(Point(0.0, 0.4)), 0.0);
    EXPECT_FALSE(p.exact.has_value());
}

TEST(Velocity, DivergenceFree) {
    // V is quadratic in each variable along its own component, so central differences are exact.
    const double step = 0.25;
    SplitMix64 rng(3);
    for (const ProblemSpec& p : {problem_smooth_2d(), problem_boundary_layer_2d(), problem_hetero_rotation()}) {
        for (int i = 0; i < 1000; ++i) {
            const Point x(rng.uniform(), rng.uniform());
            const Point ex(step, 0.0), ey(0.0, step);
            const double div = (p.velocity(x + ex).x() - p.velocity(x - ex).x()) / (2 * step) +
                               (p.velocity(x + ey).y() - p.velocity(x - ey).y()) / (2 * step);
            EXPECT_NEAR(div, 0.0, 1e-12);
        }
    }
}

TEST(Hetero, MisalignedCellsAndSnapping) {
    const ProblemSpec p = problem_hetero_rotation();
    const PolyMesh m = build_cartesian(4, 4);
    EXPECT_EQ(misaligned_cells(m, p), 7);
    const double line[] = {2.0 / 3.0};
    EXPECT_EQ(misaligned_cells(snap_to_lines(m, line, line), p), 0);
    EXPECT_EQ(misaligned_cells(build_cartesian(6, 6), p), 0);
}

TEST(Quadrature, CellAverageExactForQuadratics) {
    const PolyMesh m = hfv::testing::mesh_zoo()[3].mesh;
    const GeometryCache g = compute_geometry(m);
    const ScalarField f = [](const Point& x) { return 1.0 + x.x() * x.x() - 2.0 * x.x() * x.y() + 0.5 * x.y(); };
    for (Index k = 0; k < m.n_cells(); ++k) {
        const double oracle = (polygon_moment(m, k, 0, 0) + polygon_moment(m, k, 2, 0) -
                               2.0 * polygon_moment(m, k, 1, 1) + 0.5 * polygon_moment(m, k, 0, 1)) /
                              g.measure(k);
        EXPECT_NEAR(cell_average(m, g, k, f), oracle, 1e-13);
    }
}

TEST(Quadrature, CellAverageGradientOfQuadratic) {
    const PolyMesh m = build_kershaw(6, 6, 0.7);
    const GeometryCache g = compute_geometry(m);
    const ScalarField c = [](const Point& x) { return x.x() * x.x() + 3.0 * x.x() * x.y(); };
    for (Index k = 0; k < m.n_cells(); ++k) {
        const Point& xk = g.center(k);
        const Point oracle(2.0 * xk.x() + 3.0 * xk.y(), 3.0 * xk.x());
        EXPECT_LT((cell_average_gradient(m, g, k, c) - oracle).norm(), 1e-12);
    }
}

TEST(ErrorMetrics, ExactConstantGivesZero) {
    const PolyMesh m = build_triangular(4, 4);
    const GeometryCache g = compute_geometry(m);
    const ProblemSpec p = constant_problem();
    const HybridField q = interpolate(m, g, p.exact->value);
    const std::vector<Point> grad(g.cell_faces.size(), Point::Zero());
    for (const auto norm : {ErrorNorm::CellAverage, ErrorNorm::CellCenter, ErrorNorm::Quadrature}) {
        const ErrorReport r = error_metrics(m, g, q, grad, p, norm);
        EXPECT_NEAR(r.E_c, 0.0, 1e-15);
        EXPECT_NEAR(r.E_g, 0.0, 1e-15);
    }
}

TEST(ErrorMetrics, FullMaskEqualsUnrestricted) {
    const PolyMesh m = build_cartesian(6, 6);
    const GeometryCache g = compute_geometry(m);
    ProblemSpec p = problem_smooth_2d();
    const HybridField q = interpolate(m, g, [](const Point& x) { return x.x() * (1 - x.x()); });
    const std::vector<Point> grad(g.cell_faces.size(), Point(0.1, 0.2));
    const ErrorReport a = error_metrics(m, g, q, grad, p);
    p.subdomain = [](const Point&) { return true; };
    const ErrorReport b = error_metrics(m, g, q, grad, p);
    EXPECT_EQ(a.E_c, b.E_c);
    EXPECT_EQ(a.E_g, b.E_g);
}

TEST(ErrorMetrics, InvariantUnderCellRelabeling) {
    const PolyMesh m = build_triangular(5, 5);
    auto cells = m.cells();
    std::reverse(cells.begin(), cells.end());
    const PolyMesh r = PolyMesh::from_cells(2, m.vertices(), cells);
    const ProblemSpec p = problem_smooth_2d();
    const ScalarField guess = [](const Point& x) { return 4 * x.x() * (1 - x.x()) * x.y(); };
    auto metrics = [&](const PolyMesh& mesh) {
        const GeometryCache g = compute_geometry(mesh);
        const HybridField q = interpolate(mesh, g, guess);
        return error_metrics(mesh, g, q, stabilised_gradient(mesh, g, q), p);
    };
    const ErrorReport a = metrics(m), b = metrics(r);
    EXPECT_NEAR(a.E_c, b.E_c, 1e-13 * a.E_c);
    EXPECT_NEAR(a.E_g, b.E_g, 1e-13 * a.E_g);
}

TEST(ErrorMetrics, RejectsPerCellGradient) {
    const PolyMesh m = build_cartesian(2, 2);
    const GeometryCache g = compute_geometry(m);
    const std::vector<Point> per_cell(4, Point::Zero());
    EXPECT_THROW(error_metrics(m, g, HybridField::zeros(m), per_cell, problem_smooth_2d()), std::invalid_argument);
}

TEST(Overshoot, Examples) {
    Eigen::VectorXd c(3);
    c << 0.0, 0.5, 1.0;
    Overshoot o = overshoot(c, 0.0, 1.0);
    EXPECT_EQ(o.over, 0.0);
    EXPECT_EQ(o.under, 0.0);
    c << 0.2, 1.03, 0.5;
    o = overshoot(c, 0.0, 1.0);
    EXPECT_NEAR(o.over, 0.03, 1e-15);
    EXPECT_NEAR(o.over_fraction, 0.03, 1e-15);
    c << -0.1, 0.3, 0.5;
    o = overshoot(c, 0.0, 2.0);
    EXPECT_NEAR(o.under, 0.1, 1e-15);
    EXPECT_NEAR(o.under_fraction, 0.05, 1e-15);
}

TEST(ObservedOrder, Examples) {
    const double h[] = {0.1, 0.05};
    const double e2[] = {1e-2, 2.5e-3};
    const double e1[] = {1e-2, 5e-3};
    EXPECT_NEAR(*observed_order(e2, h)[0], 2.0, 1e-14);
    EXPECT_NEAR(*observed_order(e1, h)[0], 1.0, 1e-14);
    const double zero[] = {1e-2, 0.0};
    EXPECT_FALSE(observed_order(zero, h)[0].has_value());
    const double bad_h[] = {0.05, 0.1};
    EXPECT_THROW(observed_order(e1, bad_h), std::invalid_argument);
}

TEST(ObservedOrder, ReferenceLadderIsSecondOrder) {
    const double h[] = {3.536e-01, 1.768e-01, 8.838e-02, 4.419e-02, 2.209e-02, 1.105e-02};
    const double e[] = {5.192e-02, 1.287e-02, 3.208e-03, 7.997e-04, 1.989e-04, 4.934e-05};
    for (const auto& r : observed_order(e, h)) EXPECT_NEAR(*r, 2.0, 0.1);
}
