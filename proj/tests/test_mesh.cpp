#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hfv/mesh.hpp"
#include "hfv/rng.hpp"
#include "test_support.hpp"

using namespace hfv;
using hfv::testing::mesh_zoo;

namespace {

// Largest vertex-to-vertex distance, by brute force.
double brute_diameter(const PolyMesh& m, Index k) {
    double d = 0.0;
    for (const Index a : m.cell(k)) {
        for (const Index b : m.cell(k)) d = std::max(d, (m.vertex(a) - m.vertex(b)).norm());
    }
    return d;
}

bool inside_convex(const std::vector<Point>& poly, const Point& p) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point e = poly[(i + 1) % poly.size()] - poly[i];
        const Point q = p - poly[i];
        if (e.x() * q.y() - e.y() * q.x() < 0.0) return false;
    }
    return true;
}

}  // namespace

TEST(Interval, HundredCellsHaveSizeOneHundredth) {
    const PolyMesh m = build_interval(100);
    const GeometryCache g = compute_geometry(m);
    EXPECT_EQ(m.n_cells(), 100);
    EXPECT_EQ(m.n_faces(), 101);
    EXPECT_NEAR(g.h, 0.01, 1e-15);
}

TEST(Interval, SingleCellGeometry) {
    const GeometryCache g = compute_geometry(build_interval(1));
    EXPECT_DOUBLE_EQ(g.center(0).x(), 0.5);
    for (const CellFace& cf : g.local(0)) {
        EXPECT_DOUBLE_EQ(cf.distance, 0.5);
        EXPECT_DOUBLE_EQ(cf.measure, 1.0);
        EXPECT_DOUBLE_EQ(std::abs(cf.normal.x()), 1.0);
    }
}

TEST(Interval, FaceCoordinatesAreEquispaced) {
    const PolyMesh m = build_interval(4);
    std::set<double> xs;
    for (const Point& p : m.vertices()) xs.insert(p.x());
    EXPECT_EQ(xs, (std::set<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Interval, RejectsNonPositiveCount) {
    EXPECT_THROW(build_interval(0), MeshError);
    EXPECT_THROW(build_interval(-3), MeshError);
}

TEST(Cartesian, UnitSquareCell) {
    const PolyMesh m = build_cartesian(1, 1);
    const GeometryCache g = compute_geometry(m);
    ASSERT_EQ(m.n_cells(), 1);
    EXPECT_EQ(m.n_faces(), 4);
    for (const CellFace& cf : g.local(0)) {
        EXPECT_DOUBLE_EQ(cf.measure, 1.0);
        EXPECT_DOUBLE_EQ(cf.distance, 0.5);
        EXPECT_DOUBLE_EQ(cf.hull, 0.25);
    }
}

TEST(Triangular, SingleSquareSplit) {
    const PolyMesh m = build_triangular(1, 1);
    EXPECT_EQ(m.n_cells(), 2);
    EXPECT_EQ(m.n_faces(), 5);
}

TEST(Mesh, EulerRelationOnGeneratedMeshes) {
    for (const auto& [name, m] : mesh_zoo()) {
        if (m.dim() != 2) continue;
        EXPECT_EQ(m.n_vertices() - m.n_faces() + m.n_cells(), 1) << name;
    }
}

TEST(Mesh, DiameterMatchesBruteForceAndShrinks) {
    double previous = 1e9;
    for (const Index n : {4, 8, 16, 32}) {
        PerturbOptions p;
        p.seed = 3;
        const PolyMesh m = perturb_mesh(build_triangular(n, n), p);
        const GeometryCache g = compute_geometry(m);
        double h = 0.0;
        for (Index k = 0; k < m.n_cells(); ++k) {
            EXPECT_NEAR(g.diameter[static_cast<std::size_t>(k)], brute_diameter(m, k), 1e-15);
            h = std::max(h, brute_diameter(m, k));
        }
        EXPECT_DOUBLE_EQ(g.h, h);
        EXPECT_LT(h, previous);
        EXPECT_LT(h * static_cast<double>(n), 2.5);
        previous = h;
    }
}

TEST(Geometry, MonteCarloAreaOfRandomPentagon) {
    SplitMix64 rng(11);
    const auto poly = hfv::testing::random_convex_polygon(rng, 5, Point(0.3, -0.2), 0.7);
    const GeometryCache g = compute_geometry(hfv::testing::single_cell(poly));
    Point lo = poly[0], hi = poly[0];
    for (const Point& p : poly) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const int samples = 4'000'000;
    int hits = 0;
    SplitMix64 mc(12);
    for (int i = 0; i < samples; ++i) {
        const Point p(mc.uniform(lo.x(), hi.x()), mc.uniform(lo.y(), hi.y()));
        hits += inside_convex(poly, p) ? 1 : 0;
    }
    const double area = (hi - lo).prod() * hits / samples;
    EXPECT_NEAR(g.measure(0) / area, 1.0, 1e-3);
}

TEST(Geometry, CentroidIsCenterOfGravity) {
    // Trapezoid: vertex average and center of gravity differ.
    const GeometryCache g =
        compute_geometry(hfv::testing::single_cell({{0, 0}, {3, 0}, {2, 1}, {1, 1}}));
    EXPECT_NEAR(g.measure(0), 2.0, 1e-15);
    EXPECT_NEAR(g.center(0).x(), 1.5, 1e-15);
    EXPECT_NEAR(g.center(0).y(), 5.0 / 12.0, 1e-15);
}

TEST(Geometry, IdentitiesOnAllGeneratedMeshes) {
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        const double d = m.dim();
        for (Index k = 0; k < m.n_cells(); ++k) {
            double sum = 0.0, perimeter = 0.0;
            Point closure = Point::Zero();
            for (const CellFace& cf : g.local(k)) {
                EXPECT_NEAR(cf.hull, cf.measure * cf.distance / d, 1e-13 * cf.hull) << name;
                sum += cf.measure * cf.distance;
                perimeter += cf.measure;
                closure += cf.measure * cf.normal;
            }
            EXPECT_NEAR(sum, d * g.measure(k), 1e-13 * d * g.measure(k)) << name;
            if (m.dim() == 2) EXPECT_LT(closure.norm(), 1e-13 * perimeter) << name;
        }
    }
}

TEST(Perturb, ZeroFactorKeepsGeometry) {
    const PolyMesh base = build_cartesian(6, 6);
    PerturbOptions p;
    p.factor = 0.0;
    p.seed = 5;
    EXPECT_EQ(perturb_mesh(base, p).vertices(), base.vertices());
}

TEST(Perturb, DisplacementBoundAndFixedBoundary) {
    const PolyMesh base = build_cartesian(8, 8);
    const double h = compute_geometry(base).h;
    PerturbOptions p;
    p.seed = 42;
    const PolyMesh moved = perturb_mesh(base, p);
    const auto boundary = base.boundary_vertices();
    bool any_moved = false;
    for (Index v = 0; v < base.n_vertices(); ++v) {
        const Point delta = moved.vertex(v) - base.vertex(v);
        if (boundary[static_cast<std::size_t>(v)]) {
            EXPECT_EQ(delta.norm(), 0.0);
        } else {
            EXPECT_LE(delta.cwiseAbs().maxCoeff(), 0.2 * h * (1 + 1e-14));
            any_moved = any_moved || delta.norm() > 0.0;
        }
    }
    EXPECT_TRUE(any_moved);
}

TEST(Perturb, DeterministicGivenSeed) {
    PerturbOptions p;
    p.seed = 42;
    const PolyMesh a = perturb_mesh(build_cartesian(8, 8), p);
    const PolyMesh b = perturb_mesh(build_cartesian(8, 8), p);
    EXPECT_EQ(a.vertices(), b.vertices());
    p.seed = 43;
    EXPECT_NE(perturb_mesh(build_cartesian(8, 8), p).vertices(), a.vertices());
}

TEST(Perturb, RegularityReproducible) {
    PerturbOptions p;
    p.seed = 9;
    const PolyMesh a = perturb_mesh(build_cartesian(16, 16), p);
    const PolyMesh b = perturb_mesh(build_cartesian(16, 16), p);
    const double ra = regularity(a, compute_geometry(a)).regul;
    EXPECT_EQ(ra, regularity(b, compute_geometry(b)).regul);
    EXPECT_LT(ra, 20.0);
}

TEST(Perturb, LineVerticesStayOnLines) {
    const double line[] = {2.0 / 3.0};
    const PolyMesh snapped = snap_to_lines(build_cartesian(8, 8), line, line);
    PerturbOptions p;
    p.seed = 1;
    p.x_lines = {2.0 / 3.0};
    p.y_lines = {2.0 / 3.0};
    const PolyMesh moved = perturb_mesh(snapped, p);
    int on_x = 0;
    for (Index v = 0; v < moved.n_vertices(); ++v) {
        if (snapped.vertex(v).x() == 2.0 / 3.0) {
            EXPECT_EQ(moved.vertex(v).x(), 2.0 / 3.0);
            ++on_x;
        }
    }
    EXPECT_EQ(on_x, 9);
}

TEST(Kershaw, ZeroDistortionIsCartesian) {
    const PolyMesh k = build_kershaw(6, 6, 0.0);
    const PolyMesh c = build_cartesian(6, 6);
    ASSERT_EQ(k.n_vertices(), c.n_vertices());
    for (Index v = 0; v < k.n_vertices(); ++v) EXPECT_LT((k.vertex(v) - c.vertex(v)).norm(), 1e-15);
    EXPECT_EQ(k.cells(), c.cells());
}

TEST(Kershaw, ConvexPositivelyOrientedQuads) {
    const PolyMesh m = build_kershaw(24, 24, kKershawDistortion);
    for (Index k = 0; k < m.n_cells(); ++k) {
        const auto loop = m.cell(k);
        ASSERT_EQ(loop.size(), 4u);
        for (std::size_t i = 0; i < 4; ++i) {
            const Point a = m.vertex(loop[i]), b = m.vertex(loop[(i + 1) % 4]), c = m.vertex(loop[(i + 2) % 4]);
            const Point e = b - a, f = c - b;
            EXPECT_GT(e.x() * f.y() - e.y() * f.x(), 0.0);
        }
    }
}

TEST(Kershaw, LevelOneMeshSize) {
    const GeometryCache g = compute_geometry(build_kershaw(12, 12, kKershawDistortion));
    EXPECT_NEAR(g.h, 3.287e-1, 0.02 * 3.287e-1);
}

TEST(Kershaw, RejectsIncompatibleCounts) {
    EXPECT_THROW(build_kershaw(5, 6, 0.5), MeshError);
    EXPECT_THROW(build_kershaw(6, 4, 0.5), MeshError);
    EXPECT_THROW(build_kershaw(6, 6, 1.0), MeshError);
}

TEST(Regularity, UniformCartesian) {
    const PolyMesh m = build_cartesian(8, 8);
    const RegularityReport r = regularity(m, compute_geometry(m));
    EXPECT_NEAR(r.interior_distance_ratio, 1.0, 1e-14);
    EXPECT_NEAR(r.boundary_diameter_ratio, 2.0 * std::sqrt(2.0), 1e-13);
    EXPECT_EQ(r.max_faces_per_cell, 4.0);
    EXPECT_NEAR(r.regul, 4.0, 1e-13);
}

TEST(Regularity, EquispacedInterval) {
    const PolyMesh m = build_interval(10);
    EXPECT_NEAR(regularity(m, compute_geometry(m)).interior_distance_ratio, 1.0, 1e-13);
}

TEST(MeshIo, RoundTripIsExact) {
    for (const auto& [name, m] : mesh_zoo()) {
        std::stringstream ss;
        write_mesh(ss, m);
        const PolyMesh back = read_mesh(ss);
        EXPECT_EQ(back.vertices(), m.vertices()) << name;
        EXPECT_EQ(back.cells(), m.cells()) << name;
        ASSERT_EQ(back.n_faces(), m.n_faces()) << name;
        for (Index f = 0; f < m.n_faces(); ++f) {
            EXPECT_EQ(back.face(f).owner, m.face(f).owner) << name;
            EXPECT_EQ(back.face(f).neighbor, m.face(f).neighbor) << name;
        }
    }
}

TEST(MeshIo, TruncatedInputIsRejected) {
    std::stringstream ss("2 4 4 1\n0 0\n1 0\n");
    EXPECT_THROW(read_mesh(ss), MeshError);
}

TEST(Mesh, ClockwiseCellIsRejected) {
    EXPECT_THROW(hfv::testing::single_cell({{0, 0}, {0, 1}, {1, 1}, {1, 0}}), MeshError);
}
