#include <gtest/gtest.h>

#include <cmath>

#include "hfv/hybrid_space.hpp"
#include "hfv/rng.hpp"
#include "test_support.hpp"

using namespace hfv;
using hfv::testing::mesh_zoo;

namespace {

HybridField random_field(const PolyMesh& m, SplitMix64& rng) {
    HybridField q = HybridField::zeros(m);
    for (Index k = 0; k < m.n_cells(); ++k) q.cells[k] = rng.uniform(-1.0, 1.0);
    for (Index f = 0; f < m.n_faces(); ++f) q.faces[f] = rng.uniform(-1.0, 1.0);
    return q;
}

}  // namespace

TEST(Interpolate, PointValuesAtCentroidsAndMidpoints) {
    const PolyMesh m = build_triangular(3, 3);
    const GeometryCache g = compute_geometry(m);
    const HybridField q = interpolate(m, g, [](const Point& p) { return p.x() * p.x() + 2 * p.y(); });
    for (Index k = 0; k < m.n_cells(); ++k) {
        const Point& x = g.center(k);
        EXPECT_DOUBLE_EQ(q.cells[k], x.x() * x.x() + 2 * x.y());
    }
    for (Index f = 0; f < m.n_faces(); ++f) {
        const Point& x = g.face_midpoint[static_cast<std::size_t>(f)];
        EXPECT_DOUBLE_EQ(q.faces[f], x.x() * x.x() + 2 * x.y());
    }
}

TEST(Interpolate, NonFiniteValueIsReported) {
    const PolyMesh m = build_cartesian(2, 2);
    EXPECT_THROW(interpolate(m, compute_geometry(m), [](const Point&) { return std::nan(""); }), FieldError);
}

TEST(Gradient, AffineExactnessOnAllMeshes) {
    const Point a(0.7, -1.3);
    for (const auto& [name, m] : mesh_zoo()) {
        const GeometryCache g = compute_geometry(m);
        const Point grad = m.dim() == 1 ? Point(a.x(), 0.0) : a;
        const HybridField q = interpolate(m, g, [&](const Point& p) { return 0.4 + grad.dot(p); });
        for (const Point& c : consistent_gradient(m, g, q)) EXPECT_LT((c - grad).norm(), 1e-12) << name;
        for (const Point& s : stabilised_gradient(m, g, q)) EXPECT_LT((s - grad).norm(), 1e-12) << name;
    }
}

TEST(Gradient, ConstantFieldHasZeroGradient) {
    const PolyMesh m = build_kershaw(6, 6, 0.5);
    const GeometryCache g = compute_geometry(m);
    const HybridField q = interpolate(m, g, [](const Point&) { return 3.0; });
    for (const Point& s : stabilised_gradient(m, g, q)) EXPECT_LT(s.norm(), 1e-13);
    EXPECT_LT(norm_h1_like(m, g, q), 1e-13);
}

TEST(Stabilisation, OrthogonalToConstantsOnRandomFields) {
    SplitMix64 rng(2024);
    const auto zoo = mesh_zoo();
    for (int trial = 0; trial < 1000; ++trial) {
        const auto& [name, m] = zoo[static_cast<std::size_t>(trial) % zoo.size()];
        const GeometryCache g = compute_geometry(m);
        const HybridField q = random_field(m, rng);
        const auto cons = consistent_gradient(m, g, q);
        const auto stab = stabilisation(m, g, q, cons);
        const Index k = static_cast<Index>(rng.next() % static_cast<std::uint64_t>(m.n_cells()));
        const auto local = g.local(k);
        const auto b = static_cast<std::size_t>(g.offsets[static_cast<std::size_t>(k)]);
        Point sum = Point::Zero();
        double scale = 0.0;
        for (std::size_t s = 0; s < local.size(); ++s) {
            sum += local[s].hull * stab[b + s];
            scale += local[s].hull * stab[b + s].norm();
        }
        EXPECT_LE(sum.norm(), 1e-12 * std::max(scale, 1.0)) << name << " cell " << k;
    }
}

TEST(Gradient, LocalMatricesMatchGlobalEvaluation) {
    SplitMix64 rng(5);
    const PolyMesh m = build_kershaw(6, 6, 0.6);
    const GeometryCache g = compute_geometry(m);
    const HybridField q = random_field(m, rng);
    const auto cons = consistent_gradient(m, g, q);
    const auto full = stabilised_gradient(m, g, q);
    for (Index k = 0; k < m.n_cells(); ++k) {
        const auto local = g.local(k);
        const Eigen::VectorXd delta = local_differences(m, q, k);
        const LocalGradientMatrix G = consistent_gradient_matrix(local, g.measure(k));
        EXPECT_LT((G * delta - cons[static_cast<std::size_t>(k)]).norm(), 1e-12);
        const auto b = static_cast<std::size_t>(g.offsets[static_cast<std::size_t>(k)]);
        for (std::size_t s = 0; s < local.size(); ++s) {
            const LocalGradientMatrix B = stabilised_gradient_matrix(local, g.center(k), G, s, 2);
            EXPECT_LT((B * delta - full[b + s]).norm(), 1e-12);
        }
    }
}

TEST(Norms, L2OfConstantIsDomainMeasure) {
    const PolyMesh m = build_triangular(5, 5);
    const GeometryCache g = compute_geometry(m);
    const HybridField one = interpolate(m, g, [](const Point&) { return 1.0; });
    EXPECT_NEAR(norm_l2(m, g, one), 1.0, 1e-14);
    std::vector<Point> unit(g.cell_faces.size(), Point(1.0, 0.0));
    EXPECT_NEAR(hull_l2(g, unit), 1.0, 1e-14);
    std::vector<Point> per_cell(static_cast<std::size_t>(m.n_cells()), Point(0.0, 2.0));
    EXPECT_NEAR(cell_l2(g, per_cell), 2.0, 1e-14);
}

TEST(Norms, H1LikeByHandOnOneSquare) {
    const PolyMesh m = build_cartesian(1, 1);
    const GeometryCache g = compute_geometry(m);
    HybridField q = HybridField::zeros(m);
    q.faces[0] = 1.0;
    // |σ|/d_{K,σ} = 2 on one face: norm² = 2.
    EXPECT_NEAR(norm_h1_like(m, g, q), std::sqrt(2.0), 1e-15);
}
