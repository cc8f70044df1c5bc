#include "hfv/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hfv {

namespace {
std::size_t idx(Index i) { return static_cast<std::size_t>(i); }
constexpr double kPi = std::numbers::pi;
}  // namespace

ProblemSpec problem_eps_1d(double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilon must be positive");
    ProblemSpec p;
    p.name = "eps1d";
    p.dim = 1;
    p.domain = Rectangle{0.0, 1.0, 0.0, 0.0};
    p.diffusion = [eps](const Point&) -> Tensor { return eps * Tensor::Identity(); };
    p.velocity = [](const Point&) { return Point(1.0, 0.0); };
    p.source = [](const Point&) { return 0.0; };
    const double denom = std::expm1(-1.0 / eps);
    auto value = [eps, denom](const Point& x) { return std::expm1((x.x() - 1.0) / eps) / denom; };
    p.boundary = value;
    p.exact = ExactSolution{value, [eps, denom](const Point& x) {
                                return Point(std::exp((x.x() - 1.0) / eps) / (eps * denom), 0.0);
                            }};
    p.bounds = std::pair{0.0, 1.0};
    return p;
}

ProblemSpec problem_smooth_2d() {
    ProblemSpec p;
    p.name = "smooth";
    Tensor lambda;
    lambda << 1.5e-4, 1e-6, 1e-6, 1e-8;
    const Point vel(1.0, 2.0);
    p.diffusion = [lambda](const Point&) { return lambda; };
    p.velocity = [vel](const Point&) { return vel; };
    auto value = [](const Point& x) { return std::sin(kPi * x.x()) * std::sin(kPi * x.y()); };
    auto grad = [](const Point& x) {
        return Point(kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()),
                     kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
    };
    // f = -Λ:∇²c + V·∇c  (div V = 0)
    p.source = [lambda, vel, value, grad](const Point& x) {
        const double c = value(x);
        const double cxy = kPi * kPi * std::cos(kPi * x.x()) * std::cos(kPi * x.y());
        const double cxx = -kPi * kPi * c;
        const double cyy = -kPi * kPi * c;
        const double diffusion = lambda(0, 0) * cxx + 2.0 * lambda(0, 1) * cxy + lambda(1, 1) * cyy;
        return -diffusion + vel.dot(grad(x));
    };
    p.boundary = value;
    p.exact = ExactSolution{value, grad};
    p.bounds = std::pair{0.0, 1.0};
    return p;
}

ProblemSpec problem_boundary_layer_2d(double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    ProblemSpec p;
    p.name = "boundary_layer";
    const Point vel(2.0, 3.0);
    p.diffusion = [nu](const Point&) -> Tensor { return nu * Tensor::Identity(); };
    p.velocity = [vel](const Point&) { return vel; };
    // c = X(x) Y(y)
    auto ex = [nu](double x) { return std::exp(2.0 * (x - 1.0) / nu); };
    auto ey = [nu](double y) { return std::exp(3.0 * (y - 1.0) / nu); };
    auto value = [ex, ey](const Point& x) { return (x.x() - ex(x.x())) * (x.y() * x.y() - ey(x.y())); };
    auto grad = [nu, ex, ey](const Point& x) {
        const double X = x.x() - ex(x.x());
        const double Y = x.y() * x.y() - ey(x.y());
        const double dX = 1.0 - 2.0 / nu * ex(x.x());
        const double dY = 2.0 * x.y() - 3.0 / nu * ey(x.y());
        return Point(dX * Y, X * dY);
    };
    p.source = [nu, vel, ex, ey](const Point& x) {
        const double X = x.x() - ex(x.x());
        const double Y = x.y() * x.y() - ey(x.y());
        const double dX = 1.0 - 2.0 / nu * ex(x.x());
        const double dY = 2.0 * x.y() - 3.0 / nu * ey(x.y());
        const double ddX = -4.0 / (nu * nu) * ex(x.x());
        const double ddY = 2.0 - 9.0 / (nu * nu) * ey(x.y());
        return -nu * (ddX * Y + X * ddY) + vel.x() * dX * Y + vel.y() * X * dY;
    };
    p.boundary = value;
    p.exact = ExactSolution{value, grad};
    p.subdomain = [](const Point& x) { return x.x() <= 0.8 && x.y() <= 0.8; };
    p.bounds = std::pair{0.0, 1.0};
    return p;
}

ProblemSpec problem_hetero_rotation() {
    ProblemSpec p;
    p.name = "hetero";
    constexpr double cut = 2.0 / 3.0;
    p.diffusion = [](const Point& x) -> Tensor {
        const bool left = x.x() < cut;
        const bool bottom = x.y() < cut;
        Tensor t = Tensor::Zero();
        if (left == bottom) {
            t(0, 0) = 1e-6;
            t(1, 1) = 1.0;
        } else {
            t(0, 0) = 1.0;
            t(1, 1) = 1e-6;
        }
        return t;
    };
    p.velocity = [](const Point& x) {
        return Point(40.0 * x.x() * (2.0 * x.y() - 1.0) * (x.x() - 1.0),
                     -40.0 * x.y() * (2.0 * x.x() - 1.0) * (x.y() - 1.0));
    };
    p.source = [](const Point& x) {
        const double r = (x - Point(0.5, 0.5)).norm();
        return 1e-2 * std::exp(-(r - 0.35) * (r - 0.35) / 0.005);
    };
    p.boundary = [](const Point&) { return 0.0; };
    p.x_interfaces = {cut};
    p.y_interfaces = {cut};
    return p;
}

Index misaligned_cells(const PolyMesh& mesh, const ProblemSpec& problem) {
    Index count = 0;
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        auto straddles = [&](double line, int axis) {
            bool below = false, above = false;
            for (Index v : mesh.cell(k)) {
                const double c = mesh.vertex(v)[axis];
                below = below || c < line - 1e-12;
                above = above || c > line + 1e-12;
            }
            return below && above;
        };
        bool bad = false;
        for (double x : problem.x_interfaces) bad = bad || straddles(x, 0);
        for (double y : problem.y_interfaces) bad = bad || straddles(y, 1);
        if (bad) ++count;
    }
    return count;
}

namespace {

/// Calls fn(point, weight) for the degree-2 rule on each hull of cell k
/// (2-point Gauss on each half cell in 1D). Weights sum to |D_{K,σ}| per hull.
template <class Fn>
void for_each_hull_point(const PolyMesh& mesh, const GeometryCache& geom, Index k, Fn&& fn) {
    const Point& xk = geom.center(k);
    std::size_t pos = idx(geom.offsets[idx(k)]);
    for (const CellFace& cf : geom.local(k)) {
        if (mesh.dim() == 1) {
            const Point mid = 0.5 * (xk + cf.midpoint);
            const Point half = 0.5 * (cf.midpoint - xk);
            constexpr double g = 0.57735026918962576451;  // 1/√3
            fn(pos, Point(mid + g * half), 0.5 * cf.hull);
            fn(pos, Point(mid - g * half), 0.5 * cf.hull);
        } else {
            const Face& f = mesh.face(cf.face);
            const Point& a = mesh.vertex(f.v0);
            const Point& b = mesh.vertex(f.v1);
            const double w = cf.hull / 3.0;
            fn(pos, Point((4.0 * xk + a + b) / 6.0), w);
            fn(pos, Point((xk + 4.0 * a + b) / 6.0), w);
            fn(pos, Point((xk + a + 4.0 * b) / 6.0), w);
        }
        ++pos;
    }
}

}  // namespace

double cell_average(const PolyMesh& mesh, const GeometryCache& geom, Index k, const ScalarField& f) {
    double sum = 0.0;
    for_each_hull_point(mesh, geom, k, [&](std::size_t, const Point& x, double w) { sum += w * f(x); });
    return sum / geom.measure(k);
}

Point cell_average_gradient(const PolyMesh& mesh, const GeometryCache& geom, Index k, const ScalarField& c) {
    constexpr double off = 0.38729833462074168852;  // √(3/5) / 2
    Point sum = Point::Zero();
    for (const CellFace& cf : geom.local(k)) {
        double avg;
        if (mesh.dim() == 1) {
            avg = c(cf.midpoint);
        } else {
            const Face& f = mesh.face(cf.face);
            const Point t = mesh.vertex(f.v1) - mesh.vertex(f.v0);
            avg = (5.0 * c(cf.midpoint - off * t) + 8.0 * c(cf.midpoint) + 5.0 * c(cf.midpoint + off * t)) / 18.0;
        }
        sum += cf.measure * avg * cf.normal;
    }
    return sum / geom.measure(k);
}

ErrorReport error_metrics(const PolyMesh& mesh, const GeometryCache& geom, const HybridField& solution,
                          std::span<const Point> gradient, const ProblemSpec& problem, ErrorNorm norm) {
    ErrorReport r;
    r.h = geom.h;
    r.n_cells = mesh.n_cells();
    r.n_faces = mesh.n_faces();
    r.max_value = solution.cells.maxCoeff();
    r.min_value = solution.cells.minCoeff();
    if (problem.bounds) {
        const auto o = overshoot(solution.cells, problem.bounds->first, problem.bounds->second);
        r.overshoot = o.over_fraction;
        r.undershoot = o.under_fraction;
    }
    if (!problem.exact) return r;
    const auto& exact = *problem.exact;
    if (gradient.size() != geom.cell_faces.size()) throw std::invalid_argument("gradient must be given per hull");

    double err_c = 0.0, err_g = 0.0, ref_c = 0.0, ref_g = 0.0;
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        if (problem.subdomain && !problem.subdomain(geom.center(k))) continue;
        const double ck = solution.cells[k];
        if (norm == ErrorNorm::Quadrature) {
            for_each_hull_point(mesh, geom, k, [&](std::size_t pos, const Point& x, double w) {
                const double c = exact.value(x);
                const Point g = exact.gradient(x);
                err_c += w * (ck - c) * (ck - c);
                err_g += w * (gradient[pos] - g).squaredNorm();
                ref_c += w * c * c;
                ref_g += w * g.squaredNorm();
            });
            continue;
        }
        double c;
        Point g;
        if (norm == ErrorNorm::CellAverage) {
            c = cell_average(mesh, geom, k, exact.value);
            g = cell_average_gradient(mesh, geom, k, exact.value);
        } else {
            c = exact.value(geom.center(k));
            g = exact.gradient(geom.center(k));
        }
        // Reference norms use the same cellwise values as the errors.
        err_c += geom.measure(k) * (ck - c) * (ck - c);
        ref_c += geom.measure(k) * c * c;
        ref_g += geom.measure(k) * g.squaredNorm();
        std::size_t pos = idx(geom.offsets[idx(k)]);
        for (const CellFace& cf : geom.local(k)) err_g += cf.hull * (gradient[pos++] - g).squaredNorm();
    }
    const double norm_c = std::sqrt(ref_c);
    const double norm_h1 = norm_c + std::sqrt(ref_g);
    r.E_c = norm_c > 0.0 ? std::sqrt(err_c) / norm_c : std::sqrt(err_c);
    r.E_g = norm_h1 > 0.0 ? std::sqrt(err_g) / norm_h1 : std::sqrt(err_g);
    return r;
}

Overshoot overshoot(const Eigen::VectorXd& cell_values, double lower, double upper) {
    if (!(upper > lower)) throw std::invalid_argument("overshoot bounds must satisfy lower < upper");
    Overshoot o;
    if (cell_values.size() == 0) return o;
    o.over = std::max(0.0, cell_values.maxCoeff() - upper);
    o.under = std::max(0.0, lower - cell_values.minCoeff());
    o.over_fraction = o.over / (upper - lower);
    o.under_fraction = o.under / (upper - lower);
    return o;
}

std::vector<std::optional<double>> observed_order(std::span<const double> errors, std::span<const double> hs) {
    if (errors.size() != hs.size() || errors.size() < 2) {
        throw std::invalid_argument("observed_order needs matching lists of length >= 2");
    }
    std::vector<std::optional<double>> rates;
    for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
        if (!(hs[i] > hs[i + 1]) || !(hs[i + 1] > 0.0)) {
            throw std::invalid_argument("mesh sizes must be positive and strictly decreasing");
        }
        if (!(errors[i] > 0.0) || !(errors[i + 1] > 0.0)) {
            rates.emplace_back(std::nullopt);
        } else {
            rates.emplace_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
        }
    }
    return rates;
}

}  // namespace hfv
