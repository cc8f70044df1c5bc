#include "hfv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "hfv/rng.hpp"

namespace hfv {

namespace {

std::size_t idx(Index i) { return static_cast<std::size_t>(i); }

double signed_area(const std::vector<Point>& verts, std::span<const Index> loop) {
    // Shifted to the first vertex, like the centroid.
    const Point o = verts[idx(loop[0])];
    double a = 0.0;
    const std::size_t n = loop.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Point p = verts[idx(loop[k])] - o;
        const Point q = verts[idx(loop[(k + 1) % n])] - o;
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

Point polygon_centroid(const std::vector<Point>& verts, std::span<const Index> loop, double area) {
    // Shifted to the first vertex to limit cancellation on small cells.
    const Point o = verts[idx(loop[0])];
    Point c = Point::Zero();
    const std::size_t n = loop.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Point p = verts[idx(loop[k])] - o;
        const Point q = verts[idx(loop[(k + 1) % n])] - o;
        const double cross = p.x() * q.y() - q.x() * p.y();
        c += (p + q) * cross;
    }
    return o + c / (6.0 * area);
}

/// Cell is valid for the discretisation: positive area and star-shaped with
/// respect to its centroid (every d_{K,σ} > 0).
bool cell_is_valid(const std::vector<Point>& verts, std::span<const Index> loop) {
    const double area = signed_area(verts, loop);
    if (!(area > 0.0)) return false;
    const Point xk = polygon_centroid(verts, loop, area);
    const std::size_t n = loop.size();
    for (std::size_t k = 0; k < n; ++k) {
        const Point& p = verts[idx(loop[k])];
        const Point& q = verts[idx(loop[(k + 1) % n])];
        const Point t = q - p;
        const double len = t.norm();
        if (!(len > 0.0)) return false;
        const Point nrm(t.y() / len, -t.x() / len);
        if (!((0.5 * (p + q) - xk).dot(nrm) > 0.0)) return false;
    }
    return true;
}

}  // namespace

PolyMesh PolyMesh::from_cells(int dim, std::vector<Point> vertices,
                              std::vector<std::vector<Index>> cells) {
    if (dim != 1 && dim != 2) throw MeshError("mesh dimension must be 1 or 2");
    PolyMesh m;
    m.dim_ = dim;
    m.vertices_ = std::move(vertices);
    m.cells_ = std::move(cells);
    m.build_connectivity();
    m.validate();
    return m;
}

PolyMesh PolyMesh::from_parts(int dim, std::vector<Point> vertices, std::vector<Face> faces,
                              std::vector<std::vector<Index>> cells) {
    PolyMesh m = from_cells(dim, std::move(vertices), std::move(cells));
    if (faces.size() != m.faces_.size()) {
        throw MeshError("face list does not match the cells: expected " +
                        std::to_string(m.faces_.size()) + " faces, got " +
                        std::to_string(faces.size()));
    }
    // Accept the given face numbering if it describes the same faces.
    std::map<std::pair<Index, Index>, Index> lookup;
    for (Index f = 0; f < m.n_faces(); ++f) {
        const Face& fc = m.faces_[idx(f)];
        lookup[{std::min(fc.v0, fc.v1), std::max(fc.v0, fc.v1)}] = f;
    }
    std::vector<Index> renumber(faces.size(), -1);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const Face& given = faces[f];
        auto it = lookup.find({std::min(given.v0, given.v1), std::max(given.v0, given.v1)});
        if (it == lookup.end()) throw MeshError("face " + std::to_string(f) + " is not a cell edge");
        const Face& built = m.faces_[idx(it->second)];
        const bool same_cells = (given.owner == built.owner && given.neighbor == built.neighbor) ||
                                (given.owner == built.neighbor && given.neighbor == built.owner);
        if (!same_cells) {
            throw MeshError("face " + std::to_string(f) + " has inconsistent owner/neighbor");
        }
        if (renumber[idx(it->second)] >= 0) throw MeshError("face " + std::to_string(f) + " is listed twice");
        renumber[idx(it->second)] = static_cast<Index>(f);
    }
    std::vector<Face> ordered(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        // Orientation stays as built: owner is the cell whose loop runs v0 -> v1.
        ordered[idx(renumber[f])] = m.faces_[f];
    }
    for (auto& cf : m.cell_faces_) {
        for (auto& f : cf) f = renumber[idx(f)];
    }
    m.faces_ = std::move(ordered);
    return m;
}

void PolyMesh::build_connectivity() {
    faces_.clear();
    cell_faces_.assign(cells_.size(), {});
    std::map<std::pair<Index, Index>, Index> edge_to_face;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
        const auto& loop = cells_[k];
        const Index cell = static_cast<Index>(k);
        for (Index v : loop) {
            if (v < 0 || v >= n_vertices()) {
                throw MeshError("cell " + std::to_string(k) + " references vertex " +
                                std::to_string(v) + " out of range");
            }
        }
        if (dim_ == 1) {
            if (loop.size() != 2) throw MeshError("1D cell " + std::to_string(k) + " needs 2 vertices");
        } else if (loop.size() < 3) {
            throw MeshError("cell " + std::to_string(k) + " has fewer than 3 vertices");
        }
        const std::size_t nloc = loop.size();
        for (std::size_t j = 0; j < nloc; ++j) {
            Index a = loop[j];
            Index b = dim_ == 1 ? -1 : loop[(j + 1) % nloc];
            std::pair<Index, Index> key = dim_ == 1 ? std::pair<Index, Index>{a, -1}
                                                    : std::pair<Index, Index>{std::min(a, b), std::max(a, b)};
            auto [it, inserted] = edge_to_face.try_emplace(key, static_cast<Index>(faces_.size()));
            if (inserted) {
                faces_.push_back(Face{a, b, cell, -1});
            } else {
                Face& f = faces_[idx(it->second)];
                if (f.neighbor >= 0 || f.owner == cell) {
                    throw MeshError("face shared by more than two cells near cell " + std::to_string(k));
                }
                f.neighbor = cell;
            }
            cell_faces_[k].push_back(it->second);
        }
    }
    n_boundary_faces_ = static_cast<Index>(
        std::count_if(faces_.begin(), faces_.end(), [](const Face& f) { return f.is_boundary(); }));
}

void PolyMesh::validate() const {
    for (Index k = 0; k < n_cells(); ++k) {
        const auto loop = cell(k);
        if (dim_ == 1) {
            if (!(vertex(loop[1]).x() > vertex(loop[0]).x())) {
                throw MeshError("cell " + std::to_string(k) + " has non-positive length");
            }
        } else if (!(signed_area(vertices_, loop) > 0.0)) {
            throw MeshError("cell " + std::to_string(k) + " has non-positive area (orientation must be CCW)");
        }
    }
}

Index PolyMesh::other_cell(Index f, Index k) const {
    const Face& fc = face(f);
    return fc.owner == k ? fc.neighbor : fc.owner;
}

std::vector<bool> PolyMesh::boundary_vertices() const {
    std::vector<bool> on(vertices_.size(), false);
    for (const Face& f : faces_) {
        if (!f.is_boundary()) continue;
        on[idx(f.v0)] = true;
        if (f.v1 >= 0) on[idx(f.v1)] = true;
    }
    return on;
}

PolyMesh PolyMesh::with_vertices(std::vector<Point> vertices) const {
    if (vertices.size() != vertices_.size()) throw MeshError("vertex count mismatch");
    PolyMesh m = *this;
    m.vertices_ = std::move(vertices);
    m.validate();
    return m;
}

PolyMesh build_interval(Index n, Interval domain) {
    if (n <= 0) throw MeshError("interval mesh needs at least one cell");
    if (!(domain.b > domain.a)) throw MeshError("degenerate interval");
    std::vector<Point> verts;
    verts.reserve(idx(n + 1));
    for (Index i = 0; i <= n; ++i) {
        verts.emplace_back(domain.a + (domain.b - domain.a) * static_cast<double>(i) / static_cast<double>(n), 0.0);
    }
    std::vector<std::vector<Index>> cells;
    cells.reserve(idx(n));
    for (Index i = 0; i < n; ++i) cells.push_back({i, i + 1});
    return PolyMesh::from_cells(1, std::move(verts), std::move(cells));
}

namespace {

void check_grid(Index nx, Index ny, const Rectangle& d) {
    if (nx < 1 || ny < 1) throw MeshError("grid counts must be positive");
    if (!(d.x1 > d.x0) || !(d.y1 > d.y0)) throw MeshError("degenerate rectangle");
}

std::vector<Point> grid_vertices(Index nx, Index ny, const Rectangle& d) {
    std::vector<Point> verts;
    verts.reserve(idx((nx + 1) * (ny + 1)));
    for (Index j = 0; j <= ny; ++j) {
        for (Index i = 0; i <= nx; ++i) {
            verts.emplace_back(d.x0 + (d.x1 - d.x0) * static_cast<double>(i) / static_cast<double>(nx),
                               d.y0 + (d.y1 - d.y0) * static_cast<double>(j) / static_cast<double>(ny));
        }
    }
    return verts;
}

}  // namespace

PolyMesh build_cartesian(Index nx, Index ny, Rectangle domain) {
    check_grid(nx, ny, domain);
    auto vid = [nx](Index i, Index j) { return j * (nx + 1) + i; };
    std::vector<std::vector<Index>> cells;
    cells.reserve(idx(nx * ny));
    for (Index j = 0; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
            cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    return PolyMesh::from_cells(2, grid_vertices(nx, ny, domain), std::move(cells));
}

PolyMesh build_triangular(Index nx, Index ny, Rectangle domain) {
    check_grid(nx, ny, domain);
    auto vid = [nx](Index i, Index j) { return j * (nx + 1) + i; };
    std::vector<std::vector<Index>> cells;
    cells.reserve(idx(2 * nx * ny));
    for (Index j = 0; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
            const Index a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            if ((i + j) % 2 == 0) {
                // diagonal a-c
                cells.push_back({a, b, c});
                cells.push_back({a, c, d});
            } else {
                // diagonal b-d
                cells.push_back({a, b, d});
                cells.push_back({b, c, d});
            }
        }
    }
    return PolyMesh::from_cells(2, grid_vertices(nx, ny, domain), std::move(cells));
}

PolyMesh build_kershaw(Index nx, Index ny, double distortion) {
    if (nx < 2 || ny < 3 || nx % 2 != 0 || ny % 3 != 0) {
        throw MeshError("Kershaw mesh needs an even nx and ny divisible by 3");
    }
    if (!(distortion >= 0.0 && distortion < 1.0)) throw MeshError("Kershaw distortion must be in [0, 1)");
    std::vector<Point> verts;
    verts.reserve(idx((nx + 1) * (ny + 1)));
    const Index half = nx / 2;
    for (Index j = 0; j <= ny; ++j) {
        const double eta = static_cast<double>(j) / static_cast<double>(ny);
        double mid;
        if (3 * j <= ny) {
            mid = 0.5 * (1.0 - distortion);
        } else if (3 * j >= 2 * ny) {
            mid = 0.5 * (1.0 + distortion);
        } else {
            mid = 0.5 * (1.0 - distortion) + distortion * (3.0 * eta - 1.0);
        }
        for (Index i = 0; i <= nx; ++i) {
            double x;
            if (distortion == 0.0) {
                x = static_cast<double>(i) / static_cast<double>(nx);
            } else if (i <= half) {
                x = mid * static_cast<double>(i) / static_cast<double>(half);
            } else {
                x = mid + (1.0 - mid) * static_cast<double>(i - half) / static_cast<double>(nx - half);
            }
            verts.emplace_back(x, eta);
        }
    }
    auto vid = [nx](Index i, Index j) { return j * (nx + 1) + i; };
    std::vector<std::vector<Index>> cells;
    cells.reserve(idx(nx * ny));
    for (Index j = 0; j < ny; ++j) {
        for (Index i = 0; i < nx; ++i) {
            cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    return PolyMesh::from_cells(2, std::move(verts), std::move(cells));
}

PolyMesh snap_to_lines(const PolyMesh& mesh, std::span<const double> x_lines,
                       std::span<const double> y_lines) {
    std::vector<Point> verts = mesh.vertices();
    auto snap = [&verts](double line, int axis) {
        double best = std::numeric_limits<double>::infinity();
        double target = 0.0;
        for (const Point& p : verts) {
            const double dist = std::abs(p[axis] - line);
            if (dist < best) {
                best = dist;
                target = p[axis];
            }
        }
        for (Point& p : verts) {
            if (std::abs(p[axis] - target) <= 1e-12) p[axis] = line;
        }
    };
    for (double x : x_lines) snap(x, 0);
    for (double y : y_lines) snap(y, 1);
    return mesh.with_vertices(std::move(verts));
}

PolyMesh perturb_mesh(const PolyMesh& mesh, const PerturbOptions& options) {
    if (mesh.dim() != 2) throw MeshError("perturbation is defined for 2D meshes");
    if (options.factor < 0.0) throw MeshError("perturbation factor must be non-negative");
    const double h = compute_geometry(mesh).h;
    std::vector<Point> verts = mesh.vertices();
    if (options.factor == 0.0) return mesh.with_vertices(std::move(verts));

    std::vector<std::vector<Index>> vertex_cells(verts.size());
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        for (Index v : mesh.cell(k)) vertex_cells[idx(v)].push_back(k);
    }
    const std::vector<bool> on_boundary = mesh.boundary_vertices();
    auto on_line = [](double c, const std::vector<double>& lines) {
        return std::any_of(lines.begin(), lines.end(), [c](double l) { return std::abs(c - l) <= 1e-12; });
    };
    auto incident_valid = [&](std::size_t v) {
        return std::all_of(vertex_cells[v].begin(), vertex_cells[v].end(),
                           [&](Index k) { return cell_is_valid(verts, mesh.cell(k)); });
    };

    SplitMix64 rng(options.seed);
    const double amp = options.factor * h;
    for (std::size_t v = 0; v < verts.size(); ++v) {
        if (on_boundary[v]) continue;
        const Point origin = verts[v];
        const bool fix_x = on_line(origin.x(), options.x_lines);
        const bool fix_y = on_line(origin.y(), options.y_lines);
        bool placed = false;
        Point shift = Point::Zero();
        for (int attempt = 0; attempt <= options.max_retries && !placed; ++attempt) {
            const double bx = rng.uniform(-0.5, 0.5);
            const double by = rng.uniform(-0.5, 0.5);
            shift = Point(fix_x ? 0.0 : amp * bx, fix_y ? 0.0 : amp * by);
            verts[v] = origin + shift;
            placed = incident_valid(v);
        }
        // Clamp the last draw toward zero; the unperturbed position is valid.
        for (int halving = 0; halving < 8 && !placed; ++halving) {
            shift *= 0.5;
            verts[v] = origin + shift;
            placed = incident_valid(v);
        }
        if (!placed) {
            verts[v] = origin;
            if (!incident_valid(v)) {
                throw MeshError("perturbation failed: cells around vertex " + std::to_string(v) +
                                " are invalid even without displacement");
            }
        }
    }
    return mesh.with_vertices(std::move(verts));
}

GeometryCache compute_geometry(const PolyMesh& mesh) {
    GeometryCache g;
    g.dim = mesh.dim();
    const Index nk = mesh.n_cells();
    const Index nf = mesh.n_faces();
    g.cell_measure.resize(idx(nk));
    g.centroid.resize(idx(nk));
    g.diameter.resize(idx(nk));
    g.face_measure.resize(idx(nf));
    g.face_midpoint.resize(idx(nf));
    g.offsets.resize(idx(nk) + 1, 0);
    for (Index k = 0; k < nk; ++k) {
        g.offsets[idx(k) + 1] = g.offsets[idx(k)] + static_cast<Index>(mesh.cell_faces(k).size());
    }
    g.cell_faces.resize(idx(g.offsets.back()));

    const auto& verts = mesh.vertices();
    for (Index f = 0; f < nf; ++f) {
        const Face& fc = mesh.face(f);
        if (mesh.dim() == 1) {
            g.face_measure[idx(f)] = 1.0;
            g.face_midpoint[idx(f)] = verts[idx(fc.v0)];
        } else {
            const double len = (verts[idx(fc.v1)] - verts[idx(fc.v0)]).norm();
            if (!(len > 0.0)) throw MeshError("face " + std::to_string(f) + " has zero length");
            g.face_measure[idx(f)] = len;
            g.face_midpoint[idx(f)] = 0.5 * (verts[idx(fc.v0)] + verts[idx(fc.v1)]);
        }
    }

    for (Index k = 0; k < nk; ++k) {
        const auto loop = mesh.cell(k);
        const auto faces = mesh.cell_faces(k);
        CellFace* local = g.cell_faces.data() + g.offsets[idx(k)];
        if (mesh.dim() == 1) {
            const double a = verts[idx(loop[0])].x();
            const double b = verts[idx(loop[1])].x();
            g.cell_measure[idx(k)] = b - a;
            g.centroid[idx(k)] = Point(0.5 * (a + b), 0.0);
            g.diameter[idx(k)] = b - a;
            const double half = 0.5 * (b - a);
            local[0] = CellFace{faces[0], 1.0, Point(a, 0.0), Point(-1.0, 0.0), half, half};
            local[1] = CellFace{faces[1], 1.0, Point(b, 0.0), Point(1.0, 0.0), half, half};
            if (!(half > 0.0)) throw MeshError("cell " + std::to_string(k) + " has zero length");
        } else {
            const double area = signed_area(verts, loop);
            if (!(area > 0.0)) throw MeshError("cell " + std::to_string(k) + " has non-positive area");
            const Point xk = polygon_centroid(verts, loop, area);
            double diam = 0.0;
            for (std::size_t a = 0; a < loop.size(); ++a) {
                for (std::size_t b = a + 1; b < loop.size(); ++b) {
                    diam = std::max(diam, (verts[idx(loop[a])] - verts[idx(loop[b])]).norm());
                }
            }
            g.cell_measure[idx(k)] = area;
            g.centroid[idx(k)] = xk;
            g.diameter[idx(k)] = diam;
            const std::size_t n = loop.size();
            for (std::size_t j = 0; j < n; ++j) {
                const Point& p = verts[idx(loop[j])];
                const Point& q = verts[idx(loop[(j + 1) % n])];
                const Point t = q - p;
                const double len = g.face_measure[idx(faces[j])];
                const Point nrm = Point(t.y(), -t.x()) / t.norm();
                const Point& xs = g.face_midpoint[idx(faces[j])];
                const double dist = (xs - xk).dot(nrm);
                if (!(dist > 0.0)) {
                    throw MeshError("cell " + std::to_string(k) +
                                    " is not star-shaped with respect to its centroid");
                }
                local[j] = CellFace{faces[j], len, xs, nrm, dist, len * dist / 2.0};
            }
        }
        g.h = std::max(g.h, g.diameter[idx(k)]);
    }
    return g;
}

RegularityReport regularity(const PolyMesh& mesh, const GeometryCache& geom) {
    RegularityReport r;
    std::vector<double> dist_owner(idx(mesh.n_faces()), 0.0);
    std::vector<double> dist_neighbor(idx(mesh.n_faces()), 0.0);
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        const auto local = geom.local(k);
        r.max_faces_per_cell = std::max(r.max_faces_per_cell, static_cast<double>(local.size()));
        for (const CellFace& cf : local) {
            const Face& f = mesh.face(cf.face);
            if (f.owner == k) {
                dist_owner[idx(cf.face)] = cf.distance;
            } else {
                dist_neighbor[idx(cf.face)] = cf.distance;
            }
            if (f.is_boundary()) {
                r.boundary_diameter_ratio =
                    std::max(r.boundary_diameter_ratio, geom.diameter[idx(k)] / cf.distance);
            }
        }
    }
    for (Index f = 0; f < mesh.n_faces(); ++f) {
        if (mesh.face(f).is_boundary()) continue;
        const double a = dist_owner[idx(f)];
        const double b = dist_neighbor[idx(f)];
        r.interior_distance_ratio = std::max({r.interior_distance_ratio, a / b, b / a});
    }
    r.regul = std::max({r.interior_distance_ratio, r.boundary_diameter_ratio, r.max_faces_per_cell});
    return r;
}

void write_mesh(std::ostream& out, const PolyMesh& mesh) {
    out << mesh.dim() << ' ' << mesh.n_vertices() << ' ' << mesh.n_faces() << ' ' << mesh.n_cells() << '\n';
    out << std::setprecision(17);
    for (const Point& p : mesh.vertices()) {
        if (mesh.dim() == 1) {
            out << p.x() << '\n';
        } else {
            out << p.x() << ' ' << p.y() << '\n';
        }
    }
    for (const Face& f : mesh.faces()) {
        out << f.v0 << ' ' << f.v1 << ' ' << f.owner << ' ' << f.neighbor << '\n';
    }
    for (Index k = 0; k < mesh.n_cells(); ++k) {
        const auto loop = mesh.cell(k);
        out << loop.size();
        for (Index v : loop) out << ' ' << v;
        out << '\n';
    }
}

PolyMesh read_mesh(std::istream& in) {
    int dim = 0;
    Index nv = 0, ne = 0, nk = 0;
    if (!(in >> dim >> nv >> ne >> nk)) throw MeshError("mesh file: bad header");
    if ((dim != 1 && dim != 2) || nv < 0 || ne < 0 || nk < 0) throw MeshError("mesh file: bad header values");
    std::vector<Point> verts(idx(nv), Point::Zero());
    for (auto& p : verts) {
        if (!(in >> p.x())) throw MeshError("mesh file: truncated vertex list");
        if (dim == 2 && !(in >> p.y())) throw MeshError("mesh file: truncated vertex list");
    }
    std::vector<Face> faces(idx(ne));
    for (auto& f : faces) {
        if (!(in >> f.v0 >> f.v1 >> f.owner >> f.neighbor)) throw MeshError("mesh file: truncated face list");
    }
    std::vector<std::vector<Index>> cells(idx(nk));
    for (auto& c : cells) {
        std::size_t count = 0;
        if (!(in >> count)) throw MeshError("mesh file: truncated cell list");
        c.resize(count);
        for (auto& v : c) {
            if (!(in >> v)) throw MeshError("mesh file: truncated cell list");
        }
    }
    return PolyMesh::from_parts(dim, std::move(verts), std::move(faces), std::move(cells));
}

}  // namespace hfv
