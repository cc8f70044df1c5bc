#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hfv {

using Index = std::int64_t;
using Point = Eigen::Vector2d;

/// Raised for invalid input or a mesh that violates its structural invariants.
class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Face {
    Index v0 = -1;
    Index v1 = -1;         ///< -1 in 1D, where a face is a single vertex
    Index owner = -1;
    Index neighbor = -1;   ///< -1 on the boundary

    bool is_boundary() const { return neighbor < 0; }
};

/// Conforming 1D interval mesh or 2D polygonal mesh.
///
/// Cells are vertex loops (counter-clockwise in 2D, [left, right] in 1D). The
/// faces of cell K are listed in `cell_faces(K)` in loop order: local face k
/// joins loop vertices k and k+1.
class PolyMesh {
public:
    PolyMesh() = default;

    /// Builds faces and connectivity from the cell loops and validates the result.
    static PolyMesh from_cells(int dim, std::vector<Point> vertices,
                               std::vector<std::vector<Index>> cells);

    /// Builds a mesh whose face list is given explicitly (file input); the face
    /// list is checked against the cell loops.
    static PolyMesh from_parts(int dim, std::vector<Point> vertices, std::vector<Face> faces,
                               std::vector<std::vector<Index>> cells);

    int dim() const { return dim_; }
    Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
    Index n_cells() const { return static_cast<Index>(cells_.size()); }
    Index n_faces() const { return static_cast<Index>(faces_.size()); }
    Index n_boundary_faces() const { return n_boundary_faces_; }

    const std::vector<Point>& vertices() const { return vertices_; }
    const Point& vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }
    std::span<const Index> cell(Index k) const { return cells_[static_cast<std::size_t>(k)]; }
    std::span<const Index> cell_faces(Index k) const { return cell_faces_[static_cast<std::size_t>(k)]; }
    const Face& face(Index f) const { return faces_[static_cast<std::size_t>(f)]; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<std::vector<Index>>& cells() const { return cells_; }

    /// Cell across face f from cell k, or -1.
    Index other_cell(Index f, Index k) const;

    /// True for vertices lying on at least one boundary face.
    std::vector<bool> boundary_vertices() const;

    /// Copy with vertex coordinates replaced; topology is kept.
    PolyMesh with_vertices(std::vector<Point> vertices) const;

private:
    void build_connectivity();
    void validate() const;

    int dim_ = 2;
    std::vector<Point> vertices_;
    std::vector<std::vector<Index>> cells_;
    std::vector<Face> faces_;
    std::vector<std::vector<Index>> cell_faces_;
    Index n_boundary_faces_ = 0;
};

struct Rectangle {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
};

struct Interval {
    double a = 0.0, b = 1.0;
};

/// Local (cell, face) geometric data.
struct CellFace {
    Index face = -1;
    double measure = 0.0;   ///< |σ|
    Point midpoint;         ///< x_σ
    Point normal;           ///< unit outward normal n_{K,σ}
    double distance = 0.0;  ///< d_{K,σ}
    double hull = 0.0;      ///< |D_{K,σ}|
};

struct GeometryCache {
    int dim = 2;
    std::vector<double> cell_measure;
    std::vector<Point> centroid;
    std::vector<double> diameter;
    std::vector<double> face_measure;
    std::vector<Point> face_midpoint;
    std::vector<Index> offsets;        ///< local faces of cell K: [offsets[K], offsets[K+1])
    std::vector<CellFace> cell_faces;
    double h = 0.0;

    std::span<const CellFace> local(Index k) const {
        const auto b = static_cast<std::size_t>(offsets[static_cast<std::size_t>(k)]);
        const auto e = static_cast<std::size_t>(offsets[static_cast<std::size_t>(k) + 1]);
        return {cell_faces.data() + b, e - b};
    }
    double measure(Index k) const { return cell_measure[static_cast<std::size_t>(k)]; }
    const Point& center(Index k) const { return centroid[static_cast<std::size_t>(k)]; }
};

struct RegularityReport {
    double interior_distance_ratio = 1.0;   ///< max d_{K,σ}/d_{K',σ}
    double boundary_diameter_ratio = 1.0;   ///< max diam(K)/d_{K,σ} on boundary faces
    double max_faces_per_cell = 0.0;
    double regul = 1.0;
};

PolyMesh build_interval(Index n, Interval domain = {});
PolyMesh build_cartesian(Index nx, Index ny, Rectangle domain = {});

/// Cartesian grid with each square split by one diagonal, orientation alternating
/// in a checkerboard pattern.
PolyMesh build_triangular(Index nx, Index ny, Rectangle domain = {});

/// Logically rectangular Kershaw-type quadrilateral mesh on the unit square.
///
/// The vertical grid lines follow a Z pattern: in the bottom third of the domain
/// the middle column line sits at x = (1 - distortion)/2, in the top third at
/// x = (1 + distortion)/2, with a linear transition through the middle third.
/// Columns on either side of the middle line are spaced uniformly. Requires an
/// even `nx`, `ny` divisible by 3, and distortion in [0, 1).
PolyMesh build_kershaw(Index nx, Index ny, double distortion);

/// Distortion giving h ≈ 0.327 on the 12 x 12 level-1 Kershaw mesh.
inline constexpr double kKershawDistortion = 0.8;

/// Moves the vertex rows/columns closest to the given lines onto them.
/// Vertices are snapped per grid line, so lines must be interior to the domain.
PolyMesh snap_to_lines(const PolyMesh& mesh, std::span<const double> x_lines,
                       std::span<const double> y_lines);

struct PerturbOptions {
    double factor = 0.4;
    std::uint64_t seed = 0;
    int max_retries = 16;
    /// Vertices on these lines only move along them (coefficient interfaces).
    std::vector<double> x_lines;
    std::vector<double> y_lines;
};

/// Random perturbation of interior vertices: x += factor * β * h with β uniform on
/// [-0.5, 0.5] per coordinate, h the mesh size of the input.
PolyMesh perturb_mesh(const PolyMesh& mesh, const PerturbOptions& options);

GeometryCache compute_geometry(const PolyMesh& mesh);
RegularityReport regularity(const PolyMesh& mesh, const GeometryCache& geom);

/// Plain-text mesh format: `dim nv ne nk`, vertices, faces (`v0 v1 owner neighbor|-1`),
/// cells (`count v...`). All indices 0-based; reals with 17 significant digits.
void write_mesh(std::ostream& out, const PolyMesh& mesh);
PolyMesh read_mesh(std::istream& in);

}  // namespace hfv
