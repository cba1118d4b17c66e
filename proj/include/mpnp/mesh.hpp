#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpnp {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a);

enum class BoundaryMarker { kDirichlet, kNeumann };

struct BoundaryFace {
  std::array<int, 3> vertices{-1, -1, -1};  // third entry unused in 2D
  BoundaryMarker marker = BoundaryMarker::kNeumann;
};

/// Delaunay simplicial mesh: triangles (dim 2) or tetrahedra (dim 3).
/// Vertices double as the centers of the dual Voronoi control volumes.
struct SimplicialMesh {
  int dim = 2;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> simplices;  // fourth entry -1 in 2D
  std::vector<BoundaryFace> boundary_faces;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_simplices() const { return static_cast<int>(simplices.size()); }
  int verts_per_simplex() const { return dim + 1; }

  /// Checks index ranges, simplex nondegeneracy, the empty-circumsphere
  /// (Delaunay) property, and that declared boundary faces cover the mesh
  /// boundary exactly once. Throws MeshError with the offending entity.
  void validate() const;
};

enum class MeshFormat { kText };

SimplicialMesh load_mesh(const std::string& path,
                         MeshFormat format = MeshFormat::kText);
void save_mesh(const SimplicialMesh& mesh, const std::string& path);

struct Box {
  Vec3 lo{0, 0, 0};
  Vec3 hi{1, 1, 1};
};

/// Structured Delaunay triangulation of a rectangle (n[2] == 0) or box.
/// Boundary faces are marked Dirichlet where the predicate holds at the
/// face centroid, Neumann elsewhere.
SimplicialMesh generate_structured(
    const Box& domain, std::array<int, 3> n,
    const std::function<bool(const Vec3&)>& dirichlet_at);

/// All-Neumann convenience overload.
SimplicialMesh generate_structured(const Box& domain, std::array<int, 3> n);

struct InteriorEdge {
  int i, j;        // cell indices, i < j
  double measure;  // m(sigma), Voronoi face area/length
  double dist;     // d_sigma = |x_i x_j|
  double tau;      // m(sigma)/d_sigma
};

struct BoundaryEdge {
  int cell;
  double measure;  // the cell's share of the boundary face
  double dist;     // distance from x_i to the share centroid
  double tau;
  int face;  // index into SimplicialMesh::boundary_faces
};

/// Reference to one edge of a control volume, as seen from `cell`.
struct EdgeRef {
  enum Kind { kInterior, kDirichlet, kNeumann } kind;
  int index;  // into the corresponding edge array
  int cell;   // viewing cell (for interior orientation)
};

/// Voronoi dual of a Delaunay mesh: control volumes, transmissibilities,
/// and boundary classification. Immutable after construction.
struct DualMesh {
  int dim = 2;
  double domain_measure = 0.0;
  std::vector<Vec3> centers;  // copy of generator coordinates
  std::vector<double> cell_measures;
  std::vector<InteriorEdge> interior_edges;
  std::vector<BoundaryEdge> dirichlet_edges;
  std::vector<BoundaryEdge> neumann_edges;
  std::vector<std::vector<int>> neighbor_sets;  // W_i, Delaunay 1-ring
  std::vector<std::vector<int>> cell_interior_edges;
  std::vector<std::vector<int>> cell_dirichlet_edges;
  std::vector<std::vector<int>> cell_neumann_edges;
  std::vector<int> dirichlet_cells;  // N_1
  std::vector<int> neumann_cells;    // N_2
  std::vector<int> boundary_cells;   // N_3
  std::vector<std::uint8_t> on_dirichlet;  // cell touches a Dirichlet face
  std::vector<std::string> warnings;

  int num_cells() const { return static_cast<int>(cell_measures.size()); }

  /// Three-case difference operator (Du)_{i,sigma}. `boundary_data` is
  /// required for boundary edges: u^D_sigma (Dirichlet) or u^N_sigma
  /// (Neumann, multiplied by d_sigma).
  double difference(std::span<const double> u, const EdgeRef& edge,
                    std::optional<double> boundary_data = std::nullopt) const;
};

/// Builds the circumcenter-based Voronoi dual. Rejects meshes producing
/// nonpositive face measures or cell volumes; emits a warning (not an
/// error) when the regularity constant xi is violated.
DualMesh build_dual(const SimplicialMesh& mesh, double regularity_xi = 0.05);

}  // namespace mpnp
