#include "mpnp/reconstruction.hpp"

#include <cmath>
#include <unordered_map>

namespace mpnp {

namespace {

std::uint64_t ekey(int i, int j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

// Barycentric coordinates of p in simplex s; all >= -tol means contained.
bool barycentric(const SimplicialMesh& mesh, const std::array<int, 4>& sx,
                 const Vec3& p, std::array<double, 4>& w) {
  const Vec3& a = mesh.vertices[sx[0]];
  const Vec3 ab = mesh.vertices[sx[1]] - a;
  const Vec3 ac = mesh.vertices[sx[2]] - a;
  const Vec3 ap = p - a;
  if (mesh.dim == 2) {
    const double det = ab[0] * ac[1] - ab[1] * ac[0];
    const double l1 = (ap[0] * ac[1] - ap[1] * ac[0]) / det;
    const double l2 = (ab[0] * ap[1] - ab[1] * ap[0]) / det;
    w = {1.0 - l1 - l2, l1, l2, 0.0};
  } else {
    const Vec3 ad = mesh.vertices[sx[3]] - a;
    const double det = dot(ab, cross(ac, ad));
    const double l1 = dot(ap, cross(ac, ad)) / det;
    const double l2 = dot(ab, cross(ap, ad)) / det;
    const double l3 = dot(ab, cross(ac, ap)) / det;
    w = {1.0 - l1 - l2 - l3, l1, l2, l3};
  }
  constexpr double tol = -1e-12;
  for (int k = 0; k < 4; ++k)
    if (w[k] < tol) return false;
  return true;
}

ExtensionStencil find_stencil(
    const SimplicialMesh& mesh, const DualMesh& dual,
    const std::unordered_map<std::uint64_t, std::vector<int>>& edge_simplices,
    int i, int j, int r_max) {
  ExtensionStencil st;
  const Vec3& xi = mesh.vertices[i];
  const Vec3& xj = mesh.vertices[j];
  const Vec3 v = xj - xi;
  const double vn = norm(v);

  // k1: neighbor of i most opposed to j (largest cosine of x_k1 x_i with
  // x_i x_j); ties broken toward the smallest vertex index.
  int k1 = -1;
  double best = -2.0;
  for (int q : dual.neighbor_sets[i]) {
    if (q == j) continue;
    const Vec3 u = xi - mesh.vertices[q];
    const double c = dot(u, v) / (norm(u) * vn);
    if (c > best + 1e-12) {
      best = c;
      k1 = q;
    }
  }
  if (k1 < 0) return st;

  auto it = edge_simplices.find(ekey(k1, i));
  if (it == edge_simplices.end()) return st;

  const double dij = vn;
  for (int r = 0; r <= r_max; ++r) {
    const double scale = std::ldexp(1.0, -r);  // 2^-r
    const Vec3 xext = xi + scale * (xi - xj);
    for (int s : it->second) {
      std::array<double, 4> w;
      if (barycentric(mesh, mesh.simplices[s], xext, w)) {
        st.verts = mesh.simplices[s];
        st.weights = w;
        st.dist = dij * scale;
        st.valid = true;
        return st;
      }
    }
  }
  return st;
}

}  // namespace

StencilTable build_stencils(const SimplicialMesh& mesh, const DualMesh& dual,
                            int r_max) {
  std::unordered_map<std::uint64_t, std::vector<int>> edge_simplices;
  for (int s = 0; s < mesh.num_simplices(); ++s) {
    const auto& sx = mesh.simplices[s];
    const int vps = mesh.verts_per_simplex();
    for (int a = 0; a < vps; ++a)
      for (int b = a + 1; b < vps; ++b)
        edge_simplices[ekey(sx[a], sx[b])].push_back(s);
  }

  StencilTable table;
  table.forward.resize(dual.interior_edges.size());
  table.backward.resize(dual.interior_edges.size());
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    const auto& e = dual.interior_edges[k];
    table.forward[k] =
        find_stencil(mesh, dual, edge_simplices, e.i, e.j, r_max);
    table.backward[k] =
        find_stencil(mesh, dual, edge_simplices, e.j, e.i, r_max);
    table.fallback_count +=
        !table.forward[k].valid + !table.backward[k].valid;
  }
  return table;
}

double minmod(double q1, double q2, double q3) {
  const auto sgn = [](double q) { return q > 0.0 ? 1 : (q < 0.0 ? -1 : 0); };
  const int k = sgn(q1);
  if (k == 0 || sgn(q2) != k || sgn(q3) != k) return 0.0;
  return k * std::min({std::abs(q1), std::abs(q2), std::abs(q3)});
}

double reconstruct_face_value(std::span<const double> u,
                              const InteriorEdge& edge,
                              const ExtensionStencil& stencil, int from_cell,
                              double beta) {
  const int to_cell = (from_cell == edge.i) ? edge.j : edge.i;
  if (!stencil.valid) return u[from_cell];

  double u_ext = 0.0;
  for (int k = 0; k < 4; ++k)
    if (stencil.verts[k] >= 0) u_ext += stencil.weights[k] * u[stencil.verts[k]];

  const double s_plus = (u[to_cell] - u[from_cell]) / edge.dist;
  const double s_minus = (u[from_cell] - u_ext) / stencil.dist;
  const double phi =
      minmod(beta * s_plus, beta * s_minus, 0.5 * (s_plus + s_minus));
  return u[from_cell] + 0.5 * edge.dist * phi;
}

}  // namespace mpnp
