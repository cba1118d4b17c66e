#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mpnp/mesh.hpp"

namespace mpnp {

/// Extension-point data for one ordered cell pair (i -> j): the simplex
/// containing x_ext on the ray away from j, its barycentric weights, and
/// |x_i x_ext|. `valid == false` marks boundary-adjacent pairs with no
/// containing simplex, which fall back to the first-order face value.
struct ExtensionStencil {
  std::array<int, 4> verts{-1, -1, -1, -1};
  std::array<double, 4> weights{0, 0, 0, 0};
  double dist = 0.0;
  bool valid = false;
};

/// One forward (i->j) and one backward (j->i) stencil per interior dual
/// edge, immutable after construction.
struct StencilTable {
  std::vector<ExtensionStencil> forward;
  std::vector<ExtensionStencil> backward;
  int fallback_count = 0;

  const ExtensionStencil& get(int edge, int from_cell,
                              const InteriorEdge& e) const {
    return from_cell == e.i ? forward[edge] : backward[edge];
  }
};

/// Locates the extension points x_ext = ((2^r+1) x_i - x_j) / 2^r along the
/// ray away from x_j, searching simplices that share the edge x_k1 x_i where
/// k1 maximizes cos(x_k1 x_i, x_i x_j) over W_i (ties to the smallest index).
StencilTable build_stencils(const SimplicialMesh& mesh, const DualMesh& dual,
                            int r_max = 30);

/// k * min(|q1|,|q2|,|q3|) when all three signs equal k, else 0; sign(0)
/// breaks agreement.
double minmod(double q1, double q2, double q3);

/// u_{i->j} = u_i + (|x_i x_j|/2) * minmod(beta s+, beta s-, (s+ + s-)/2);
/// strictly positive for positive u_i, u_j and beta in [1,2].
double reconstruct_face_value(std::span<const double> u,
                              const InteriorEdge& edge,
                              const ExtensionStencil& stencil, int from_cell,
                              double beta);

}  // namespace mpnp
