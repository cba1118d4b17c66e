#pragma once

// Shared fixtures for the test suite: deterministic random meshes, tiny
// hand-built scenarios, and model builders mirroring the performance-test
// parameter set.

#include <memory>
#include <random>

#include "mpnp/scenarios.hpp"
#include "mpnp/solver.hpp"

namespace mpnp::test {

/// Owns every layer of a discretization built on an ad-hoc mesh.
struct Fixture {
  SimplicialMesh mesh;
  DualMesh dual;
  StencilTable stencils;
  ModelSpec model;
  std::unique_ptr<Discretization> disc;

  Fixture() = default;
  Fixture(const Fixture&) = delete;
  Fixture& operator=(const Fixture&) = delete;

  void finalize(double beta = 2.0) {
    dual = build_dual(mesh);
    stencils = build_stencils(mesh, dual);
    model.validate(dual);
    disc = std::make_unique<Discretization>(mesh, dual, model, stencils, beta);
  }
};

/// Strict in-circle test: d inside the circumcircle of ccw (a, b, c).
inline bool in_circle(const Vec3& a, const Vec3& b, const Vec3& c,
                      const Vec3& d) {
  const double ax = a[0] - d[0], ay = a[1] - d[1];
  const double bx = b[0] - d[0], by = b[1] - d[1];
  const double cx = c[0] - d[0], cy = c[1] - d[1];
  const double det =
      (ax * ax + ay * ay) * (bx * cy - by * cx) -
      (bx * bx + by * by) * (ax * cy - ay * cx) +
      (cx * cx + cy * cy) * (ax * by - ay * bx);
  return det > 0.0;
}

/// Structured [0,1]^2 grid with interior vertices jittered; each quad is
/// re-split along its Delaunay diagonal; retries until the mesh passes the
/// global empty-circumcircle check with an admissible dual.
inline SimplicialMesh make_jittered_2d(int n, std::mt19937_64& rng,
                                       double amplitude = 0.2) {
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  for (int attempt = 0; attempt < 100; ++attempt) {
    SimplicialMesh mesh;
    mesh.dim = 2;
    const double h = 1.0 / n;
    const auto vid = [&](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        Vec3 v{i * h, j * h, 0.0};
        if (i > 0 && i < n && j > 0 && j < n) {
          v[0] += u(rng) * h;
          v[1] += u(rng) * h;
        }
        mesh.vertices.push_back(v);
      }
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int v00 = vid(i, j), v10 = vid(i + 1, j);
        const int v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
        if (in_circle(mesh.vertices[v00], mesh.vertices[v10],
                      mesh.vertices[v11], mesh.vertices[v01])) {
          mesh.simplices.push_back({v00, v10, v01, -1});
          mesh.simplices.push_back({v10, v11, v01, -1});
        } else {
          mesh.simplices.push_back({v00, v10, v11, -1});
          mesh.simplices.push_back({v00, v11, v01, -1});
        }
      }
    const auto mark = [](const Vec3& c) {
      return c[0] < 1e-12 || c[0] > 1.0 - 1e-12;
    };
    const auto bedge = [&](int a, int b) {
      const Vec3 ctr = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
      mesh.boundary_faces.push_back(
          {{a, b, -1}, mark(ctr) ? BoundaryMarker::kDirichlet
                                 : BoundaryMarker::kNeumann});
    };
    for (int i = 0; i < n; ++i) bedge(vid(i, 0), vid(i + 1, 0));
    for (int i = 0; i < n; ++i) bedge(vid(i, n), vid(i + 1, n));
    for (int j = 0; j < n; ++j) bedge(vid(0, j), vid(0, j + 1));
    for (int j = 0; j < n; ++j) bedge(vid(n, j), vid(n, j + 1));

    try {
      mesh.validate();
      (void)build_dual(mesh);
      return mesh;
    } catch (const MeshError&) {
      continue;
    }
  }
  throw MeshError("make_jittered_2d: no admissible sample found");
}

/// Random convex quadrilateral split along its Delaunay diagonal: the
/// smallest admissible mesh (4 vertices = 4 control volumes). Two opposite
/// sides are Dirichlet, the others Neumann.
inline SimplicialMesh make_random_quad(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.25, 0.25);
  for (int attempt = 0; attempt < 500; ++attempt) {
    const Vec3 p0{0.0 + u(rng), 0.0 + u(rng), 0};
    const Vec3 p1{1.0 + u(rng), 0.0 + u(rng), 0};
    const Vec3 p2{1.0 + u(rng), 1.0 + u(rng), 0};
    const Vec3 p3{0.0 + u(rng), 1.0 + u(rng), 0};
    for (int diag = 0; diag < 2; ++diag) {
      SimplicialMesh mesh;
      mesh.dim = 2;
      mesh.vertices = {p0, p1, p2, p3};
      if (diag == 0)
        mesh.simplices = {{0, 1, 2, -1}, {0, 2, 3, -1}};
      else
        mesh.simplices = {{0, 1, 3, -1}, {1, 2, 3, -1}};
      mesh.boundary_faces = {{{0, 1, -1}, BoundaryMarker::kDirichlet},
                             {{1, 2, -1}, BoundaryMarker::kNeumann},
                             {{2, 3, -1}, BoundaryMarker::kDirichlet},
                             {{3, 0, -1}, BoundaryMarker::kNeumann}};
      try {
        mesh.validate();
        (void)build_dual(mesh);
        return mesh;
      } catch (const MeshError&) {
        continue;
      }
    }
  }
  throw MeshError("make_random_quad: no admissible sample found");
}

/// Two-species model with the performance-test coefficients (kappa = 1e-3,
/// chi = 10, logistic dielectric, Gaussian fixed charges) on any 2D mesh.
inline void fill_property_model(Fixture& fx, bool gaussians = true) {
  auto& model = fx.model;
  model.species = {{+1, 0.1, 1.0}, {-1, 0.2, 1.0}};
  model.a0 = 0.3;
  model.kappa = 0.001;
  model.chi = 10.0;
  const int nv = fx.mesh.num_vertices();
  model.epsilon.resize(nv);
  model.rho_f.assign(nv, 0.0);
  model.psi_dirichlet.assign(nv, 0.0);
  const auto gauss = [](double x, double y, double cx, double cy) {
    return std::exp(-100.0 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)));
  };
  for (int i = 0; i < nv; ++i) {
    const auto& p = fx.mesh.vertices[i];
    model.epsilon[i] = scenarios::Manufactured::eps(p[0]);
    if (gaussians)
      model.rho_f[i] = gauss(p[0], p[1], 0.25, 0.25) -
                       gauss(p[0], p[1], 0.75, 0.25) +
                       gauss(p[0], p[1], 0.25, 0.75) -
                       gauss(p[0], p[1], 0.75, 0.75);
    model.psi_dirichlet[i] = p[0] > 0.5 ? 1.0 : 0.0;
  }
}

/// Random positive concentrations with a positive solvent fraction, psi
/// solved from the discrete Poisson equation.
inline State make_random_admissible_state(const Fixture& fx,
                                          std::mt19937_64& rng,
                                          double scale = 1.0) {
  const int nv = fx.mesh.num_vertices();
  const int M = fx.model.num_species();
  std::uniform_real_distribution<double> u(0.02, 1.0);
  State st;
  st.time = 0.0;
  st.c.assign(M, std::vector<double>(nv));
  for (int i = 0; i < nv; ++i) {
    for (int l = 0; l < M; ++l) st.c[l][i] = scale * u(rng);
    // rescale into the admissible simplex when needed
    double packed = 0.0;
    for (int l = 0; l < M; ++l)
      packed += fx.model.species[l].a3() * st.c[l][i];
    if (packed >= 0.9)
      for (int l = 0; l < M; ++l) st.c[l][i] *= 0.9 / packed;
  }
  st.psi = solve_poisson(*fx.disc, st.c, 0.0);
  st.validate(fx.model);
  return st;
}

}  // namespace mpnp::test
