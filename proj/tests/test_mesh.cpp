#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "mpnp/mesh.hpp"
#include "support.hpp"

using namespace mpnp;

namespace {

std::string write_temp(const std::string& body) {
  static int counter = 0;
  const auto path = std::filesystem::temp_directory_path() /
                    ("mpnp_mesh_" + std::to_string(counter++) + ".txt");
  std::ofstream out(path);
  out << body;
  return path.string();
}

}  // namespace

TEST_CASE("load smallest valid square mesh") {
  const std::string path = write_temp(
      "dim 2\n"
      "vertices 4\n"
      "0 0\n1 0\n1 1\n0 1\n"
      "simplices 2\n"
      "0 1 2\n0 2 3\n"
      "boundary 4\n"
      "0 1 dirichlet\n1 2 neumann\n2 3 dirichlet\n3 0 neumann\n");
  const SimplicialMesh mesh = load_mesh(path);
  CHECK(mesh.num_vertices() == 4);
  CHECK(mesh.num_simplices() == 2);
  CHECK(mesh.boundary_faces.size() == 4);
}

TEST_CASE("zero-area triangle is rejected") {
  const std::string path = write_temp(
      "dim 2\n"
      "vertices 3\n"
      "0 0\n1 0\n2 0\n"
      "simplices 1\n"
      "0 1 2\n"
      "boundary 3\n"
      "0 1 dirichlet\n1 2 dirichlet\n0 2 dirichlet\n");
  CHECK_THROWS_WITH_AS(load_mesh(path),
                       doctest::Contains("degenerate simplex"), MeshError);
}

TEST_CASE("unmarked boundary face is rejected") {
  const std::string path = write_temp(
      "dim 2\n"
      "vertices 4\n"
      "0 0\n1 0\n1 1\n0 1\n"
      "simplices 2\n"
      "0 1 2\n0 2 3\n"
      "boundary 3\n"
      "0 1 dirichlet\n1 2 neumann\n2 3 dirichlet\n");
  CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("unmarked boundary"),
                       MeshError);
}

TEST_CASE("non-Delaunay mesh is rejected with the offending entities") {
  // kite: the (0,0)-(2,0) diagonal violates the empty-circumcircle test
  const std::string path = write_temp(
      "dim 2\n"
      "vertices 4\n"
      "0 0\n1 -0.2\n2 0\n1 1\n"
      "simplices 2\n"
      "0 1 2\n0 2 3\n"
      "boundary 4\n"
      "0 1 neumann\n1 2 neumann\n2 3 neumann\n3 0 neumann\n");
  CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("non-Delaunay"),
                       MeshError);
  // the good diagonal is fine
  const std::string ok = write_temp(
      "dim 2\n"
      "vertices 4\n"
      "0 0\n1 -0.2\n2 0\n1 1\n"
      "simplices 2\n"
      "0 1 3\n1 2 3\n"
      "boundary 4\n"
      "0 1 neumann\n1 2 neumann\n2 3 neumann\n3 0 neumann\n");
  CHECK_NOTHROW(load_mesh(ok));
}

TEST_CASE("save/load round trip is exact") {
  std::mt19937_64 rng(3);
  const SimplicialMesh mesh = test::make_jittered_2d(4, rng);
  const auto p1 = write_temp("");
  save_mesh(mesh, p1);
  const SimplicialMesh back = load_mesh(p1);
  REQUIRE(back.num_vertices() == mesh.num_vertices());
  for (int i = 0; i < mesh.num_vertices(); ++i)
    for (int d = 0; d < 2; ++d)
      CHECK(back.vertices[i][d] == mesh.vertices[i][d]);
  const auto p2 = write_temp("");
  save_mesh(back, p2);
  std::ifstream a(p1), b(p2);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("structured generator: counts and measures") {
  SUBCASE("10x10 grid of the unit square") {
    const auto mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {10, 10, 0});
    CHECK(mesh.num_vertices() == 121);
    CHECK(mesh.num_simplices() == 200);
  }
  SUBCASE("n=1: two triangles, unit area") {
    const auto mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {1, 1, 0});
    CHECK(mesh.num_simplices() == 2);
    const auto dual = build_dual(mesh);
    double total = 0;
    for (double m : dual.cell_measures) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("3D box volume") {
    const auto mesh =
        generate_structured(Box{{0, 0, 0}, {1, 1, 2}}, {2, 2, 4});
    const auto dual = build_dual(mesh);
    double total = 0;
    for (double m : dual.cell_measures) total += m;
    CHECK(total == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("n must be positive") {
    CHECK_THROWS_AS(generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {0, 3, 0}),
                    MeshError);
  }
}

TEST_CASE("transmissibility") {
  SUBCASE("definition") {
    const InteriorEdge e{0, 1, 0.5, 0.25, 0.5 / 0.25};
    CHECK(e.tau == doctest::Approx(2.0));
  }
  SUBCASE("uniform grid: tau constant per edge class, all positive") {
    // dual faces between two interior vertices have full measure; faces of
    // boundary-vertex pairs are clipped by the domain to half
    const int n = 4;
    const auto mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {n, n, 0});
    const auto dual = build_dual(mesh);
    REQUIRE(!dual.interior_edges.empty());
    const auto on_bnd = [&](int v) {
      const auto& p = mesh.vertices[v];
      return p[0] < 1e-12 || p[0] > 1 - 1e-12 || p[1] < 1e-12 ||
             p[1] > 1 - 1e-12;
    };
    for (const auto& e : dual.interior_edges) {
      CHECK(e.tau > 0.0);
      const double want = on_bnd(e.i) && on_bnd(e.j) ? 0.5 : 1.0;
      CHECK(e.tau == doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("3D uniform grid: tau in {h, h/2, h/4} by boundary clipping") {
    const int n = 3;
    const auto mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 1}}, {n, n, n});
    const auto dual = build_dual(mesh);
    const double h = 1.0 / n;
    for (const auto& e : dual.interior_edges) {
      const double q = e.tau / h;
      const bool ok = std::abs(q - 1.0) < 1e-12 || std::abs(q - 0.5) < 1e-12 ||
                      std::abs(q - 0.25) < 1e-12;
      CHECK(ok);
    }
  }
}

TEST_CASE("boundary index sets") {
  const auto mesh = generate_structured(
      Box{{0, 0, 0}, {1, 1, 0}}, {4, 4, 0},
      [](const Vec3& c) { return c[0] < 1e-12; });  // left wall Dirichlet
  const auto dual = build_dual(mesh);

  // N_3: exactly the vertices on the boundary of the square
  std::set<int> expect;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const auto& v = mesh.vertices[i];
    if (v[0] < 1e-12 || v[0] > 1 - 1e-12 || v[1] < 1e-12 || v[1] > 1 - 1e-12)
      expect.insert(i);
  }
  CHECK(std::set<int>(dual.boundary_cells.begin(), dual.boundary_cells.end()) ==
        expect);
  CHECK(dual.dirichlet_cells.size() == 5);  // the left edge vertices
  // every Dirichlet cell is on x = 0
  for (int i : dual.dirichlet_cells) CHECK(mesh.vertices[i][0] < 1e-12);
}

TEST_CASE("difference operator") {
  const auto mesh = generate_structured(
      Box{{0, 0, 0}, {1, 1, 0}}, {2, 2, 0},
      [](const Vec3& c) { return c[0] < 1e-12; });
  const auto dual = build_dual(mesh);
  std::vector<double> u(dual.num_cells());
  for (int i = 0; i < dual.num_cells(); ++i) u[i] = 3.0 * i + 1.0;

  SUBCASE("interior edge, both orientations (antisymmetry)") {
    const auto& e = dual.interior_edges.front();
    const double dij =
        dual.difference(u, {EdgeRef::kInterior, 0, e.i});
    const double dji =
        dual.difference(u, {EdgeRef::kInterior, 0, e.j});
    CHECK(dij == u[e.j] - u[e.i]);
    CHECK(dij == -dji);
  }
  SUBCASE("Dirichlet case") {
    REQUIRE(!dual.dirichlet_edges.empty());
    const auto& e = dual.dirichlet_edges.front();
    std::vector<double> v(dual.num_cells(), 1.0);
    CHECK(dual.difference(v, {EdgeRef::kDirichlet, 0, e.cell}, 0.0) ==
          doctest::Approx(-1.0));
  }
  SUBCASE("Neumann case: u^N * d_sigma") {
    REQUIRE(!dual.neumann_edges.empty());
    const auto& e = dual.neumann_edges.front();
    CHECK(dual.difference(u, {EdgeRef::kNeumann, 0, e.cell}, 2.0) ==
          doctest::Approx(2.0 * e.dist));
    CHECK(e.dist > 0.0);
  }
  SUBCASE("missing boundary data") {
    CHECK_THROWS_AS(dual.difference(u, {EdgeRef::kDirichlet, 0, 0}),
                    MeshError);
  }
}

TEST_CASE("jittered meshes stay admissible and tile the domain") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    const auto mesh = test::make_jittered_2d(5, rng);
    const auto dual = build_dual(mesh);
    double total = 0;
    for (double m : dual.cell_measures) {
      CHECK(m > 0.0);
      total += m;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& e : dual.interior_edges) CHECK(e.tau > 0.0);
  }
}

TEST_CASE("orthogonality holds on jittered meshes") {
  // build_dual verifies |<p - mid, n>| <= 1e-10 d for every dual-face
  // vertex of every edge, so admissible construction implies orthogonality.
  std::mt19937_64 rng(99);
  const auto mesh = test::make_jittered_2d(4, rng);
  const auto dual = build_dual(mesh);
  CHECK(!dual.interior_edges.empty());
}

TEST_CASE("random quad fixtures are 4-cell meshes") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const auto mesh = test::make_random_quad(rng);
    const auto dual = build_dual(mesh);
    CHECK(dual.num_cells() == 4);
    CHECK(!dual.dirichlet_cells.empty());
  }
}
