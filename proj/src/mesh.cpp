#include "mpnp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace mpnp {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

namespace {

double simplex_measure(const SimplicialMesh& m, int s) {
  const auto& sx = m.simplices[s];
  const Vec3& a = m.vertices[sx[0]];
  const Vec3 ab = m.vertices[sx[1]] - a;
  const Vec3 ac = m.vertices[sx[2]] - a;
  if (m.dim == 2) return 0.5 * (ab[0] * ac[1] - ab[1] * ac[0]);
  const Vec3 ad = m.vertices[sx[3]] - a;
  return dot(cross(ab, ac), ad) / 6.0;
}

Vec3 circumcenter_triangle(const Vec3& a, const Vec3& b, const Vec3& c) {
  // In-plane circumcenter, valid in 2D and for 3D facets:
  // a + (|ac|^2 (n x ab) + |ab|^2 (ac x n)) / (2 |n|^2), n = ab x ac.
  const Vec3 ab = b - a, ac = c - a;
  const Vec3 n = cross(ab, ac);
  const double n2 = dot(n, n);
  const Vec3 u = dot(ac, ac) * cross(n, ab) + dot(ab, ab) * cross(ac, n);
  return a + (0.5 / n2) * u;
}

Vec3 circumcenter_tet(const Vec3& a, const Vec3& b, const Vec3& c,
                      const Vec3& d) {
  const Vec3 ab = b - a, ac = c - a, ad = d - a;
  const double rb = 0.5 * dot(ab, ab);
  const double rc = 0.5 * dot(ac, ac);
  const double rd = 0.5 * dot(ad, ad);
  // Solve [ab; ac; ad] u = [rb; rc; rd] by Cramer's rule.
  const double det = dot(ab, cross(ac, ad));
  const Vec3 u = (1.0 / det) * (rb * cross(ac, ad) + rc * cross(ad, ab) +
                                rd * cross(ab, ac));
  return a + u;
}

Vec3 circumcenter(const SimplicialMesh& m, int s) {
  const auto& sx = m.simplices[s];
  if (m.dim == 2)
    return circumcenter_triangle(m.vertices[sx[0]], m.vertices[sx[1]],
                                 m.vertices[sx[2]]);
  return circumcenter_tet(m.vertices[sx[0]], m.vertices[sx[1]],
                          m.vertices[sx[2]], m.vertices[sx[3]]);
}

std::uint64_t edge_key(int i, int j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint32_t>(j);
}

std::array<int, 3> sorted_tri(int a, int b, int c) {
  std::array<int, 3> t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

struct TriKeyHash {
  std::size_t operator()(const std::array<int, 3>& t) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : t) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Facets of a simplex (edges of a triangle / triangles of a tet).
std::vector<std::array<int, 3>> facets_of(const SimplicialMesh& m, int s) {
  const auto& sx = m.simplices[s];
  std::vector<std::array<int, 3>> out;
  if (m.dim == 2) {
    out.push_back(sorted_tri(sx[0], sx[1], -1));
    out.push_back(sorted_tri(sx[1], sx[2], -1));
    out.push_back(sorted_tri(sx[0], sx[2], -1));
  } else {
    out.push_back(sorted_tri(sx[0], sx[1], sx[2]));
    out.push_back(sorted_tri(sx[0], sx[1], sx[3]));
    out.push_back(sorted_tri(sx[0], sx[2], sx[3]));
    out.push_back(sorted_tri(sx[1], sx[2], sx[3]));
  }
  return out;
}

std::array<int, 3> face_key(const BoundaryFace& f, int dim) {
  if (dim == 2) return sorted_tri(f.vertices[0], f.vertices[1], -1);
  return sorted_tri(f.vertices[0], f.vertices[1], f.vertices[2]);
}

}  // namespace

void SimplicialMesh::validate() const {
  if (dim != 2 && dim != 3) throw MeshError("mesh dimension must be 2 or 3");
  const int nv = num_vertices();
  const int vps = verts_per_simplex();

  for (int s = 0; s < num_simplices(); ++s) {
    for (int k = 0; k < vps; ++k) {
      const int v = simplices[s][k];
      if (v < 0 || v >= nv)
        throw MeshError("simplex " + std::to_string(s) +
                        ": vertex index out of range");
    }
    if (dim == 2 && simplices[s][3] != -1)
      throw MeshError("2D simplex with four vertices");
  }

  // Nondegeneracy: measure above a relative floor.
  for (int s = 0; s < num_simplices(); ++s) {
    const auto& sx = simplices[s];
    double scale = 0.0;
    for (int a = 0; a < vps; ++a)
      for (int b = a + 1; b < vps; ++b)
        scale = std::max(scale, norm(vertices[sx[a]] - vertices[sx[b]]));
    const double meas = std::abs(simplex_measure(*this, s));
    if (meas <= 1e-12 * std::pow(scale, dim))
      throw MeshError("degenerate simplex " + std::to_string(s));
  }

  // Empty circumsphere, with cospherical points allowed.
  for (int s = 0; s < num_simplices(); ++s) {
    const Vec3 cc = circumcenter(*this, s);
    const Vec3 r = vertices[simplices[s][0]] - cc;
    const double r2 = dot(r, r);
    for (int v = 0; v < nv; ++v) {
      bool own = false;
      for (int k = 0; k < vps; ++k) own |= (simplices[s][k] == v);
      if (own) continue;
      const Vec3 d = vertices[v] - cc;
      if (dot(d, d) < r2 * (1.0 - 1e-9))
        throw MeshError("non-Delaunay mesh: vertex " + std::to_string(v) +
                        " inside circumsphere of simplex " + std::to_string(s));
    }
  }

  // Boundary faces == facets incident to exactly one simplex, each once.
  std::unordered_map<std::array<int, 3>, int, TriKeyHash> count;
  for (int s = 0; s < num_simplices(); ++s)
    for (const auto& f : facets_of(*this, s)) ++count[f];

  std::unordered_map<std::array<int, 3>, int, TriKeyHash> declared;
  for (std::size_t b = 0; b < boundary_faces.size(); ++b) {
    const auto key = face_key(boundary_faces[b], dim);
    if (++declared[key] > 1)
      throw MeshError("boundary face " + std::to_string(b) +
                      " declared more than once");
    auto it = count.find(key);
    if (it == count.end())
      throw MeshError("boundary face " + std::to_string(b) +
                      " is not a facet of the mesh");
    if (it->second != 1)
      throw MeshError("boundary face " + std::to_string(b) +
                      " is an interior facet");
  }
  for (const auto& [key, c] : count) {
    if (c == 1 && !declared.count(key))
      throw MeshError("unmarked boundary face (" + std::to_string(key[0]) +
                      "," + std::to_string(key[1]) + "," +
                      std::to_string(key[2]) + ")");
    if (c > 2)
      throw MeshError("non-manifold facet shared by " + std::to_string(c) +
                      " simplices");
  }
}

SimplicialMesh load_mesh(const std::string& path, MeshFormat) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file '" + path + "'");

  SimplicialMesh mesh;
  std::string line, word;
  enum { kNone, kVerts, kSimps, kBnd } section = kNone;
  long remaining = 0;

  auto next_content_line = [&](std::string& out) -> bool {
    while (std::getline(in, out)) {
      const auto h = out.find('#');
      if (h != std::string::npos) out.erase(h);
      if (out.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  };

  while (next_content_line(line)) {
    std::istringstream ls(line);
    if (remaining == 0) {
      ls >> word;
      if (word == "dim") {
        if (!(ls >> mesh.dim)) throw MeshError("parse error: dim");
      } else if (word == "vertices") {
        if (!(ls >> remaining) || remaining < 0)
          throw MeshError("parse error: vertices count");
        section = kVerts;
        mesh.vertices.reserve(remaining);
      } else if (word == "simplices") {
        if (!(ls >> remaining) || remaining < 0)
          throw MeshError("parse error: simplices count");
        section = kSimps;
        mesh.simplices.reserve(remaining);
      } else if (word == "boundary") {
        if (!(ls >> remaining) || remaining < 0)
          throw MeshError("parse error: boundary count");
        section = kBnd;
        mesh.boundary_faces.reserve(remaining);
      } else {
        throw MeshError("parse error: unknown section '" + word + "'");
      }
      continue;
    }

    --remaining;
    if (section == kVerts) {
      Vec3 v{0, 0, 0};
      if (!(ls >> v[0] >> v[1])) throw MeshError("parse error in vertex line");
      if (mesh.dim == 3 && !(ls >> v[2]))
        throw MeshError("parse error in vertex line (3D)");
      mesh.vertices.push_back(v);
    } else if (section == kSimps) {
      std::array<int, 4> sx{-1, -1, -1, -1};
      for (int k = 0; k < mesh.dim + 1; ++k)
        if (!(ls >> sx[k])) throw MeshError("parse error in simplex line");
      mesh.simplices.push_back(sx);
    } else if (section == kBnd) {
      BoundaryFace f;
      for (int k = 0; k < mesh.dim; ++k)
        if (!(ls >> f.vertices[k]))
          throw MeshError("parse error in boundary line");
      std::string marker;
      if (!(ls >> marker)) throw MeshError("missing boundary marker");
      if (marker == "dirichlet") f.marker = BoundaryMarker::kDirichlet;
      else if (marker == "neumann") f.marker = BoundaryMarker::kNeumann;
      else throw MeshError("unknown boundary marker '" + marker + "'");
      mesh.boundary_faces.push_back(f);
    }
  }
  if (remaining != 0) throw MeshError("truncated mesh file");

  mesh.validate();
  return mesh;
}

void save_mesh(const SimplicialMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file '" + path + "'");
  char buf[96];
  out << "dim " << mesh.dim << "\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (const auto& v : mesh.vertices) {
    if (mesh.dim == 2)
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v[0], v[1]);
    else
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v[0], v[1], v[2]);
    out << buf;
  }
  out << "simplices " << mesh.num_simplices() << "\n";
  for (const auto& s : mesh.simplices) {
    for (int k = 0; k < mesh.dim + 1; ++k) out << s[k] << (k < mesh.dim ? " " : "\n");
  }
  out << "boundary " << mesh.boundary_faces.size() << "\n";
  for (const auto& f : mesh.boundary_faces) {
    for (int k = 0; k < mesh.dim; ++k) out << f.vertices[k] << " ";
    out << (f.marker == BoundaryMarker::kDirichlet ? "dirichlet" : "neumann")
        << "\n";
  }
}

SimplicialMesh generate_structured(
    const Box& domain, std::array<int, 3> n,
    const std::function<bool(const Vec3&)>& dirichlet_at) {
  const bool is3d = n[2] > 0;
  for (int a = 0; a < (is3d ? 3 : 2); ++a)
    if (n[a] < 1) throw MeshError("generate_structured: n must be >= 1");

  SimplicialMesh mesh;
  mesh.dim = is3d ? 3 : 2;
  const int nx = n[0], ny = n[1], nz = is3d ? n[2] : 0;
  const double hx = (domain.hi[0] - domain.lo[0]) / nx;
  const double hy = (domain.hi[1] - domain.lo[1]) / ny;
  const double hz = is3d ? (domain.hi[2] - domain.lo[2]) / nz : 0.0;
  if (hx <= 0 || hy <= 0 || (is3d && hz <= 0))
    throw MeshError("generate_structured: empty box");

  auto mark = [&](const Vec3& centroid) {
    return dirichlet_at && dirichlet_at(centroid) ? BoundaryMarker::kDirichlet
                                                  : BoundaryMarker::kNeumann;
  };

  if (!is3d) {
    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        mesh.vertices.push_back(
            {domain.lo[0] + i * hx, domain.lo[1] + j * hy, 0.0});

    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int v00 = vid(i, j), v10 = vid(i + 1, j);
        const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
        mesh.simplices.push_back({v00, v10, v11, -1});
        mesh.simplices.push_back({v00, v11, v01, -1});
      }

    auto bedge = [&](int a, int b) {
      const Vec3 c = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
      mesh.boundary_faces.push_back({{a, b, -1}, mark(c)});
    };
    for (int i = 0; i < nx; ++i) bedge(vid(i, 0), vid(i + 1, 0));
    for (int i = 0; i < nx; ++i) bedge(vid(i, ny), vid(i + 1, ny));
    for (int j = 0; j < ny; ++j) bedge(vid(0, j), vid(0, j + 1));
    for (int j = 0; j < ny; ++j) bedge(vid(nx, j), vid(nx, j + 1));
  } else {
    auto vid = [&](int i, int j, int k) {
      return (k * (ny + 1) + j) * (nx + 1) + i;
    };
    for (int k = 0; k <= nz; ++k)
      for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
          mesh.vertices.push_back({domain.lo[0] + i * hx,
                                   domain.lo[1] + j * hy,
                                   domain.lo[2] + k * hz});

    // Kuhn subdivision: six tets per cube, all sharing the main diagonal.
    constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                 {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const int base[3] = {i, j, k};
          for (const auto& p : kPerm) {
            int c[3] = {base[0], base[1], base[2]};
            std::array<int, 4> tet{};
            tet[0] = vid(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              ++c[p[s]];
              tet[s + 1] = vid(c[0], c[1], c[2]);
            }
            mesh.simplices.push_back(tet);
          }
        }

    // Boundary quads split along the min-corner -> max-corner diagonal,
    // matching the Kuhn facets.
    auto bquad = [&](int v00, int v10, int v11, int v01) {
      auto tri = [&](int a, int b, int c) {
        const Vec3 ctr = (1.0 / 3.0) * (mesh.vertices[a] + mesh.vertices[b] +
                                        mesh.vertices[c]);
        mesh.boundary_faces.push_back({{a, b, c}, mark(ctr)});
      };
      tri(v00, v10, v11);
      tri(v00, v11, v01);
    };
    for (int j = 0; j < ny; ++j)  // z = lo, hi
      for (int i = 0; i < nx; ++i) {
        bquad(vid(i, j, 0), vid(i + 1, j, 0), vid(i + 1, j + 1, 0),
              vid(i, j + 1, 0));
        bquad(vid(i, j, nz), vid(i + 1, j, nz), vid(i + 1, j + 1, nz),
              vid(i, j + 1, nz));
      }
    for (int k = 0; k < nz; ++k)  // y = lo, hi
      for (int i = 0; i < nx; ++i) {
        bquad(vid(i, 0, k), vid(i + 1, 0, k), vid(i + 1, 0, k + 1),
              vid(i, 0, k + 1));
        bquad(vid(i, ny, k), vid(i + 1, ny, k), vid(i + 1, ny, k + 1),
              vid(i, ny, k + 1));
      }
    for (int k = 0; k < nz; ++k)  // x = lo, hi
      for (int j = 0; j < ny; ++j) {
        bquad(vid(0, j, k), vid(0, j + 1, k), vid(0, j + 1, k + 1),
              vid(0, j, k + 1));
        bquad(vid(nx, j, k), vid(nx, j + 1, k), vid(nx, j + 1, k + 1),
              vid(nx, j, k + 1));
      }
  }

  mesh.validate();
  return mesh;
}

SimplicialMesh generate_structured(const Box& domain, std::array<int, 3> n) {
  return generate_structured(domain, n, nullptr);
}

namespace {

struct EdgeBuild {
  int i, j;
  std::vector<int> simplices;
};

double polygon_area(const std::vector<Vec3>& pts, const Vec3& nhat) {
  Vec3 acc{0, 0, 0};
  const Vec3& o = pts[0];
  for (std::size_t k = 1; k + 1 < pts.size(); ++k)
    acc = acc + cross(pts[k] - o, pts[k + 1] - o);
  return 0.5 * std::abs(dot(acc, nhat));
}

}  // namespace

DualMesh build_dual(const SimplicialMesh& mesh, double regularity_xi) {
  mesh.validate();

  DualMesh dual;
  dual.dim = mesh.dim;
  dual.centers = mesh.vertices;
  const int nv = mesh.num_vertices();
  const int vps = mesh.verts_per_simplex();

  std::vector<Vec3> cc(mesh.num_simplices());
  double omega = 0.0;
  for (int s = 0; s < mesh.num_simplices(); ++s) {
    cc[s] = circumcenter(mesh, s);
    omega += std::abs(simplex_measure(mesh, s));
  }
  dual.domain_measure = omega;

  // Delaunay edges with their incident simplices.
  std::unordered_map<std::uint64_t, EdgeBuild> edges;
  for (int s = 0; s < mesh.num_simplices(); ++s) {
    const auto& sx = mesh.simplices[s];
    for (int a = 0; a < vps; ++a)
      for (int b = a + 1; b < vps; ++b) {
        auto& e = edges[edge_key(sx[a], sx[b])];
        if (e.simplices.empty()) {
          e.i = std::min(sx[a], sx[b]);
          e.j = std::max(sx[a], sx[b]);
        }
        e.simplices.push_back(s);
      }
  }

  // Boundary facet lookup: facet key -> declared face index.
  std::unordered_map<std::array<int, 3>, int, TriKeyHash> bface_index;
  for (std::size_t b = 0; b < mesh.boundary_faces.size(); ++b)
    bface_index[face_key(mesh.boundary_faces[b], mesh.dim)] =
        static_cast<int>(b);

  dual.neighbor_sets.assign(nv, {});
  for (const auto& [key, e] : edges) {
    dual.neighbor_sets[e.i].push_back(e.j);
    dual.neighbor_sets[e.j].push_back(e.i);
  }
  for (auto& w : dual.neighbor_sets) std::sort(w.begin(), w.end());

  // Facet -> simplex adjacency, for ordering tets around a 3D edge.
  std::unordered_map<std::array<int, 3>, std::array<int, 2>, TriKeyHash>
      facet_simplices;
  if (mesh.dim == 3) {
    for (int s = 0; s < mesh.num_simplices(); ++s)
      for (const auto& f : facets_of(mesh, s)) {
        auto it = facet_simplices.find(f);
        if (it == facet_simplices.end())
          facet_simplices[f] = {s, -1};
        else
          it->second[1] = s;
      }
  }

  std::vector<std::uint64_t> keys;
  keys.reserve(edges.size());
  for (const auto& [key, e] : edges) keys.push_back(key);
  std::sort(keys.begin(), keys.end());  // deterministic edge ordering

  for (const auto key : keys) {
    const auto& e = edges.at(key);
    const Vec3& xi = mesh.vertices[e.i];
    const Vec3& xj = mesh.vertices[e.j];
    const Vec3 mid = 0.5 * (xi + xj);
    const double d = norm(xj - xi);
    const Vec3 nhat = (1.0 / d) * (xj - xi);

    double msigma = 0.0;
    std::vector<Vec3> poly;

    if (mesh.dim == 2) {
      if (e.simplices.size() == 2) {
        poly = {cc[e.simplices[0]], cc[e.simplices[1]]};
        msigma = norm(poly[1] - poly[0]);
      } else if (e.simplices.size() == 1) {
        poly = {cc[e.simplices[0]], mid};
        msigma = norm(poly[1] - poly[0]);
      } else {
        throw MeshError("edge shared by more than two triangles");
      }
    } else {
      // Order incident tets into a fan around the edge.
      std::unordered_map<std::array<int, 3>, std::vector<int>, TriKeyHash>
          side;  // facets containing this edge -> local tet ids
      const auto others = [&](int s) {
        std::vector<int> o;
        for (int k = 0; k < 4; ++k) {
          const int v = mesh.simplices[s][k];
          if (v != e.i && v != e.j) o.push_back(v);
        }
        return o;
      };
      for (std::size_t li = 0; li < e.simplices.size(); ++li) {
        const auto o = others(e.simplices[li]);
        side[sorted_tri(e.i, e.j, o[0])].push_back(static_cast<int>(li));
        side[sorted_tri(e.i, e.j, o[1])].push_back(static_cast<int>(li));
      }
      std::vector<std::array<int, 3>> open_facets;
      for (const auto& [f, tets] : side)
        if (tets.size() == 1) open_facets.push_back(f);

      if (open_facets.size() != 0 && open_facets.size() != 2)
        throw MeshError("broken fan around edge (" + std::to_string(e.i) +
                        "," + std::to_string(e.j) + ")");

      const bool boundary_edge = open_facets.size() == 2;
      if (boundary_edge) {
        std::sort(open_facets.begin(), open_facets.end());
        for (const auto& f : open_facets)
          if (!bface_index.count(f))
            throw MeshError("edge fan ends at an undeclared boundary facet");
      }

      // Walk the fan facet-to-facet.
      std::vector<int> order;
      std::vector<char> used(e.simplices.size(), 0);
      int cur;
      std::array<int, 3> enter{};
      if (boundary_edge) {
        enter = open_facets[0];
        cur = side[enter][0];
      } else {
        cur = 0;
        const auto o = others(e.simplices[0]);
        enter = sorted_tri(e.i, e.j, o[0]);
      }
      for (std::size_t step = 0; step < e.simplices.size(); ++step) {
        order.push_back(cur);
        used[cur] = 1;
        const auto o = others(e.simplices[order.back()]);
        const auto f1 = sorted_tri(e.i, e.j, o[0]);
        const auto f2 = sorted_tri(e.i, e.j, o[1]);
        const auto exit = (f1 == enter) ? f2 : f1;
        int next = -1;
        for (int cand : side[exit])
          if (!used[cand]) next = cand;
        if (next < 0) break;
        enter = exit;
        cur = next;
      }
      if (order.size() != e.simplices.size())
        throw MeshError("disconnected fan around edge (" +
                        std::to_string(e.i) + "," + std::to_string(e.j) + ")");

      if (boundary_edge) {
        const auto fc = [&](const std::array<int, 3>& f) {
          return circumcenter_triangle(mesh.vertices[f[0]],
                                       mesh.vertices[f[1]],
                                       mesh.vertices[f[2]]);
        };
        // Identify which open facet the walk actually started at.
        const auto o0 = others(e.simplices[order.front()]);
        const auto of = open_facets;
        auto start_f = of[0];
        auto end_f = of[1];
        const bool front_has_0 =
            sorted_tri(e.i, e.j, o0[0]) == of[0] ||
            sorted_tri(e.i, e.j, o0[1]) == of[0];
        if (!front_has_0) std::swap(start_f, end_f);
        poly.push_back(mid);
        poly.push_back(fc(start_f));
        for (int s : order) poly.push_back(cc[e.simplices[s]]);
        poly.push_back(fc(end_f));
      } else {
        for (int s : order) poly.push_back(cc[e.simplices[s]]);
      }
      if (poly.size() >= 3) msigma = polygon_area(poly, nhat);
    }

    // Orthogonality: every dual-face point must lie on the bisector plane.
    for (const auto& p : poly) {
      const double dev = std::abs(dot(p - mid, nhat));
      if (dev > 1e-10 * d)
        throw MeshError("dual face not orthogonal to edge (" +
                        std::to_string(e.i) + "," + std::to_string(e.j) +
                        "), deviation " + std::to_string(dev));
    }

    const double tol = 1e-10 * std::pow(d, mesh.dim - 1);
    if (msigma <= tol) continue;  // measure-zero Voronoi contact: no flux edge

    dual.interior_edges.push_back({e.i, e.j, msigma, d, msigma / d});
  }

  // Cell volumes: pyramids over the bisector faces (boundary pieces pass
  // through the generator and contribute nothing).
  dual.cell_measures.assign(nv, 0.0);
  for (const auto& e : dual.interior_edges) {
    const double v = e.measure * (0.5 * e.dist) / mesh.dim;
    dual.cell_measures[e.i] += v;
    dual.cell_measures[e.j] += v;
  }
  double total = 0.0;
  for (int i = 0; i < nv; ++i) {
    if (dual.cell_measures[i] <= 0.0)
      throw MeshError("nonpositive control volume at vertex " +
                      std::to_string(i) + " (inadmissible dual)");
    total += dual.cell_measures[i];
  }
  if (std::abs(total - omega) > 1e-9 * omega)
    throw MeshError("dual volumes do not tile the domain (got " +
                    std::to_string(total) + ", expected " +
                    std::to_string(omega) + "); circumcenter dual folds");

  // Boundary shares per (face, vertex).
  for (std::size_t b = 0; b < mesh.boundary_faces.size(); ++b) {
    const auto& f = mesh.boundary_faces[b];
    std::vector<std::pair<int, std::pair<double, double>>> shares;  // cell -> (m, dist)
    if (mesh.dim == 2) {
      const Vec3& a = mesh.vertices[f.vertices[0]];
      const Vec3& c = mesh.vertices[f.vertices[1]];
      const double len = norm(c - a);
      shares.push_back({f.vertices[0], {0.5 * len, 0.25 * len}});
      shares.push_back({f.vertices[1], {0.5 * len, 0.25 * len}});
    } else {
      const Vec3& a = mesh.vertices[f.vertices[0]];
      const Vec3& bb = mesh.vertices[f.vertices[1]];
      const Vec3& c = mesh.vertices[f.vertices[2]];
      const Vec3 nf = cross(bb - a, c - a);
      const double area2 = norm(nf);
      const Vec3 nfh = (1.0 / area2) * nf;
      const Vec3 ccf = circumcenter_triangle(a, bb, c);
      const Vec3 corners[3] = {a, bb, c};
      double sh[3];
      bool ok = true;
      for (int k = 0; k < 3; ++k) {
        const Vec3& p = corners[k];
        const Vec3 m1 = 0.5 * (p + corners[(k + 1) % 3]);
        const Vec3 m2 = 0.5 * (p + corners[(k + 2) % 3]);
        // quad p -> m1 -> ccf -> m2
        const Vec3 s = cross(m1 - p, ccf - p) + cross(ccf - p, m2 - p);
        sh[k] = 0.5 * dot(s, nfh);
        ok &= sh[k] > 0.0;
      }
      const double area = 0.5 * area2;
      if (!ok) {
        dual.warnings.push_back("obtuse boundary facet " + std::to_string(b) +
                                ": equal-split vertex shares used");
        sh[0] = sh[1] = sh[2] = area / 3.0;
      }
      for (int k = 0; k < 3; ++k) {
        const Vec3& p = corners[k];
        const Vec3 m1 = 0.5 * (p + corners[(k + 1) % 3]);
        const Vec3 m2 = 0.5 * (p + corners[(k + 2) % 3]);
        const Vec3 ctr = 0.25 * (p + m1 + ccf + m2);
        shares.push_back({f.vertices[k], {sh[k], norm(ctr - p)}});
      }
    }
    for (const auto& [cell, md] : shares) {
      const BoundaryEdge be{cell, md.first, md.second, md.first / md.second,
                            static_cast<int>(b)};
      if (f.marker == BoundaryMarker::kDirichlet)
        dual.dirichlet_edges.push_back(be);
      else
        dual.neumann_edges.push_back(be);
    }
  }

  // Adjacency and index sets.
  dual.cell_interior_edges.assign(nv, {});
  dual.cell_dirichlet_edges.assign(nv, {});
  dual.cell_neumann_edges.assign(nv, {});
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    dual.cell_interior_edges[dual.interior_edges[k].i].push_back(
        static_cast<int>(k));
    dual.cell_interior_edges[dual.interior_edges[k].j].push_back(
        static_cast<int>(k));
  }
  dual.on_dirichlet.assign(nv, 0);
  std::vector<std::uint8_t> on_neumann(nv, 0);
  for (std::size_t k = 0; k < dual.dirichlet_edges.size(); ++k) {
    dual.cell_dirichlet_edges[dual.dirichlet_edges[k].cell].push_back(
        static_cast<int>(k));
    dual.on_dirichlet[dual.dirichlet_edges[k].cell] = 1;
  }
  for (std::size_t k = 0; k < dual.neumann_edges.size(); ++k) {
    dual.cell_neumann_edges[dual.neumann_edges[k].cell].push_back(
        static_cast<int>(k));
    on_neumann[dual.neumann_edges[k].cell] = 1;
  }
  for (int i = 0; i < nv; ++i) {
    if (dual.on_dirichlet[i]) dual.dirichlet_cells.push_back(i);
    if (on_neumann[i]) dual.neumann_cells.push_back(i);
    if (dual.on_dirichlet[i] || on_neumann[i]) dual.boundary_cells.push_back(i);
  }

  // Regularity xi check (warning only): d(x_i, sigma) >= xi * diam(V_i),
  // with diam estimated from incident center distances.
  if (regularity_xi > 0.0) {
    std::vector<double> dmin(nv, 1e300), dmax(nv, 0.0);
    for (const auto& e : dual.interior_edges) {
      dmin[e.i] = std::min(dmin[e.i], 0.5 * e.dist);
      dmin[e.j] = std::min(dmin[e.j], 0.5 * e.dist);
      dmax[e.i] = std::max(dmax[e.i], e.dist);
      dmax[e.j] = std::max(dmax[e.j], e.dist);
    }
    int bad = 0;
    for (int i = 0; i < nv; ++i)
      if (dmax[i] > 0 && dmin[i] < regularity_xi * dmax[i]) ++bad;
    if (bad > 0)
      dual.warnings.push_back(
          "regularity: d(x_i, sigma) < xi*diam(V_i) at " +
          std::to_string(bad) + " cells (xi = " +
          std::to_string(regularity_xi) + ")");
  }

  return dual;
}

double DualMesh::difference(std::span<const double> u, const EdgeRef& edge,
                            std::optional<double> boundary_data) const {
  switch (edge.kind) {
    case EdgeRef::kInterior: {
      const auto& e = interior_edges[edge.index];
      const int other = (e.i == edge.cell) ? e.j : e.i;
      return u[other] - u[edge.cell];
    }
    case EdgeRef::kDirichlet: {
      if (!boundary_data)
        throw MeshError("difference: missing Dirichlet boundary data");
      return *boundary_data - u[dirichlet_edges[edge.index].cell];
    }
    case EdgeRef::kNeumann: {
      if (!boundary_data)
        throw MeshError("difference: missing Neumann boundary data");
      return *boundary_data * neumann_edges[edge.index].dist;
    }
  }
  return 0.0;
}

}  // namespace mpnp
