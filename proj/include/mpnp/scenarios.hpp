#pragma once

#include <memory>
#include <vector>

#include "mpnp/diagnostics.hpp"
#include "mpnp/solver.hpp"

namespace mpnp {
namespace scenarios {

/// Exact solution, coefficients, and hand-derived source terms of the 2D
/// two-species accuracy study (smooth cosine fields with a steep logistic
/// dielectric profile). Everything is a closed form; the self-test in the
/// test suite differentiates the fluxes independently with second-order
/// jets.
struct Manufactured {
  static constexpr double a0 = 0.3, a1 = 0.1, a2 = 0.2;
  static constexpr double kappa = 1.0, chi = 1.0;

  static double c1(double x, double y, double t);
  static double c2(double x, double y, double t);
  static double psi(double x, double y, double t);

  static double eps(double x);
  static double deps(double x);    // d eps / dx
  static double d2eps(double x);   // d^2 eps / dx^2

  static double f1(double x, double y, double t);
  static double f2(double x, double y, double t);
  static double rho_f(double x, double y, double t);
};

/// A fully assembled simulation: mesh, dual, stencils, model, and the
/// initial state (psi solved from the discrete Poisson equation).
/// Heap-allocated and pinned: the Discretization points into the members.
struct Scenario {
  SimplicialMesh mesh;
  DualMesh dual;
  StencilTable stencils;
  ModelSpec model;
  std::unique_ptr<Discretization> disc;
  State initial;

  // nanopore extras
  std::vector<int> cross_np_edges;  // np-edge ids straddling the cut plane
  std::vector<int> cross_sign;      // +1 when cell i sits below the plane

  Scenario() = default;
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;
};

/// Accuracy study domain [0,1]^2 with n cells per axis; Dirichlet potential
/// on x in {0,1}, zero Neumann on y in {0,1}, zero-flux concentrations.
std::unique_ptr<Scenario> make_manufactured(int n, double beta = 2.0);

/// Performance/property run: Gaussian fixed charges, logistic dielectric,
/// kappa = 1e-3, chi = 10, unit applied potential across x.
std::unique_ptr<Scenario> make_property2d(int n, double beta = 2.0);

struct NanoporeParams {
  std::array<int, 3> n{8, 8, 16};
  double voltage = 5.0;
  double pore_radius = 0.25;
  double slab_lo = 0.3, slab_hi = 0.9;
  double a0 = 0.3;  // solvent size; same default as the 2D studies
  double beta = 2.0;
};

/// 3D nanopore: two reservoirs joined by a pore through a low-dielectric
/// membrane slab; three ionic species, asymmetric z-dependent dielectric.
std::unique_ptr<Scenario> make_nanopore(const NanoporeParams& params);

struct ConvergenceRow {
  double h = 0.0;
  double dt = 0.0;
  double err_c1 = 0.0, err_c2 = 0.0, err_psi = 0.0;
};

enum class MeshRatioRule { kDtH2, kDtHOver10 };

/// l2 errors against the exact solution at T = 0.1 per refinement level
/// (h = 1/n). A solver failure aborts with the rows finished so far.
std::vector<ConvergenceRow> run_convergence(Scheme scheme, MeshRatioRule rule,
                                            const std::vector<int>& levels,
                                            double T = 0.1, double beta = 2.0);

/// Temporal self-convergence on a fixed mesh: errors at T against a
/// reference run with dt_ref = min(dt)/8.
std::vector<ConvergenceRow> run_temporal_refinement(
    Scheme scheme, int n, const std::vector<double>& dts, double T = 0.1);

/// log2(e_h / e_{h/2}) column; entry k compares rows k-1 and k.
std::vector<double> observed_orders(const std::vector<double>& errors);

/// Species flux through the scenario's cross-section, positive along +z,
/// evaluated from the state with Scheme-I-style upwinded mobilities.
double ionic_current(const Scenario& scn, const State& state, int species);

/// r(V) = |I(-V) / I(V)|; throws on I(V) == 0.
double rectification_ratio(double current_neg_v, double current_pos_v);

struct IvPoint {
  double voltage;
  std::vector<double> current;  // per species
};

/// Runs each voltage to steady state and tabulates currents. `threads`
/// voltage points run concurrently (results deterministic per point).
std::vector<IvPoint> iv_sweep(const NanoporeParams& base,
                              const std::vector<double>& voltages, Scheme scheme,
                              double dt, double t_max, double steady_tol,
                              int threads = 1);

/// Plain text field dump: one "id x y z c_1 .. c_M psi" row per cell.
void write_field_dump(const std::string& path, const State& state,
                      const DualMesh& dual, const ModelSpec& model);

}  // namespace scenarios
}  // namespace mpnp
