#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpnp/mesh.hpp"

namespace mpnp {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One ionic species: valence, linear size, mobility coefficient.
struct SpeciesSpec {
  int z = 0;
  double a = 0.1;
  double gamma = 1.0;

  double a3() const { return a * a * a; }
};

/// Nondimensional model data compiled onto a specific mesh: coefficients,
/// per-cell fields, and boundary data. Immutable during a simulation except
/// for the optional time-dependent callbacks, which the schemes sample as
/// needed.
struct ModelSpec {
  std::vector<SpeciesSpec> species;
  double a0 = 0.3;
  double kappa = 1.0;
  double chi = 0.0;

  std::vector<double> epsilon;  // per cell, 0 < eps_min <= eps_i
  std::vector<double> rho_f;    // per cell (at t = 0 if time-dependent)

  /// psi Dirichlet data per cell (read only where the dual marks the cell
  /// as touching a Dirichlet face) and psi^N_sigma per Neumann dual edge.
  std::vector<double> psi_dirichlet;
  std::vector<double> psi_neumann;

  /// Cells carrying ions. Inactive cells (e.g. the solute region of the
  /// nanopore) hold no concentration unknowns and contribute only rho_f
  /// to the Poisson equation.
  std::vector<std::uint8_t> active;

  /// Optional per-(species, cell) concentration clamps; NaN = free.
  /// Concentration boundary conditions are zero-flux everywhere except
  /// where these clamps apply.
  std::vector<std::vector<double>> conc_dirichlet;

  /// Time-dependent overrides. When set, they are evaluated at the cell
  /// centers at the times required by the scheme.
  std::function<double(const Vec3&, double)> rho_f_fn;
  std::function<double(const Vec3&, double)> psi_dirichlet_fn;
  std::vector<std::function<double(const Vec3&, double)>> sources;

  int num_species() const { return static_cast<int>(species.size()); }
  double a03() const { return a0 * a0 * a0; }

  bool is_active(int cell) const {
    return active.empty() || active[cell] != 0;
  }
  bool is_conc_clamped(int l, int cell) const;

  void validate(const DualMesh& dual) const;
};

/// Concentrations and potential at one time level.
struct State {
  std::vector<std::vector<double>> c;  // [M][N]
  std::vector<double> psi;             // [N]
  double time = 0.0;

  int num_cells() const { return static_cast<int>(psi.size()); }

  /// Enforces c > 0 and positive solvent fraction on active cells.
  void validate(const ModelSpec& model) const;
};

/// w_i = 1 - sum_k a_k^3 c^k_i for every cell (1 on inactive cells).
void solvent_fraction_field(const std::vector<std::vector<double>>& c,
                            const ModelSpec& model, std::vector<double>& w);

/// c^0_i = a_0^{-3} (1 - sum_k a_k^3 c^k_i).
double solvent_concentration(const State& state, const ModelSpec& model,
                             int cell);

/// Born solvation coefficient chi (z^l)^2 / a_l * (1/eps_i - 1).
double born_coefficient(const ModelSpec& model, int l, int cell);

/// Full chemical potential mu^l_i = z psi + log(a^3 c) - (a^3/a0^3) log w + Born.
double chemical_potential(const State& state, const ModelSpec& model, int l,
                          int cell);

/// Batched version over all cells (inactive cells left untouched).
void chemical_potential_field(const State& state, const ModelSpec& model,
                              int l, std::vector<double>& mu);

/// Harmonic mean of the cell dielectric across an interior edge.
double edge_dielectric(std::span<const double> epsilon, const InteriorEdge& e);
/// Boundary edges carry the adjacent cell value.
double edge_dielectric(std::span<const double> epsilon, const BoundaryEdge& e);

/// Net discrete flux of kappa eps grad(psi) out through the Dirichlet
/// boundary pieces of each Dirichlet cell (zero elsewhere). Recovered from
/// the cell balance; this is the quantity multiplying psi^D in the energy.
std::vector<double> dirichlet_boundary_flux(const State& state,
                                            const DualMesh& dual,
                                            const ModelSpec& model);

/// Discrete free energy F^n: electrostatic + ion/solvent entropy + Born
/// + boundary terms.
double discrete_energy(const State& state, const DualMesh& dual,
                       const ModelSpec& model);

}  // namespace mpnp
