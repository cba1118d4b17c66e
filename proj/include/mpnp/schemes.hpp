#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <vector>

#include "mpnp/model.hpp"
#include "mpnp/reconstruction.hpp"

namespace mpnp {

enum class Scheme { kI, kII };

/// Positive extrapolation to level n+1/2:
/// (3c^n - c^{n-1})/2 when 3c^n > c^{n-1}, else (c^n)^{3/2}/(c^{n-1})^{1/2}.
double extrapolated_concentration(double c_n, double c_nm1);

/// Truncated-Taylor entropy potential of the second-order scheme.
double mu_e1(double c_np1, double c_n, double a3);

/// Steric counterpart; c arrays hold per-species values at one cell.
double mu_e2(std::span<const double> c_np1, std::span<const double> c_n,
             int species, const ModelSpec& model);

/// Immutable assembly context for one (mesh, model, stencil) triple.
/// Precomputes edge dielectrics, Born coefficients, and the subset of dual
/// edges carrying ion flux (both cells active).
struct Discretization {
  const SimplicialMesh* mesh;
  const DualMesh* dual;
  const ModelSpec* model;
  const StencilTable* stencils;
  double beta;

  std::vector<int> np_edges;  // ids into dual->interior_edges
  std::vector<std::vector<int>> cell_np_edges;
  std::vector<double> eps_edge;            // per interior edge
  std::vector<std::vector<double>> born;   // [M][N]
  std::vector<double> neumann_flux;        // per cell: sum m(sigma) psi^N

  Discretization(const SimplicialMesh& mesh, const DualMesh& dual,
                 const ModelSpec& model, const StencilTable& stencils,
                 double beta = 2.0);

  int num_cells() const { return dual->num_cells(); }
  int num_species() const { return model->num_species(); }
  int num_unknowns() const {
    return (num_species() + 1) * num_cells();
  }
  int idx_c(int l, int i) const { return l * num_cells() + i; }
  int idx_psi(int i) const { return num_species() * num_cells() + i; }
};

/// Frozen upwinded face mobilities for one step, per species and NP edge.
struct FaceMobilities {
  std::vector<std::vector<double>> value;      // [M][np_edges]
  std::vector<std::vector<std::uint8_t>> from_i;
};

/// Single-edge upwinded mobility (Scheme I); mu_n is the full chemical
/// potential field at level n. Dmu < 0 upwinds from i, Dmu >= 0 from j.
double upwind_mobility_I(const Discretization& disc, const State& state_n,
                         const std::vector<std::vector<double>>& mu_n,
                         int np_edge, int species);

FaceMobilities compute_mobilities(const Discretization& disc,
                                  const State& state_n, const State* state_nm1,
                                  Scheme scheme);

/// Nonlinear residual system of one implicit step. Unknown layout:
/// [c^1 (N), ..., c^M (N), psi (N)]. Clamped and inactive entries carry
/// identity rows.
class ResidualSystem {
 public:
  ResidualSystem(const Discretization& disc, Scheme scheme, double dt,
                 const State& state_n, const State* state_nm1);

  int size() const { return disc_->num_unknowns(); }
  const Discretization& disc() const { return *disc_; }
  Scheme scheme() const { return scheme_; }
  double dt() const { return dt_; }
  const FaceMobilities& mobilities() const { return mob_; }

  Eigen::VectorXd initial_guess() const;

  void residual(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  void jacobian(const Eigen::VectorXd& x,
                std::vector<Eigen::Triplet<double>>& out) const;

  /// Scheme flux potentials mu^{l,n+1} / mu^{l,n+1/2} at x.
  void mu_fields(const Eigen::VectorXd& x,
                 std::vector<std::vector<double>>& mu) const;

  /// Explicit flux-form concentration update evaluated at the converged x;
  /// makes discrete mass conservation exact to roundoff.
  void flux_update(const Eigen::VectorXd& x,
                   std::vector<std::vector<double>>& c_out) const;

  /// dt * sum_l gamma_l sum_sigma tau mob |D mu|^2 at x (Eq. 17/18 RHS).
  double dissipation_bound(const Eigen::VectorXd& x) const;

  /// True where the unknown is pinned (Dirichlet clamp or inactive cell).
  const std::vector<std::uint8_t>& pinned() const { return pinned_; }

  const std::vector<std::vector<double>>& c_n() const { return c_n_; }

 private:
  void eval_w(const Eigen::VectorXd& x, std::vector<double>& w) const;

  const Discretization* disc_;
  Scheme scheme_;
  double dt_;
  double t_new_;
  std::vector<std::vector<double>> c_n_;
  std::vector<double> psi_n_, w_n_;
  std::vector<std::vector<double>> c_nm1_;
  FaceMobilities mob_;
  std::vector<double> rho_f_;                  // at t^{n+1}
  std::vector<std::vector<double>> source_;    // m_i f_l at scheme time
  std::vector<double> psi_clamp_;              // at t^{n+1}
  std::vector<std::uint8_t> pinned_;
  std::vector<double> pinned_value_;
};

ResidualSystem assemble_scheme_I(const Discretization& disc,
                                 const State& state_n, double dt);
ResidualSystem assemble_scheme_II(const Discretization& disc,
                                  const State& state_n, const State& state_nm1,
                                  double dt);

}  // namespace mpnp
