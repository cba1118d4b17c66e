#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpnp/scenarios.hpp"

namespace mpnp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parsed `run`/`steady` configuration. JSON with a versioned schema;
/// unknown keys are rejected.
struct RunConfig {
  // mesh
  std::optional<std::string> mesh_file;
  bool mesh_3d = false;
  std::array<int, 3> mesh_n{10, 10, 0};
  Box mesh_box;
  std::string dirichlet_where;  // predicate on face centroids (generator)

  // model
  std::vector<SpeciesSpec> species;
  double a0 = 0.3, kappa = 1.0, chi = 0.0;
  std::string epsilon_expr = "1";
  std::string rho_f_expr = "0";
  std::string psi_dirichlet_expr = "0";
  std::string psi_neumann_expr;  // empty: zero
  double voltage = 0.0;          // bound to V in expressions
  std::string solute_where;      // optional inactive region
  double epsilon_solute = 2.0;
  std::string conc_dirichlet_where;
  std::vector<double> conc_dirichlet_values;

  // initial data: one constant or expression per species
  std::vector<std::string> initial_conc;

  // scheme + solver
  Scheme scheme = Scheme::kI;
  double dt = 0.0;
  double t_end = 0.0;
  double beta = 2.0;
  NewtonConfig newton;

  // output
  std::string diagnostics_csv = "diagnostics.csv";
  std::string fields_out = "fields_final.txt";
  int field_stride = 0;  // 0: final only

  // assertions
  bool assert_mass = true;
  bool assert_energy = true;
  bool assert_positivity = true;

  // steady subcommand extras
  std::vector<double> mass_targets;

  std::unique_ptr<scenarios::Scenario> build() const;
};

RunConfig load_run_config(const std::string& path);

struct ConvergenceConfig {
  Scheme scheme = Scheme::kI;
  scenarios::MeshRatioRule rule = scenarios::MeshRatioRule::kDtH2;
  std::vector<int> levels;
  double T = 0.1;
  double beta = 2.0;
  // optional pure-temporal study
  int temporal_n = 0;
  std::vector<double> temporal_dts;
};

ConvergenceConfig load_convergence_config(const std::string& path);

struct IvConfig {
  scenarios::NanoporeParams base;
  std::vector<double> voltages;
  Scheme scheme = Scheme::kII;
  double dt = 0.05;
  double t_max = 20.0;
  double steady_tol = 1e-7;
};

IvConfig load_iv_config(const std::string& path);

namespace cli {

struct Options {
  std::string config_path;
  std::string out_dir = ".";
  int threads = 1;
  bool assertions = true;
};

/// Exit codes: 0 success, 2 config error, 3 solver failure,
/// 4 assertion failure.
int cmd_run(const Options& opt);
int cmd_convergence(const Options& opt);
int cmd_iv(const Options& opt);
int cmd_steady(const Options& opt);

}  // namespace cli
}  // namespace mpnp
