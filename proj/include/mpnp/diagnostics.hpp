#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "mpnp/model.hpp"
#include "mpnp/solver.hpp"

namespace mpnp {

/// Per-step conserved/dissipated quantities: the runtime-checkable form of
/// the schemes' structural guarantees.
struct DiagnosticsRecord {
  double time = 0.0;
  double F = 0.0;                     // discrete free energy
  std::vector<double> mass;           // per species, over active cells
  double c_min = 0.0;                 // min over species and active cells
  double solvent_min = 0.0;           // min solvent concentration c^0
  double dissipation_bound = 0.0;     // RHS of the step that produced this state
  int newton_iters = 0;
  double steady_residual = 0.0;       // max_l spread of mu^l
  double state_change = 0.0;          // inf-norm change vs previous state
  bool has_sources = false;           // sources void the dissipation law
};

DiagnosticsRecord make_record(const State& state, const DualMesh& dual,
                              const ModelSpec& model,
                              const StepInfo* step = nullptr,
                              double state_change = 0.0);

enum class DissipationVerdict { kPass, kFail, kSkipped };

/// F^{n+1} - F^n <= -(dissipation bound) + slack; SKIPPED when sources are
/// present (the law's hypotheses fail).
DissipationVerdict check_dissipation(const DiagnosticsRecord& prev,
                                     const DiagnosticsRecord& curr,
                                     double slack = 1e-10);

/// Steady iff the last record has uniform chemical potentials and the state
/// stopped moving.
bool detect_steady(std::span<const DiagnosticsRecord> history, double tol);

/// Inf-norm distance between two states (all species + potential).
double state_distance(const State& a, const State& b);

/// Streams records to CSV: one row per step, fixed column order,
/// 17 significant digits.
class DiagnosticsCsv {
 public:
  DiagnosticsCsv(const std::string& path, int num_species);
  void write(const DiagnosticsRecord& rec);

 private:
  std::ofstream out_;
  int num_species_;
};

}  // namespace mpnp
