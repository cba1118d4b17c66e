#include "mpnp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace mpnp {

DiagnosticsRecord make_record(const State& state, const DualMesh& dual,
                              const ModelSpec& model, const StepInfo* step,
                              double state_change) {
  DiagnosticsRecord rec;
  rec.time = state.time;
  rec.F = discrete_energy(state, dual, model);
  rec.state_change = state_change;
  rec.has_sources = !model.sources.empty();

  const int M = model.num_species();
  const int n = dual.num_cells();
  rec.mass.assign(M, 0.0);
  rec.c_min = std::numeric_limits<double>::infinity();
  rec.solvent_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (!model.is_active(i)) continue;
    double w = 1.0;
    for (int l = 0; l < M; ++l) {
      rec.mass[l] += dual.cell_measures[i] * state.c[l][i];
      rec.c_min = std::min(rec.c_min, state.c[l][i]);
      w -= model.species[l].a3() * state.c[l][i];
    }
    rec.solvent_min = std::min(rec.solvent_min, w / model.a03());
  }

  rec.steady_residual = 0.0;
  std::vector<double> mu;
  for (int l = 0; l < M; ++l) {
    chemical_potential_field(state, model, l, mu);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < n; ++i) {
      if (!model.is_active(i)) continue;
      lo = std::min(lo, mu[i]);
      hi = std::max(hi, mu[i]);
    }
    rec.steady_residual = std::max(rec.steady_residual, hi - lo);
  }

  if (step) {
    rec.dissipation_bound = step->dissipation_bound;
    rec.newton_iters = step->newton_iters;
  }
  return rec;
}

DissipationVerdict check_dissipation(const DiagnosticsRecord& prev,
                                     const DiagnosticsRecord& curr,
                                     double slack) {
  if (curr.has_sources || prev.has_sources) return DissipationVerdict::kSkipped;
  return curr.F - prev.F <= -curr.dissipation_bound + slack
             ? DissipationVerdict::kPass
             : DissipationVerdict::kFail;
}

bool detect_steady(std::span<const DiagnosticsRecord> history, double tol) {
  if (history.size() < 2) return false;
  const auto& last = history.back();
  return last.steady_residual <= tol && last.state_change <= tol;
}

double state_distance(const State& a, const State& b) {
  double d = 0.0;
  for (std::size_t l = 0; l < a.c.size(); ++l)
    for (std::size_t i = 0; i < a.c[l].size(); ++i)
      d = std::max(d, std::abs(a.c[l][i] - b.c[l][i]));
  for (std::size_t i = 0; i < a.psi.size(); ++i)
    d = std::max(d, std::abs(a.psi[i] - b.psi[i]));
  return d;
}

DiagnosticsCsv::DiagnosticsCsv(const std::string& path, int num_species)
    : out_(path), num_species_(num_species) {
  if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
  out_ << "time,F";
  for (int l = 1; l <= num_species_; ++l) out_ << ",mass_" << l;
  out_ << ",c_min,solvent_min,dissipation_bound,newton_iters,steady_residual\n";
}

void DiagnosticsCsv::write(const DiagnosticsRecord& rec) {
  char buf[64];
  const auto put = [&](double v, bool comma = true) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (comma) out_ << ',';
    out_ << buf;
  };
  put(rec.time, false);
  put(rec.F);
  for (int l = 0; l < num_species_; ++l) put(rec.mass[l]);
  put(rec.c_min);
  put(rec.solvent_min);
  put(rec.dissipation_bound);
  out_ << ',' << rec.newton_iters;
  put(rec.steady_residual);
  out_ << '\n';
  out_.flush();
}

}  // namespace mpnp
