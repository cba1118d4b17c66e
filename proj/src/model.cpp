#include "mpnp/model.hpp"

#include <cmath>
#include <limits>

#include "mpnp/kernels/kernels.hpp"

namespace mpnp {

bool ModelSpec::is_conc_clamped(int l, int cell) const {
  if (conc_dirichlet.empty()) return false;
  return !std::isnan(conc_dirichlet[l][cell]);
}

void ModelSpec::validate(const DualMesh& dual) const {
  const std::size_t n = dual.cell_measures.size();
  if (species.empty()) throw ModelError("model: at least one species required");
  for (const auto& s : species) {
    if (!(s.a > 0.0)) throw ModelError("model: species size a must be > 0");
    if (!(s.gamma > 0.0)) throw ModelError("model: gamma must be > 0");
  }
  if (!(a0 > 0.0)) throw ModelError("model: a0 must be > 0");
  if (!(kappa > 0.0)) throw ModelError("model: kappa must be > 0");
  if (chi < 0.0) throw ModelError("model: chi must be >= 0");
  if (epsilon.size() != n || rho_f.size() != n)
    throw ModelError("model: epsilon/rho_f field size mismatch");
  for (double e : epsilon)
    if (!(e > 0.0)) throw ModelError("model: epsilon must be positive");
  if (psi_dirichlet.size() != n && !dual.dirichlet_cells.empty() &&
      !psi_dirichlet_fn)
    throw ModelError("model: missing psi Dirichlet data");
  if (!active.empty() && active.size() != n)
    throw ModelError("model: active mask size mismatch");
  if (!psi_neumann.empty() && psi_neumann.size() != dual.neumann_edges.size())
    throw ModelError("model: psi_neumann must have one entry per Neumann dual edge");
  if (!conc_dirichlet.empty() &&
      conc_dirichlet.size() != species.size())
    throw ModelError("model: conc_dirichlet per-species size mismatch");
}

void State::validate(const ModelSpec& model) const {
  const int n = num_cells();
  const int M = model.num_species();
  if (static_cast<int>(c.size()) != M)
    throw ModelError("state: species count mismatch");
  for (int l = 0; l < M; ++l)
    if (static_cast<int>(c[l].size()) != n)
      throw ModelError("state: field size mismatch");
  for (int i = 0; i < n; ++i) {
    if (!model.is_active(i)) continue;
    double w = 1.0;
    for (int l = 0; l < M; ++l) {
      if (!(c[l][i] > 0.0))
        throw ModelError("state: nonpositive concentration (species " +
                         std::to_string(l) + ", cell " + std::to_string(i) +
                         ")");
      w -= model.species[l].a3() * c[l][i];
    }
    if (!(w > 0.0))
      throw ModelError("state: nonpositive solvent fraction at cell " +
                       std::to_string(i));
  }
}

void solvent_fraction_field(const std::vector<std::vector<double>>& c,
                            const ModelSpec& model, std::vector<double>& w) {
  const int M = model.num_species();
  const std::size_t n = c.empty() ? 0 : c[0].size();
  w.resize(n);
  std::vector<const double*> ptrs(M);
  std::vector<double> a3(M);
  for (int l = 0; l < M; ++l) {
    ptrs[l] = c[l].data();
    a3[l] = model.species[l].a3();
  }
  kernels::ops().solvent_fraction(ptrs.data(), a3.data(), M, w.data(), n);
  if (!model.active.empty())
    for (std::size_t i = 0; i < n; ++i)
      if (!model.active[i]) w[i] = 1.0;
}

double solvent_concentration(const State& state, const ModelSpec& model,
                             int cell) {
  double w = 1.0;
  for (int l = 0; l < model.num_species(); ++l)
    w -= model.species[l].a3() * state.c[l][cell];
  return w / model.a03();
}

double born_coefficient(const ModelSpec& model, int l, int cell) {
  const double z = model.species[l].z;
  return model.chi * z * z / model.species[l].a *
         (1.0 / model.epsilon[cell] - 1.0);
}

double chemical_potential(const State& state, const ModelSpec& model, int l,
                          int cell) {
  const double cl = state.c[l][cell];
  double w = 1.0;
  for (int k = 0; k < model.num_species(); ++k)
    w -= model.species[k].a3() * state.c[k][cell];
  if (!(cl > 0.0) || !(w > 0.0))
    throw ModelError("chemical_potential: log domain violated at cell " +
                     std::to_string(cell));
  const double a3 = model.species[l].a3();
  return model.species[l].z * state.psi[cell] + std::log(a3 * cl) -
         a3 / model.a03() * std::log(w) + born_coefficient(model, l, cell);
}

void chemical_potential_field(const State& state, const ModelSpec& model,
                              int l, std::vector<double>& mu) {
  const std::size_t n = state.psi.size();
  mu.resize(n);
  static thread_local std::vector<double> w, logc, logw;
  solvent_fraction_field(state.c, model, w);
  logc.resize(n);
  logw.resize(n);
  kernels::ops().log_batch(state.c[l].data(), logc.data(), n);
  kernels::ops().log_batch(w.data(), logw.data(), n);
  const double a3 = model.species[l].a3();
  const double la3 = std::log(a3);
  const double ratio = a3 / model.a03();
  const double z = model.species[l].z;
  for (std::size_t i = 0; i < n; ++i) {
    if (!model.is_active(static_cast<int>(i))) continue;
    mu[i] = z * state.psi[i] + logc[i] + la3 - ratio * logw[i] +
            born_coefficient(model, l, static_cast<int>(i));
  }
}

double edge_dielectric(std::span<const double> epsilon,
                       const InteriorEdge& e) {
  const double ei = epsilon[e.i], ej = epsilon[e.j];
  return 2.0 * ei * ej / (ei + ej);
}

double edge_dielectric(std::span<const double> epsilon,
                       const BoundaryEdge& e) {
  return epsilon[e.cell];
}

std::vector<double> dirichlet_boundary_flux(const State& state,
                                            const DualMesh& dual,
                                            const ModelSpec& model) {
  std::vector<double> flux(dual.num_cells(), 0.0);
  for (int i : dual.dirichlet_cells) {
    double lap = 0.0;  // (L psi)_i = kappa sum tau eps (psi_i - psi_j)
    for (int eid : dual.cell_interior_edges[i]) {
      const auto& e = dual.interior_edges[eid];
      const int j = (e.i == i) ? e.j : e.i;
      lap += model.kappa * e.tau * edge_dielectric(model.epsilon, e) *
             (state.psi[i] - state.psi[j]);
    }
    double g = 0.0;
    if (!model.psi_neumann.empty())
      for (int eid : dual.cell_neumann_edges[i])
        g += dual.neumann_edges[eid].measure * model.psi_neumann[eid];
    double rho = model.rho_f[i];
    if (model.is_active(i))
      for (int l = 0; l < model.num_species(); ++l)
        rho += model.species[l].z * state.c[l][i];
    flux[i] = lap - dual.cell_measures[i] * rho - g;
  }
  return flux;
}

double discrete_energy(const State& state, const DualMesh& dual,
                       const ModelSpec& model) {
  const int n = dual.num_cells();
  const int M = model.num_species();
  const auto& m = dual.cell_measures;

  // Electrostatic: 1/2 sum m rho psi.
  double elec = 0.0;
  for (int i = 0; i < n; ++i) {
    double rho = model.rho_f[i];
    if (model.is_active(i))
      for (int l = 0; l < M; ++l) rho += model.species[l].z * state.c[l][i];
    elec += 0.5 * m[i] * rho * state.psi[i];
  }

  // Entropy of ions and solvent, and Born energy, over active cells.
  static thread_local std::vector<double> w, mgather, cgather;
  solvent_fraction_field(state.c, model, w);

  const bool all_active = model.active.empty();
  double entropy = 0.0, born = 0.0;
  if (all_active) {
    for (int l = 0; l < M; ++l)
      entropy += kernels::ops().entropy_weighted_sum(
          m.data(), state.c[l].data(), std::log(model.species[l].a3()),
          static_cast<std::size_t>(n));
    entropy += kernels::ops().entropy_weighted_sum(
                   m.data(), w.data(), 0.0, static_cast<std::size_t>(n)) /
               model.a03();
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i)
        born += m[i] * born_coefficient(model, l, i) * state.c[l][i];
  } else {
    std::vector<int> act;
    for (int i = 0; i < n; ++i)
      if (model.active[i]) act.push_back(i);
    mgather.resize(act.size());
    cgather.resize(act.size());
    for (std::size_t k = 0; k < act.size(); ++k) mgather[k] = m[act[k]];
    for (int l = 0; l < M; ++l) {
      for (std::size_t k = 0; k < act.size(); ++k)
        cgather[k] = state.c[l][act[k]];
      entropy += kernels::ops().entropy_weighted_sum(
          mgather.data(), cgather.data(), std::log(model.species[l].a3()),
          act.size());
      for (int i : act)
        born += m[i] * born_coefficient(model, l, i) * state.c[l][i];
    }
    for (std::size_t k = 0; k < act.size(); ++k) cgather[k] = w[act[k]];
    entropy += kernels::ops().entropy_weighted_sum(mgather.data(),
                                                   cgather.data(), 0.0,
                                                   act.size()) /
               model.a03();
  }

  // Boundary terms: prescribed Neumann flux and the recovered Dirichlet flux.
  double bnd = 0.0;
  if (!model.psi_neumann.empty())
    for (std::size_t k = 0; k < dual.neumann_edges.size(); ++k)
      bnd += 0.5 * dual.neumann_edges[k].measure * model.psi_neumann[k] *
             state.psi[dual.neumann_edges[k].cell];
  const auto flux = dirichlet_boundary_flux(state, dual, model);
  for (int i : dual.dirichlet_cells)
    bnd -= 0.5 * state.psi[i] * flux[i];

  return elec + entropy + born + bnd;
}

}  // namespace mpnp
