#include "mpnp/schemes.hpp"

#include <cmath>

#include "mpnp/kernels/kernels.hpp"

namespace mpnp {

double extrapolated_concentration(double c_n, double c_nm1) {
  if (3.0 * c_n > c_nm1) return 0.5 * (3.0 * c_n - c_nm1);
  return c_n * std::sqrt(c_n / c_nm1);
}

double mu_e1(double c_np1, double c_n, double a3) {
  const double r = (c_np1 - c_n) / c_np1;
  return std::log(a3 * c_np1) - 0.5 * r - r * r / 6.0;
}

double mu_e2(std::span<const double> c_np1, std::span<const double> c_n,
             int species, const ModelSpec& model) {
  double w1 = 1.0, w0 = 1.0;
  for (int k = 0; k < model.num_species(); ++k) {
    w1 -= model.species[k].a3() * c_np1[k];
    w0 -= model.species[k].a3() * c_n[k];
  }
  if (!(w1 > 0.0) || !(w0 > 0.0))
    throw ModelError("mu_e2: nonpositive solvent fraction");
  const double s = w0 - w1;  // = sum a^3 (c^{n+1} - c^n)
  const double r = s / w1;
  return model.species[species].a3() / model.a03() *
         (-std::log(w1) - 0.5 * r + r * r / 6.0);
}

Discretization::Discretization(const SimplicialMesh& m, const DualMesh& d,
                               const ModelSpec& mod, const StencilTable& st,
                               double b)
    : mesh(&m), dual(&d), model(&mod), stencils(&st), beta(b) {
  if (beta < 1.0 || beta > 2.0)
    throw ModelError("limiter beta must lie in [1,2]");
  const int n = d.num_cells();
  const int M = mod.num_species();

  eps_edge.resize(d.interior_edges.size());
  for (std::size_t k = 0; k < d.interior_edges.size(); ++k)
    eps_edge[k] = edge_dielectric(mod.epsilon, d.interior_edges[k]);

  cell_np_edges.assign(n, {});
  for (std::size_t k = 0; k < d.interior_edges.size(); ++k) {
    const auto& e = d.interior_edges[k];
    if (mod.is_active(e.i) && mod.is_active(e.j)) {
      np_edges.push_back(static_cast<int>(k));
      cell_np_edges[e.i].push_back(static_cast<int>(np_edges.size()) - 1);
      cell_np_edges[e.j].push_back(static_cast<int>(np_edges.size()) - 1);
    }
  }

  born.assign(M, std::vector<double>(n));
  for (int l = 0; l < M; ++l)
    for (int i = 0; i < n; ++i) born[l][i] = born_coefficient(mod, l, i);

  neumann_flux.assign(n, 0.0);
  if (!mod.psi_neumann.empty())
    for (std::size_t k = 0; k < d.neumann_edges.size(); ++k)
      neumann_flux[d.neumann_edges[k].cell] +=
          d.neumann_edges[k].measure * mod.psi_neumann[k];
}

double upwind_mobility_I(const Discretization& disc, const State& state_n,
                         const std::vector<std::vector<double>>& mu_n,
                         int np_edge, int species) {
  const int eid = disc.np_edges[np_edge];
  const auto& e = disc.dual->interior_edges[eid];
  const double dmu = mu_n[species][e.j] - mu_n[species][e.i];
  const int from = dmu < 0.0 ? e.i : e.j;
  const auto& st = disc.stencils->get(eid, from, e);
  return reconstruct_face_value(state_n.c[species], e, st, from, disc.beta);
}

FaceMobilities compute_mobilities(const Discretization& disc,
                                  const State& state_n, const State* state_nm1,
                                  Scheme scheme) {
  const int M = disc.num_species();
  const int n = disc.num_cells();

  std::vector<std::vector<double>> mu_n(M);
  for (int l = 0; l < M; ++l)
    chemical_potential_field(state_n, *disc.model, l, mu_n[l]);

  std::vector<std::vector<double>> field(M);
  if (scheme == Scheme::kI) {
    for (int l = 0; l < M; ++l) field[l] = state_n.c[l];
  } else {
    if (!state_nm1)
      throw ModelError("Scheme II mobilities require the previous state");
    for (int l = 0; l < M; ++l) {
      field[l].resize(n, 0.0);
      for (int i = 0; i < n; ++i)
        if (disc.model->is_active(i))
          field[l][i] =
              extrapolated_concentration(state_n.c[l][i], state_nm1->c[l][i]);
    }
  }

  FaceMobilities mob;
  mob.value.assign(M, std::vector<double>(disc.np_edges.size()));
  mob.from_i.assign(M, std::vector<std::uint8_t>(disc.np_edges.size()));
  for (std::size_t k = 0; k < disc.np_edges.size(); ++k) {
    const int eid = disc.np_edges[k];
    const auto& e = disc.dual->interior_edges[eid];
    for (int l = 0; l < M; ++l) {
      const double dmu = mu_n[l][e.j] - mu_n[l][e.i];
      const int from = dmu < 0.0 ? e.i : e.j;
      mob.from_i[l][k] = (from == e.i);
      const auto& st = disc.stencils->get(eid, from, e);
      mob.value[l][k] =
          reconstruct_face_value(field[l], e, st, from, disc.beta);
    }
  }
  return mob;
}

ResidualSystem::ResidualSystem(const Discretization& disc, Scheme scheme,
                               double dt, const State& state_n,
                               const State* state_nm1)
    : disc_(&disc),
      scheme_(scheme),
      dt_(dt),
      t_new_(state_n.time + dt),
      c_n_(state_n.c),
      psi_n_(state_n.psi) {
  const auto& model = *disc.model;
  const auto& dual = *disc.dual;
  const int n = disc.num_cells();
  const int M = disc.num_species();

  solvent_fraction_field(c_n_, model, w_n_);
  if (scheme == Scheme::kII) c_nm1_ = state_nm1->c;
  mob_ = compute_mobilities(disc, state_n, state_nm1, scheme);

  rho_f_ = model.rho_f;
  if (model.rho_f_fn)
    for (int i = 0; i < n; ++i)
      rho_f_[i] = model.rho_f_fn(dual.centers[i], t_new_);

  if (!model.sources.empty()) {
    const double t_src = scheme == Scheme::kI ? t_new_ : t_new_ - 0.5 * dt;
    source_.assign(M, std::vector<double>(n, 0.0));
    for (int l = 0; l < M; ++l)
      if (model.sources[l])
        for (int i = 0; i < n; ++i)
          if (model.is_active(i))
            source_[l][i] = dual.cell_measures[i] *
                            model.sources[l](dual.centers[i], t_src);
  }

  psi_clamp_.assign(n, 0.0);
  for (int i : dual.dirichlet_cells)
    psi_clamp_[i] = model.psi_dirichlet_fn
                        ? model.psi_dirichlet_fn(dual.centers[i], t_new_)
                        : model.psi_dirichlet[i];

  pinned_.assign(disc.num_unknowns(), 0);
  pinned_value_.assign(disc.num_unknowns(), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < M; ++l) {
      if (!model.is_active(i)) {
        pinned_[disc.idx_c(l, i)] = 1;
        pinned_value_[disc.idx_c(l, i)] = 0.0;
      } else if (model.is_conc_clamped(l, i)) {
        pinned_[disc.idx_c(l, i)] = 1;
        pinned_value_[disc.idx_c(l, i)] = model.conc_dirichlet[l][i];
      }
    }
    if (dual.on_dirichlet[i]) {
      pinned_[disc.idx_psi(i)] = 1;
      pinned_value_[disc.idx_psi(i)] = psi_clamp_[i];
    }
  }
}

Eigen::VectorXd ResidualSystem::initial_guess() const {
  const int n = disc_->num_cells();
  const int M = disc_->num_species();
  Eigen::VectorXd x(size());
  for (int l = 0; l < M; ++l)
    for (int i = 0; i < n; ++i) {
      double g = c_n_[l][i];
      if (scheme_ == Scheme::kII && disc_->model->is_active(i)) {
        // positive extrapolation predictor, clamped to the admissible set
        const double p = c_n_[l][i] > 0.0 && c_nm1_[l][i] > 0.0
                             ? (2.0 * c_n_[l][i] > c_nm1_[l][i]
                                    ? 2.0 * c_n_[l][i] - c_nm1_[l][i]
                                    : c_n_[l][i] * (c_n_[l][i] / c_nm1_[l][i]))
                             : c_n_[l][i];
        g = p > 0.0 ? p : c_n_[l][i];
      }
      x[disc_->idx_c(l, i)] = g;
    }
  // fall back where the predictor exits the admissible set
  if (scheme_ == Scheme::kII) {
    for (int i = 0; i < n; ++i) {
      if (!disc_->model->is_active(i)) continue;
      double w = 1.0;
      for (int l = 0; l < M; ++l)
        w -= disc_->model->species[l].a3() * x[disc_->idx_c(l, i)];
      if (!(w > 0.0))
        for (int l = 0; l < M; ++l) x[disc_->idx_c(l, i)] = c_n_[l][i];
    }
  }
  for (int i = 0; i < n; ++i) x[disc_->idx_psi(i)] = psi_n_[i];
  for (int k = 0; k < size(); ++k)
    if (pinned_[k]) x[k] = pinned_value_[k];
  return x;
}

void ResidualSystem::eval_w(const Eigen::VectorXd& x,
                            std::vector<double>& w) const {
  const int n = disc_->num_cells();
  const int M = disc_->num_species();
  std::vector<const double*> ptrs(M);
  std::vector<double> a3(M);
  for (int l = 0; l < M; ++l) {
    ptrs[l] = x.data() + disc_->idx_c(l, 0);
    a3[l] = disc_->model->species[l].a3();
  }
  w.resize(n);
  kernels::ops().solvent_fraction(ptrs.data(), a3.data(), M, w.data(), n);
}

void ResidualSystem::mu_fields(const Eigen::VectorXd& x,
                               std::vector<std::vector<double>>& mu) const {
  const int n = disc_->num_cells();
  const int M = disc_->num_species();
  const auto& model = *disc_->model;

  static thread_local std::vector<double> w, logw, e2, tmp;
  eval_w(x, w);
  for (int i = 0; i < n; ++i)
    if (!model.is_active(i)) w[i] = 1.0;

  mu.assign(M, std::vector<double>(n, 0.0));
  if (scheme_ == Scheme::kI) {
    logw.resize(n);
    kernels::ops().log_batch(w.data(), logw.data(), n);
    tmp.resize(n);
    for (int l = 0; l < M; ++l) {
      const double* cl = x.data() + disc_->idx_c(l, 0);
      kernels::ops().log_batch(cl, tmp.data(), n);
      const double la3 = std::log(model.species[l].a3());
      const double ratio = model.species[l].a3() / model.a03();
      const double z = model.species[l].z;
      for (int i = 0; i < n; ++i)
        mu[l][i] = z * x[disc_->idx_psi(i)] + tmp[i] + la3 - ratio * logw[i] +
                   disc_->born[l][i];
    }
  } else {
    e2.resize(n);
    kernels::ops().e2_base_batch(w.data(), w_n_.data(), e2.data(), n);
    tmp.resize(n);
    for (int l = 0; l < M; ++l) {
      const double* cl = x.data() + disc_->idx_c(l, 0);
      kernels::ops().mu_e1_batch(cl, c_n_[l].data(),
                                 std::log(model.species[l].a3()), tmp.data(),
                                 n);
      const double ratio = model.species[l].a3() / model.a03();
      const double zh = 0.5 * model.species[l].z;
      for (int i = 0; i < n; ++i)
        mu[l][i] = tmp[i] + ratio * e2[i] +
                   zh * (psi_n_[i] + x[disc_->idx_psi(i)]) + disc_->born[l][i];
    }
  }
  // Entries at inactive cells are meaningless; NP edges never read them.
}

void ResidualSystem::residual(const Eigen::VectorXd& x,
                              Eigen::VectorXd& out) const {
  const auto& dual = *disc_->dual;
  const auto& model = *disc_->model;
  const int n = disc_->num_cells();
  const int M = disc_->num_species();
  out.setZero(size());

  static thread_local std::vector<std::vector<double>> mu;
  mu_fields(x, mu);

  // Ion transport rows.
  for (int l = 0; l < M; ++l) {
    const double gamma = model.species[l].gamma;
    for (std::size_t k = 0; k < disc_->np_edges.size(); ++k) {
      const auto& e = dual.interior_edges[disc_->np_edges[k]];
      const double q =
          gamma * e.tau * mob_.value[l][k] * (mu[l][e.j] - mu[l][e.i]);
      out[disc_->idx_c(l, e.i)] -= q;
      out[disc_->idx_c(l, e.j)] += q;
    }
    for (int i = 0; i < n; ++i) {
      const int row = disc_->idx_c(l, i);
      if (pinned_[row]) {
        out[row] = x[row] - pinned_value_[row];
        continue;
      }
      out[row] += dual.cell_measures[i] * (x[row] - c_n_[l][i]) / dt_;
      if (!source_.empty()) out[row] -= source_[l][i];
    }
  }

  // Poisson rows.
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    const auto& e = dual.interior_edges[k];
    const double f = model.kappa * e.tau * disc_->eps_edge[k] *
                     (x[disc_->idx_psi(e.i)] - x[disc_->idx_psi(e.j)]);
    out[disc_->idx_psi(e.i)] += f;
    out[disc_->idx_psi(e.j)] -= f;
  }
  for (int i = 0; i < n; ++i) {
    const int row = disc_->idx_psi(i);
    if (pinned_[row]) {
      out[row] = x[row] - pinned_value_[row];
      continue;
    }
    double rho = rho_f_[i];
    if (model.is_active(i))
      for (int l = 0; l < M; ++l)
        rho += model.species[l].z * x[disc_->idx_c(l, i)];
    out[row] -= dual.cell_measures[i] * rho + disc_->neumann_flux[i];
  }
}

void ResidualSystem::jacobian(const Eigen::VectorXd& x,
                              std::vector<Eigen::Triplet<double>>& out) const {
  const auto& dual = *disc_->dual;
  const auto& model = *disc_->model;
  const int n = disc_->num_cells();
  const int M = disc_->num_species();
  out.clear();

  static thread_local std::vector<double> w;
  eval_w(x, w);

  // dmu^l_i / dc^k_i and dmu^l_i / dpsi_i at each cell.
  // Scheme I:  dmu/dc_k = delta_lk / c_l + r_l a_k^3 / w,      dmu/dpsi = z_l
  // Scheme II: dmu_e1/dc_l = 1/c - c_n/(2c^2) - d c_n/(3c^3)
  //            dmu_e2/dc_k = r_l a_k^3 (1/w - w_n/(2w^2) + S w_n/(3w^3))
  //            dmu/dpsi = z_l/2
  const auto dmu_dc = [&](int l, int k, int i) -> double {
    const double a3k = model.species[k].a3();
    const double rl = model.species[l].a3() / model.a03();
    if (scheme_ == Scheme::kI) {
      double v = rl * a3k / w[i];
      if (l == k) v += 1.0 / x[disc_->idx_c(l, i)];
      return v;
    }
    const double wi = w[i];
    const double wn = w_n_[i];
    const double S = wn - wi;
    double v = rl * a3k *
               (1.0 / wi - wn / (2.0 * wi * wi) +
                S * wn / (3.0 * wi * wi * wi));
    if (l == k) {
      const double c = x[disc_->idx_c(l, i)];
      const double cn = c_n_[l][i];
      const double d = c - cn;
      v += 1.0 / c - cn / (2.0 * c * c) - d * cn / (3.0 * c * c * c);
    }
    return v;
  };
  const double zfac = scheme_ == Scheme::kI ? 1.0 : 0.5;

  // Ion transport rows: flux terms.
  for (int l = 0; l < M; ++l) {
    const double gamma = model.species[l].gamma;
    for (std::size_t ke = 0; ke < disc_->np_edges.size(); ++ke) {
      const auto& e = dual.interior_edges[disc_->np_edges[ke]];
      const double g = gamma * e.tau * mob_.value[l][ke];
      // d q / d (vars at j) and d q / d (vars at i); q enters row i with -,
      // row j with +.
      for (int side = 0; side < 2; ++side) {
        const int cell = side == 0 ? e.j : e.i;
        const double sgn = side == 0 ? 1.0 : -1.0;  // d(mu_j - mu_i)
        for (int k = 0; k < M; ++k) {
          const double d = sgn * g * dmu_dc(l, k, cell);
          const int col = disc_->idx_c(k, cell);
          if (!pinned_[disc_->idx_c(l, e.i)])
            out.emplace_back(disc_->idx_c(l, e.i), col, -d);
          if (!pinned_[disc_->idx_c(l, e.j)])
            out.emplace_back(disc_->idx_c(l, e.j), col, d);
        }
        const double dpsi = sgn * g * zfac * model.species[l].z;
        const int colp = disc_->idx_psi(cell);
        if (!pinned_[disc_->idx_c(l, e.i)])
          out.emplace_back(disc_->idx_c(l, e.i), colp, -dpsi);
        if (!pinned_[disc_->idx_c(l, e.j)])
          out.emplace_back(disc_->idx_c(l, e.j), colp, dpsi);
      }
    }
    for (int i = 0; i < n; ++i) {
      const int row = disc_->idx_c(l, i);
      if (pinned_[row])
        out.emplace_back(row, row, 1.0);
      else
        out.emplace_back(row, row, dual.cell_measures[i] / dt_);
    }
  }

  // Poisson rows.
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    const auto& e = dual.interior_edges[k];
    const double a = model.kappa * e.tau * disc_->eps_edge[k];
    const int ri = disc_->idx_psi(e.i), rj = disc_->idx_psi(e.j);
    if (!pinned_[ri]) {
      out.emplace_back(ri, ri, a);
      out.emplace_back(ri, rj, -a);
    }
    if (!pinned_[rj]) {
      out.emplace_back(rj, rj, a);
      out.emplace_back(rj, ri, -a);
    }
  }
  for (int i = 0; i < n; ++i) {
    const int row = disc_->idx_psi(i);
    if (pinned_[row]) {
      out.emplace_back(row, row, 1.0);
      continue;
    }
    if (model.is_active(i))
      for (int l = 0; l < M; ++l)
        out.emplace_back(row, disc_->idx_c(l, i),
                         -dual.cell_measures[i] * model.species[l].z);
  }
}

void ResidualSystem::flux_update(const Eigen::VectorXd& x,
                                 std::vector<std::vector<double>>& c_out) const {
  const auto& dual = *disc_->dual;
  const auto& model = *disc_->model;
  const int n = disc_->num_cells();
  const int M = disc_->num_species();

  static thread_local std::vector<std::vector<double>> mu;
  mu_fields(x, mu);

  c_out.assign(M, std::vector<double>(n, 0.0));
  for (int l = 0; l < M; ++l) {
    std::vector<double> g(n, 0.0);
    for (std::size_t k = 0; k < disc_->np_edges.size(); ++k) {
      const auto& e = dual.interior_edges[disc_->np_edges[k]];
      const double q = e.tau * mob_.value[l][k] * (mu[l][e.j] - mu[l][e.i]);
      g[e.i] += q;
      g[e.j] -= q;
    }
    const double gamma = model.species[l].gamma;
    for (int i = 0; i < n; ++i) {
      const int row = disc_->idx_c(l, i);
      if (pinned_[row]) {
        c_out[l][i] = pinned_value_[row];
        continue;
      }
      double dc = gamma * g[i] / dual.cell_measures[i];
      if (!source_.empty()) dc += source_[l][i] / dual.cell_measures[i];
      c_out[l][i] = c_n_[l][i] + dt_ * dc;
    }
  }
}

double ResidualSystem::dissipation_bound(const Eigen::VectorXd& x) const {
  const auto& dual = *disc_->dual;
  const int M = disc_->num_species();

  static thread_local std::vector<std::vector<double>> mu;
  mu_fields(x, mu);

  double bound = 0.0;
  for (int l = 0; l < M; ++l) {
    const double gamma = disc_->model->species[l].gamma;
    double s = 0.0;
    for (std::size_t k = 0; k < disc_->np_edges.size(); ++k) {
      const auto& e = dual.interior_edges[disc_->np_edges[k]];
      const double d = mu[l][e.j] - mu[l][e.i];
      s += e.tau * mob_.value[l][k] * d * d;
    }
    bound += gamma * s;
  }
  return dt_ * bound;
}

ResidualSystem assemble_scheme_I(const Discretization& disc,
                                 const State& state_n, double dt) {
  return ResidualSystem(disc, Scheme::kI, dt, state_n, nullptr);
}

ResidualSystem assemble_scheme_II(const Discretization& disc,
                                  const State& state_n, const State& state_nm1,
                                  double dt) {
  return ResidualSystem(disc, Scheme::kII, dt, state_n, &state_nm1);
}

}  // namespace mpnp
