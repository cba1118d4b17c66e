#include "mpnp/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mpnp/kernels/kernels.hpp"

namespace mpnp {

namespace {

double linf(const Eigen::VectorXd& v) {
  return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

double min_active_concentration(const Discretization& disc,
                                const Eigen::VectorXd& x) {
  double cmin = std::numeric_limits<double>::infinity();
  for (int l = 0; l < disc.num_species(); ++l)
    for (int i = 0; i < disc.num_cells(); ++i)
      if (disc.model->is_active(i))
        cmin = std::min(cmin, x[disc.idx_c(l, i)]);
  return cmin;
}

}  // namespace

PoissonSolver::PoissonSolver(const Discretization& disc) : disc_(&disc) {
  const auto& dual = *disc.dual;
  const int n = disc.num_cells();
  if (dual.dirichlet_cells.empty())
    throw SolverError(
        "pure-Neumann Poisson problem rejected (no Dirichlet faces)");

  free_of_cell_.assign(n, -1);
  for (int i = 0; i < n; ++i)
    if (!dual.on_dirichlet[i]) {
      free_of_cell_[i] = static_cast<int>(cell_of_free_.size());
      cell_of_free_.push_back(i);
    }
  const int nf = static_cast<int>(cell_of_free_.size());

  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    const auto& e = dual.interior_edges[k];
    const double a = disc.model->kappa * e.tau * disc.eps_edge[k];
    const int fi = free_of_cell_[e.i], fj = free_of_cell_[e.j];
    if (fi >= 0) trips.emplace_back(fi, fi, a);
    if (fj >= 0) trips.emplace_back(fj, fj, a);
    if (fi >= 0 && fj >= 0) {
      trips.emplace_back(fi, fj, -a);
      trips.emplace_back(fj, fi, -a);
    }
  }
  L_.resize(nf, nf);
  L_.setFromTriplets(trips.begin(), trips.end());
  ldlt_.compute(L_);
  if (ldlt_.info() != Eigen::Success)
    throw LinearSolveFailure("Poisson factorization failed");
}

std::vector<double> PoissonSolver::solve(
    const std::vector<std::vector<double>>& c, double time) const {
  const auto& dual = *disc_->dual;
  const auto& model = *disc_->model;
  const int n = disc_->num_cells();
  const int nf = static_cast<int>(cell_of_free_.size());

  std::vector<double> psi_d(n, 0.0);
  for (int i : dual.dirichlet_cells)
    psi_d[i] = model.psi_dirichlet_fn
                   ? model.psi_dirichlet_fn(dual.centers[i], time)
                   : model.psi_dirichlet[i];

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf);
  for (int f = 0; f < nf; ++f) {
    const int i = cell_of_free_[f];
    double rho = model.rho_f_fn ? model.rho_f_fn(dual.centers[i], time)
                                : model.rho_f[i];
    if (model.is_active(i))
      for (int l = 0; l < model.num_species(); ++l)
        rho += model.species[l].z * c[l][i];
    rhs[f] = dual.cell_measures[i] * rho + disc_->neumann_flux[i];
  }
  for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
    const auto& e = dual.interior_edges[k];
    const double a = disc_->model->kappa * e.tau * disc_->eps_edge[k];
    const int fi = free_of_cell_[e.i], fj = free_of_cell_[e.j];
    if (fi >= 0 && fj < 0) rhs[fi] += a * psi_d[e.j];
    if (fj >= 0 && fi < 0) rhs[fj] += a * psi_d[e.i];
  }

  Eigen::VectorXd sol = ldlt_.solve(rhs);
  // one refinement pass, then verify
  sol += ldlt_.solve(rhs - L_ * sol);
  const double rel = linf(rhs - L_ * sol) / std::max(linf(rhs), 1e-300);
  if (nf > 0 && rel > 1e-12)
    throw LinearSolveFailure("Poisson solve: relative residual " +
                             std::to_string(rel));

  std::vector<double> psi(n);
  for (int i = 0; i < n; ++i)
    psi[i] = free_of_cell_[i] >= 0 ? sol[free_of_cell_[i]] : psi_d[i];
  return psi;
}

std::vector<double> solve_poisson(const Discretization& disc,
                                  const std::vector<std::vector<double>>& c,
                                  double time) {
  return PoissonSolver(disc).solve(c, time);
}

double positivity_step_limit(const Discretization& disc,
                             const Eigen::VectorXd& x,
                             const Eigen::VectorXd& dx, double theta) {
  const int n = disc.num_cells();
  const int M = disc.num_species();
  const auto& ops = kernels::ops();

  double lam = std::numeric_limits<double>::infinity();
  for (int l = 0; l < M; ++l)
    lam = std::min(lam, ops.max_positive_step(x.data() + disc.idx_c(l, 0),
                                              dx.data() + disc.idx_c(l, 0),
                                              static_cast<std::size_t>(n)));

  static thread_local std::vector<double> w, dw;
  w.assign(n, 1.0);
  dw.assign(n, 0.0);
  for (int l = 0; l < M; ++l) {
    const double a3 = disc.model->species[l].a3();
    for (int i = 0; i < n; ++i) {
      w[i] -= a3 * x[disc.idx_c(l, i)];
      dw[i] -= a3 * dx[disc.idx_c(l, i)];
    }
  }
  lam = std::min(lam, ops.max_positive_step(w.data(), dw.data(),
                                            static_cast<std::size_t>(n)));
  return std::min(1.0, theta * lam);
}

Stepper::Stepper(const Discretization& disc, NewtonConfig cfg)
    : disc_(&disc), cfg_(cfg), poisson_(disc) {}

State Stepper::step(const State& state_n, const State* state_nm1,
                    Scheme scheme, double dt, StepInfo* info) {
  if (scheme == Scheme::kII && !state_nm1)
    throw SolverError("Scheme II requires the previous state");
  const ResidualSystem sys(*disc_, scheme, dt, state_n, state_nm1);

  // Convergence is measured on a row-scaled residual: transport rows grow
  // like m(V_i)/dt, so the raw infinity norm would make small time steps
  // unreachable at fixed tolerance.
  const int n_cells = disc_->num_cells();
  const int M = disc_->num_species();
  Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(sys.size());
  for (int l = 0; l < M; ++l)
    for (int i = 0; i < n_cells; ++i) {
      const int row = disc_->idx_c(l, i);
      if (!sys.pinned()[row])
        row_scale[row] =
            std::max(1.0, disc_->dual->cell_measures[i] / dt);
    }
  const auto scaled_linf = [&](const Eigen::VectorXd& r) {
    double v = 0.0;
    for (int k = 0; k < r.size(); ++k)
      v = std::max(v, std::abs(r[k]) / row_scale[k]);
    return v;
  };

  Eigen::VectorXd x = sys.initial_guess();
  Eigen::VectorXd r(sys.size());
  sys.residual(x, r);
  double rn = scaled_linf(r);

  Eigen::VectorXd x_best = x;
  double best = rn;
  int iters = 0;
  int stall = 0;

  Eigen::SparseMatrix<double> J(sys.size(), sys.size());
  std::vector<Eigen::Triplet<double>> trips;

  while (iters < cfg_.max_iter && best > cfg_.polish_tol && stall < 10) {
    sys.jacobian(x, trips);
    J.setFromTriplets(trips.begin(), trips.end());
    if (!pattern_analyzed_) {
      lu_.analyzePattern(J);
      pattern_analyzed_ = true;
    }
    lu_.factorize(J);
    if (lu_.info() != Eigen::Success)
      throw LinearSolveFailure("Newton Jacobian factorization failed");
    Eigen::VectorXd dx = lu_.solve(-r);
    // pinned unknowns move exactly never (a roundoff-negative increment on
    // a zero-valued inactive cell would zero the step limit)
    for (int k = 0; k < dx.size(); ++k)
      if (sys.pinned()[k]) dx[k] = 0.0;

    double lam = positivity_step_limit(*disc_, x, dx, cfg_.theta_safeguard);
    // backtrack on the scaled residual; the per-step system is convex, so
    // the Newton direction always admits a decreasing step
    Eigen::VectorXd x_trial = x + lam * dx;
    sys.residual(x_trial, r);
    double rn_trial = scaled_linf(r);
    for (int bt = 0; bt < 8 && rn_trial >= rn && rn > cfg_.polish_tol; ++bt) {
      lam *= 0.5;
      x_trial = x + lam * dx;
      sys.residual(x_trial, r);
      rn_trial = scaled_linf(r);
    }
    x = std::move(x_trial);
    rn = rn_trial;
    ++iters;

    if (rn < best) {
      best = rn;
      x_best = x;
      stall = 0;
    } else {
      ++stall;
    }
  }

  if (best > cfg_.tol_residual) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "Newton did not converge: residual %.3e after %d iterations",
                  best, iters);
    throw NonConvergence(msg, best, min_active_concentration(*disc_, x_best));
  }

  // Explicit flux-form rewrite of the concentration update, then an exact
  // linear Poisson re-solve: conservation and the energy identity hold to
  // roundoff rather than to the Newton tolerance.
  State out;
  out.time = state_n.time + dt;
  sys.flux_update(x_best, out.c);
  out.psi = poisson_.solve(out.c, out.time);
  try {
    out.validate(*disc_->model);
  } catch (const ModelError& err) {
    throw NonConvergence(std::string("positivity lost in flux rewrite: ") +
                             err.what(),
                         best, min_active_concentration(*disc_, x_best));
  }

  if (info) {
    info->newton_iters = iters;
    info->final_residual = best;
    info->dissipation_bound = sys.dissipation_bound(x_best);
    info->mobilities = sys.mobilities();
    sys.mu_fields(x_best, info->mu);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convex per-step functional (oracle path)

namespace {

struct OracleContext {
  const Discretization* disc;
  const State* state_n;
  double dt;
  double t_new;
  std::vector<Eigen::MatrixXd> BAstarB;  // [M], dense n x n
  PoissonSolver poisson;
  std::vector<double> w_n;
  std::vector<double> mass_target;

  OracleContext(const Discretization& d, const State& n, const State& nm1,
                double dt_in)
      : disc(&d), state_n(&n), dt(dt_in), t_new(n.time + dt_in), poisson(d) {
    const auto& dual = *d.dual;
    const auto& model = *d.model;
    const int nc = d.num_cells();
    const int M = d.num_species();
    if (nc > 64)
      throw SolverError("minimize_J_oracle: mesh larger than 64 cells");
    if (!model.conc_dirichlet.empty())
      throw SolverError("minimize_J_oracle: concentration clamps unsupported");

    const FaceMobilities mob =
        compute_mobilities(d, n, &nm1, Scheme::kII);

    solvent_fraction_field(n.c, model, w_n);

    mass_target.resize(M);
    for (int l = 0; l < M; ++l) {
      double s = 0.0;
      for (int i = 0; i < nc; ++i)
        if (model.is_active(i)) s += dual.cell_measures[i] * n.c[l][i];
      mass_target[l] = s;
    }

    for (int l = 0; l < M; ++l) {
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nc, nc);
      for (std::size_t k = 0; k < d.np_edges.size(); ++k) {
        const auto& e = dual.interior_edges[d.np_edges[k]];
        const double wgt =
            model.species[l].gamma * e.tau * mob.value[l][k];
        A(e.i, e.i) += wgt;
        A(e.j, e.j) += wgt;
        A(e.i, e.j) -= wgt;
        A(e.j, e.i) -= wgt;
      }
      // pseudo-inverse on the range (kernel: constants)
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
      const auto& vals = es.eigenvalues();
      const auto& vecs = es.eigenvectors();
      const double cutoff = 1e-12 * std::max(1.0, vals.maxCoeff());
      Eigen::MatrixXd Astar = Eigen::MatrixXd::Zero(nc, nc);
      for (int k = 0; k < nc; ++k)
        if (vals[k] > cutoff)
          Astar += vecs.col(k) * vecs.col(k).transpose() / vals[k];
      Eigen::VectorXd mvec(nc);
      for (int i = 0; i < nc; ++i) mvec[i] = dual.cell_measures[i];
      BAstarB.push_back(mvec.asDiagonal() * Astar * mvec.asDiagonal());
    }
  }

  std::vector<double> psi_of(const std::vector<std::vector<double>>& c) const {
    return poisson.solve(c, t_new);
  }

  double objective(const std::vector<std::vector<double>>& c) const {
    const auto& dual = *disc->dual;
    const auto& model = *disc->model;
    const int nc = disc->num_cells();
    const int M = disc->num_species();
    const double a03 = model.a03();

    double J = 0.0;
    // J1: kinetic-like A* term + electrostatic part.
    for (int l = 0; l < M; ++l) {
      Eigen::VectorXd dc(nc);
      for (int i = 0; i < nc; ++i) dc[i] = c[l][i] - state_n->c[l][i];
      J += 0.5 / dt * dc.dot(BAstarB[l] * dc);
    }
    const auto psi = psi_of(c);
    for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
      const auto& e = dual.interior_edges[k];
      const double pi = dual.on_dirichlet[e.i] ? 0.0 : psi[e.i];
      const double pj = dual.on_dirichlet[e.j] ? 0.0 : psi[e.j];
      J += 0.25 * model.kappa * e.tau * disc->eps_edge[k] * (pi - pj) *
           (pi - pj);
    }
    for (int i : dual.dirichlet_cells) {
      double rho = model.rho_f[i];
      if (model.is_active(i))
        for (int l = 0; l < M; ++l) rho += model.species[l].z * c[l][i];
      J += 0.5 * psi[i] * dual.cell_measures[i] * rho;
    }

    // J2 + J3 + J4.
    for (int i = 0; i < nc; ++i) {
      if (!model.is_active(i)) continue;
      const double m = dual.cell_measures[i];
      double w = 1.0, wn = w_n[i];
      for (int l = 0; l < M; ++l) w -= model.species[l].a3() * c[l][i];
      for (int l = 0; l < M; ++l) {
        const double cl = c[l][i], cn = state_n->c[l][i];
        const double a3 = model.species[l].a3();
        J += m * (cl * (std::log(a3 * cl) - 1.0) +
                  (5.0 / 6.0) * cn * std::log(cl) + cn * cn / (6.0 * cl) -
                  (2.0 / 3.0) * cl);
        J += m * (disc->born[l][i] + 0.5 * model.species[l].z *
                                         state_n->psi[i]) *
             cl;
        J += m * 2.0 * a3 / (3.0 * a03) * cl;
      }
      J += m / a03 *
           ((5.0 / 6.0) * wn * std::log(w) + wn * wn / (6.0 * w) +
            w * (std::log(w) - 1.0));
    }
    return J;
  }

  // gradient with the per-species mass constraint projected out
  void gradient(const std::vector<std::vector<double>>& c,
                std::vector<Eigen::VectorXd>& g) const {
    const auto& dual = *disc->dual;
    const auto& model = *disc->model;
    const int nc = disc->num_cells();
    const int M = disc->num_species();

    const auto psi = psi_of(c);
    std::vector<double> w(nc, 1.0);
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < nc; ++i)
        w[i] -= model.species[l].a3() * c[l][i];

    g.assign(M, Eigen::VectorXd::Zero(nc));
    for (int l = 0; l < M; ++l) {
      Eigen::VectorXd dc(nc);
      for (int i = 0; i < nc; ++i) dc[i] = c[l][i] - state_n->c[l][i];
      g[l] = (1.0 / dt) * (BAstarB[l] * dc);
      const double a3 = model.species[l].a3();
      const double ratio = a3 / model.a03();
      for (int i = 0; i < nc; ++i) {
        if (!model.is_active(i)) continue;
        const double m = dual.cell_measures[i];
        const double e1 = mu_e1(c[l][i], state_n->c[l][i], a3);
        const double s = w_n[i] - w[i];
        const double r = s / w[i];
        const double e2 =
            ratio * (-std::log(w[i]) - 0.5 * r + r * r / 6.0);
        g[l][i] += m * (e1 + e2 + disc->born[l][i] +
                        0.5 * model.species[l].z * (state_n->psi[i] + psi[i]));
      }
      // project onto the mass-conserving hyperplane
      double num = 0.0, den = 0.0;
      for (int i = 0; i < nc; ++i) {
        if (!model.is_active(i)) continue;
        num += dual.cell_measures[i] * g[l][i];
        den += dual.cell_measures[i] * dual.cell_measures[i];
      }
      for (int i = 0; i < nc; ++i)
        if (model.is_active(i)) g[l][i] -= num / den * dual.cell_measures[i];
        else g[l][i] = 0.0;
    }
  }
};

}  // namespace

double oracle_objective(const Discretization& disc, const State& state_n,
                        const State& state_nm1, double dt,
                        const std::vector<std::vector<double>>& c) {
  return OracleContext(disc, state_n, state_nm1, dt).objective(c);
}

State minimize_J_oracle(const Discretization& disc, const State& state_n,
                        const State& state_nm1, double dt, double grad_tol,
                        long max_iter) {
  const OracleContext ctx(disc, state_n, state_nm1, dt);
  const auto& dual = *disc.dual;
  const auto& model = *disc.model;
  const int nc = disc.num_cells();
  const int M = disc.num_species();

  auto c = state_n.c;
  std::vector<Eigen::VectorXd> g, g_prev;
  ctx.gradient(c, g);

  auto gnorm = [&] {
    double v = 0.0;
    for (const auto& gl : g) v = std::max(v, linf(gl));
    return v;
  };

  auto lambda_max = [&](const std::vector<Eigen::VectorXd>& d) {
    double lam = std::numeric_limits<double>::infinity();
    std::vector<double> w(nc, 1.0), dw(nc, 0.0);
    for (int l = 0; l < M; ++l) {
      const double a3 = model.species[l].a3();
      for (int i = 0; i < nc; ++i) {
        if (d[l][i] < 0.0) lam = std::min(lam, c[l][i] / -d[l][i]);
        w[i] -= a3 * c[l][i];
        dw[i] -= a3 * d[l][i];
      }
    }
    for (int i = 0; i < nc; ++i)
      if (dw[i] < 0.0) lam = std::min(lam, w[i] / -dw[i]);
    return lam;
  };

  double alpha = 0.0;
  {
    double cmin = std::numeric_limits<double>::infinity();
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < nc; ++i)
        if (model.is_active(i)) cmin = std::min(cmin, c[l][i]);
    alpha = 0.01 * cmin / std::max(gnorm(), 1e-30);
  }

  auto c_prev = c;
  long it = 0;
  for (; it < max_iter && gnorm() > grad_tol; ++it) {
    std::vector<Eigen::VectorXd> d(M);
    for (int l = 0; l < M; ++l) d[l] = -g[l];
    const double lam = 0.9 * lambda_max(d);
    const double step = std::min(alpha, lam);

    c_prev = c;
    g_prev = g;
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < nc; ++i) c[l][i] += step * d[l][i];

    if ((it & 63) == 63) {
      // counter mass drift from roundoff
      for (int l = 0; l < M; ++l) {
        double s = 0.0, den = 0.0;
        for (int i = 0; i < nc; ++i) {
          if (!model.is_active(i)) continue;
          s += dual.cell_measures[i] * c[l][i];
          den += dual.cell_measures[i] * dual.cell_measures[i];
        }
        const double corr = (ctx.mass_target[l] - s) / den;
        for (int i = 0; i < nc; ++i)
          if (model.is_active(i)) {
            const double next = c[l][i] + corr * dual.cell_measures[i];
            if (next > 0.0) c[l][i] = next;
          }
      }
    }

    ctx.gradient(c, g);

    // Barzilai-Borwein step length for the next iterate
    double sts = 0.0, sty = 0.0;
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < nc; ++i) {
        const double s = c[l][i] - c_prev[l][i];
        const double y = g[l][i] - g_prev[l][i];
        sts += s * s;
        sty += s * y;
      }
    alpha = sty > 1e-300 ? sts / sty : alpha * 2.0;
    alpha = std::min(std::max(alpha, 1e-16), 1e16);
  }

  if (gnorm() > grad_tol)
    throw NonConvergence("minimize_J_oracle: projected gradient " +
                             std::to_string(gnorm()) + " after " +
                             std::to_string(it) + " iterations",
                         gnorm(), 0.0);

  State out;
  out.time = state_n.time + dt;
  out.c = c;
  out.psi = ctx.psi_of(c);
  out.validate(model);
  return out;
}

// ---------------------------------------------------------------------------
// Discrete Poisson-Boltzmann system

State solve_steady_pb(const Discretization& disc,
                      const std::vector<double>& mass_targets,
                      const NewtonConfig& cfg, std::vector<double>* xi_out) {
  const auto& dual = *disc.dual;
  const auto& model = *disc.model;
  const int n = disc.num_cells();
  const int M = disc.num_species();
  if (static_cast<int>(mass_targets.size()) != M)
    throw SolverError("solve_steady_pb: one mass target per species required");
  if (!model.conc_dirichlet.empty())
    throw SolverError("solve_steady_pb: concentration clamps unsupported");

  double active_measure = 0.0;
  for (int i = 0; i < n; ++i)
    if (model.is_active(i)) active_measure += dual.cell_measures[i];

  // admissibility of the targets
  double packing = 0.0;
  for (int l = 0; l < M; ++l) {
    if (!(mass_targets[l] > 0.0))
      throw SolverError("solve_steady_pb: mass targets must be positive");
    packing += model.species[l].a3() * mass_targets[l] / active_measure;
  }
  if (!(packing < 1.0))
    throw SolverError("solve_steady_pb: sterically inadmissible mass targets");

  const int nvar = (M + 1) * n + M;
  const auto idx_c = [&](int l, int i) { return disc.idx_c(l, i); };
  const auto idx_psi = [&](int i) { return disc.idx_psi(i); };
  const auto idx_xi = [&](int l) { return (M + 1) * n + l; };

  Eigen::VectorXd x(nvar);
  for (int l = 0; l < M; ++l)
    for (int i = 0; i < n; ++i)
      x[idx_c(l, i)] =
          model.is_active(i) ? mass_targets[l] / active_measure : 0.0;
  {
    std::vector<std::vector<double>> c0(M, std::vector<double>(n));
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i) c0[l][i] = x[idx_c(l, i)];
    const auto psi0 = solve_poisson(disc, c0, 0.0);
    for (int i = 0; i < n; ++i) x[idx_psi(i)] = psi0[i];
  }

  std::vector<double> psi_clamp(n, 0.0);
  for (int i : dual.dirichlet_cells)
    psi_clamp[i] = model.psi_dirichlet_fn
                       ? model.psi_dirichlet_fn(dual.centers[i], 0.0)
                       : model.psi_dirichlet[i];

  const auto mu_of = [&](const Eigen::VectorXd& v, int l, int i) {
    double w = 1.0;
    for (int k = 0; k < M; ++k) w -= model.species[k].a3() * v[idx_c(k, i)];
    const double a3 = model.species[l].a3();
    return model.species[l].z * v[idx_psi(i)] +
           std::log(a3 * v[idx_c(l, i)]) -
           a3 / model.a03() * std::log(w) + disc.born[l][i];
  };
  for (int l = 0; l < M; ++l) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i)
      if (model.is_active(i))
        mean += dual.cell_measures[i] * mu_of(x, l, i);
    x[idx_xi(l)] = mean / active_measure;
  }

  const auto residual = [&](const Eigen::VectorXd& v, Eigen::VectorXd& r) {
    r.setZero(nvar);
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i) {
        if (!model.is_active(i)) {
          r[idx_c(l, i)] = v[idx_c(l, i)];
          continue;
        }
        r[idx_c(l, i)] = mu_of(v, l, i) - v[idx_xi(l)];
      }
    for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
      const auto& e = dual.interior_edges[k];
      const double f = model.kappa * e.tau * disc.eps_edge[k] *
                       (v[idx_psi(e.i)] - v[idx_psi(e.j)]);
      r[idx_psi(e.i)] += f;
      r[idx_psi(e.j)] -= f;
    }
    for (int i = 0; i < n; ++i) {
      if (dual.on_dirichlet[i]) {
        r[idx_psi(i)] = v[idx_psi(i)] - psi_clamp[i];
        continue;
      }
      double rho = model.rho_f[i];
      if (model.is_active(i))
        for (int l = 0; l < M; ++l)
          rho += model.species[l].z * v[idx_c(l, i)];
      r[idx_psi(i)] -= dual.cell_measures[i] * rho + disc.neumann_flux[i];
    }
    for (int l = 0; l < M; ++l) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (model.is_active(i)) s += dual.cell_measures[i] * v[idx_c(l, i)];
      r[idx_xi(l)] = s - mass_targets[l];
    }
  };

  const auto jacobian = [&](const Eigen::VectorXd& v,
                            std::vector<Eigen::Triplet<double>>& t) {
    t.clear();
    std::vector<double> w(n, 1.0);
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i) w[i] -= model.species[l].a3() * v[idx_c(l, i)];
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i) {
        if (!model.is_active(i)) {
          t.emplace_back(idx_c(l, i), idx_c(l, i), 1.0);
          continue;
        }
        const double rl = model.species[l].a3() / model.a03();
        for (int k = 0; k < M; ++k) {
          double d = rl * model.species[k].a3() / w[i];
          if (k == l) d += 1.0 / v[idx_c(l, i)];
          t.emplace_back(idx_c(l, i), idx_c(k, i), d);
        }
        t.emplace_back(idx_c(l, i), idx_psi(i),
                       static_cast<double>(model.species[l].z));
        t.emplace_back(idx_c(l, i), idx_xi(l), -1.0);
      }
    for (std::size_t k = 0; k < dual.interior_edges.size(); ++k) {
      const auto& e = dual.interior_edges[k];
      const double a = model.kappa * e.tau * disc.eps_edge[k];
      const int ri = idx_psi(e.i), rj = idx_psi(e.j);
      if (!dual.on_dirichlet[e.i]) {
        t.emplace_back(ri, ri, a);
        t.emplace_back(ri, rj, -a);
      }
      if (!dual.on_dirichlet[e.j]) {
        t.emplace_back(rj, rj, a);
        t.emplace_back(rj, ri, -a);
      }
    }
    for (int i = 0; i < n; ++i) {
      if (dual.on_dirichlet[i]) {
        t.emplace_back(idx_psi(i), idx_psi(i), 1.0);
        continue;
      }
      if (model.is_active(i))
        for (int l = 0; l < M; ++l)
          t.emplace_back(idx_psi(i), idx_c(l, i),
                         -dual.cell_measures[i] * model.species[l].z);
    }
    for (int l = 0; l < M; ++l)
      for (int i = 0; i < n; ++i)
        if (model.is_active(i))
          t.emplace_back(idx_xi(l), idx_c(l, i), dual.cell_measures[i]);
  };

  Eigen::VectorXd r(nvar);
  residual(x, r);
  double rn = linf(r);
  double best = rn;
  Eigen::VectorXd x_best = x;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  Eigen::SparseMatrix<double> J(nvar, nvar);
  std::vector<Eigen::Triplet<double>> trips;
  bool analyzed = false;
  int stall = 0;

  for (int it = 0; it < cfg.max_iter && best > cfg.polish_tol && stall < 3;
       ++it) {
    jacobian(x, trips);
    J.setFromTriplets(trips.begin(), trips.end());
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success)
      throw LinearSolveFailure("PB Jacobian factorization failed");
    Eigen::VectorXd dx = lu.solve(-r);

    // fraction-to-boundary on concentrations and solvent fraction
    double lam = std::numeric_limits<double>::infinity();
    {
      std::vector<double> w(n, 1.0), dw(n, 0.0);
      for (int l = 0; l < M; ++l)
        for (int i = 0; i < n; ++i) {
          if (!model.is_active(i)) continue;
          if (dx[idx_c(l, i)] < 0.0)
            lam = std::min(lam, x[idx_c(l, i)] / -dx[idx_c(l, i)]);
          w[i] -= model.species[l].a3() * x[idx_c(l, i)];
          dw[i] -= model.species[l].a3() * dx[idx_c(l, i)];
        }
      for (int i = 0; i < n; ++i)
        if (model.is_active(i) && dw[i] < 0.0)
          lam = std::min(lam, w[i] / -dw[i]);
    }
    x += std::min(1.0, cfg.theta_safeguard * lam) * dx;

    residual(x, r);
    rn = linf(r);
    if (rn < best) {
      best = rn;
      x_best = x;
      stall = 0;
    } else {
      ++stall;
    }
  }

  if (best > cfg.tol_residual)
    throw NonConvergence("solve_steady_pb did not converge: residual " +
                             std::to_string(best),
                         best, 0.0);

  State out;
  out.time = 0.0;
  out.c.assign(M, std::vector<double>(n, 0.0));
  for (int l = 0; l < M; ++l)
    for (int i = 0; i < n; ++i) out.c[l][i] = x_best[idx_c(l, i)];

  // exact mass polish: multiplicative per-species rescale
  for (int l = 0; l < M; ++l) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      if (model.is_active(i)) s += dual.cell_measures[i] * out.c[l][i];
    const double scale = mass_targets[l] / s;
    for (int i = 0; i < n; ++i)
      if (model.is_active(i)) out.c[l][i] *= scale;
  }
  out.psi = solve_poisson(disc, out.c, 0.0);
  out.validate(model);
  if (xi_out) {
    xi_out->resize(M);
    for (int l = 0; l < M; ++l) (*xi_out)[l] = x_best[idx_xi(l)];
  }
  return out;
}

}  // namespace mpnp
