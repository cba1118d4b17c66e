#include "mpnp/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <fstream>
#include <mutex>
#include <thread>

namespace mpnp {
namespace scenarios {

namespace {

constexpr double kPi = 3.14159265358979323846;

// shared amplitude P = 0.1 e^{-t} cos(pi x) cos(pi y)
double Pval(double x, double y, double t) {
  return 0.1 * std::exp(-t) * std::cos(kPi * x) * std::cos(kPi * y);
}
double Px(double x, double y, double t) {
  return -0.1 * kPi * std::exp(-t) * std::sin(kPi * x) * std::cos(kPi * y);
}
double Py(double x, double y, double t) {
  return -0.1 * kPi * std::exp(-t) * std::cos(kPi * x) * std::sin(kPi * y);
}

double logistic(double u) { return 1.0 / (1.0 + std::exp(u)); }

}  // namespace

double Manufactured::c1(double x, double y, double t) {
  return Pval(x, y, t) + 0.2;
}
double Manufactured::c2(double x, double y, double t) {
  return -Pval(x, y, t) + 0.2;
}
double Manufactured::psi(double x, double y, double t) {
  return Pval(x, y, t) / (kappa * kPi * kPi);
}

double Manufactured::eps(double x) {
  return 78.0 * (15.0 / 39.0 + (24.0 / 39.0) * logistic(-50.0 * std::abs(x - 0.5) + 10.0));
}
double Manufactured::deps(double x) {
  const double g = logistic(-50.0 * std::abs(x - 0.5) + 10.0);
  const double sgn = x > 0.5 ? 1.0 : (x < 0.5 ? -1.0 : 0.0);
  return 48.0 * 50.0 * sgn * g * (1.0 - g);
}
double Manufactured::d2eps(double x) {
  const double g = logistic(-50.0 * std::abs(x - 0.5) + 10.0);
  return 48.0 * 2500.0 * g * (1.0 - g) * (1.0 - 2.0 * g);
}

namespace {

// d/dx (1/eps) and d^2/dx^2 (1/eps)
double qfun(double x) {
  const double e = Manufactured::eps(x);
  return -Manufactured::deps(x) / (e * e);
}
double dqfun(double x) {
  const double e = Manufactured::eps(x);
  const double de = Manufactured::deps(x);
  return -Manufactured::d2eps(x) / (e * e) + 2.0 * de * de / (e * e * e);
}

struct Fields {
  double P, Px_, Py_, lapP, c1, c2, w, grad2;  // grad2 = |grad P|^2
};

Fields eval_fields(double x, double y, double t) {
  Fields f;
  f.P = Pval(x, y, t);
  f.Px_ = Px(x, y, t);
  f.Py_ = Py(x, y, t);
  f.lapP = -2.0 * kPi * kPi * f.P;
  f.c1 = f.P + 0.2;
  f.c2 = 0.2 - f.P;
  constexpr double a13 = Manufactured::a1 * Manufactured::a1 * Manufactured::a1;
  constexpr double a23 = Manufactured::a2 * Manufactured::a2 * Manufactured::a2;
  f.w = 1.0 - a13 * f.c1 - a23 * f.c2;
  f.grad2 = f.Px_ * f.Px_ + f.Py_ * f.Py_;
  return f;
}

}  // namespace

double Manufactured::f1(double x, double y, double t) {
  const Fields f = eval_fields(x, y, t);
  constexpr double a13 = a1 * a1 * a1;
  constexpr double a23 = a2 * a2 * a2;
  constexpr double a03 = a0 * a0 * a0;
  constexpr double Da = a13 - a23;

  const double conv = f.grad2 / (kappa * kPi * kPi) - 2.0 * f.c1 * f.P / kappa;
  const double steric =
      (a13 * Da / a03) *
      (f.grad2 / f.w + f.c1 * f.lapP / f.w + Da * f.c1 * f.grad2 / (f.w * f.w));
  const double born = (chi / a1) * (f.Px_ * qfun(x) + f.c1 * dqfun(x));
  return -f.P - (f.lapP + conv + steric + born);
}

double Manufactured::f2(double x, double y, double t) {
  const Fields f = eval_fields(x, y, t);
  constexpr double a13 = a1 * a1 * a1;
  constexpr double a23 = a2 * a2 * a2;
  constexpr double a03 = a0 * a0 * a0;
  constexpr double Da = a13 - a23;

  const double conv = f.grad2 / (kappa * kPi * kPi) + 2.0 * f.c2 * f.P / kappa;
  const double steric =
      (a23 * Da / a03) *
      (-f.grad2 / f.w + f.c2 * f.lapP / f.w + Da * f.c2 * f.grad2 / (f.w * f.w));
  const double born = (chi / a2) * (-f.Px_ * qfun(x) + f.c2 * dqfun(x));
  return f.P - (-f.lapP + conv + steric + born);
}

double Manufactured::rho_f(double x, double y, double t) {
  // -kappa div(eps grad psi) - (c1 - c2)
  const Fields f = eval_fields(x, y, t);
  return -deps(x) * f.Px_ / (kPi * kPi) + 2.0 * eps(x) * f.P - 2.0 * f.P;
}

namespace {

std::unique_ptr<Scenario> finish_scenario(std::unique_ptr<Scenario> scn,
                                          double beta) {
  scn->dual = build_dual(scn->mesh);
  scn->stencils = build_stencils(scn->mesh, scn->dual);
  scn->model.validate(scn->dual);
  scn->disc = std::make_unique<Discretization>(scn->mesh, scn->dual,
                                               scn->model, scn->stencils, beta);
  return scn;
}

}  // namespace

std::unique_ptr<Scenario> make_manufactured(int n, double beta) {
  auto scn = std::make_unique<Scenario>();
  scn->mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {n, n, 0},
                                  [](const Vec3& c) {
                                    return c[0] < 1e-12 || c[0] > 1.0 - 1e-12;
                                  });
  auto& model = scn->model;
  model.species = {{+1, Manufactured::a1, 1.0}, {-1, Manufactured::a2, 1.0}};
  model.a0 = Manufactured::a0;
  model.kappa = Manufactured::kappa;
  model.chi = Manufactured::chi;

  const int nv = scn->mesh.num_vertices();
  model.epsilon.resize(nv);
  model.rho_f.assign(nv, 0.0);
  model.psi_dirichlet.assign(nv, 0.0);
  for (int i = 0; i < nv; ++i)
    model.epsilon[i] = Manufactured::eps(scn->mesh.vertices[i][0]);
  model.rho_f_fn = [](const Vec3& p, double t) {
    return Manufactured::rho_f(p[0], p[1], t);
  };
  model.psi_dirichlet_fn = [](const Vec3& p, double t) {
    return Manufactured::psi(p[0], p[1], t);
  };
  model.sources = {
      [](const Vec3& p, double t) { return Manufactured::f1(p[0], p[1], t); },
      [](const Vec3& p, double t) { return Manufactured::f2(p[0], p[1], t); }};

  scn = finish_scenario(std::move(scn), beta);

  auto& st = scn->initial;
  st.time = 0.0;
  st.c.assign(2, std::vector<double>(nv));
  for (int i = 0; i < nv; ++i) {
    const auto& p = scn->mesh.vertices[i];
    st.c[0][i] = Manufactured::c1(p[0], p[1], 0.0);
    st.c[1][i] = Manufactured::c2(p[0], p[1], 0.0);
  }
  st.psi = solve_poisson(*scn->disc, st.c, 0.0);
  return scn;
}

std::unique_ptr<Scenario> make_property2d(int n, double beta) {
  auto scn = std::make_unique<Scenario>();
  scn->mesh = generate_structured(Box{{0, 0, 0}, {1, 1, 0}}, {n, n, 0},
                                  [](const Vec3& c) {
                                    return c[0] < 1e-12 || c[0] > 1.0 - 1e-12;
                                  });
  auto& model = scn->model;
  model.species = {{+1, 0.1, 1.0}, {-1, 0.2, 1.0}};
  model.a0 = 0.3;
  model.kappa = 0.001;
  model.chi = 10.0;

  const auto gauss = [](double x, double y, double cx, double cy) {
    const double dx = x - cx, dy = y - cy;
    return std::exp(-100.0 * (dx * dx + dy * dy));
  };

  const int nv = scn->mesh.num_vertices();
  model.epsilon.resize(nv);
  model.rho_f.resize(nv);
  model.psi_dirichlet.assign(nv, 0.0);
  for (int i = 0; i < nv; ++i) {
    const auto& p = scn->mesh.vertices[i];
    model.epsilon[i] = Manufactured::eps(p[0]);
    model.rho_f[i] = gauss(p[0], p[1], 0.25, 0.25) - gauss(p[0], p[1], 0.75, 0.25) +
                     gauss(p[0], p[1], 0.25, 0.75) - gauss(p[0], p[1], 0.75, 0.75);
    model.psi_dirichlet[i] = p[0] > 0.5 ? 1.0 : 0.0;
  }

  scn = finish_scenario(std::move(scn), beta);

  auto& st = scn->initial;
  st.time = 0.0;
  st.c.assign(2, std::vector<double>(nv, 0.1));
  st.psi = solve_poisson(*scn->disc, st.c, 0.0);
  return scn;
}

namespace {

double nanopore_eps_s(double z) {
  if (z >= 0.7)
    return 78.0 * (5.0 / 39.0 +
                   (34.0 / 39.0) * logistic(-15.0 * std::abs(z - 0.62) + 7.5));
  return 78.0 * (5.0 / 39.0 +
                 (34.0 / 39.0) * logistic(-200.0 * std::abs(z - 0.92) + 60.0));
}

}  // namespace

std::unique_ptr<Scenario> make_nanopore(const NanoporeParams& prm) {
  auto scn = std::make_unique<Scenario>();
  scn->mesh = generate_structured(
      Box{{0, 0, 0}, {1, 1, 2}}, prm.n, [](const Vec3& c) {
        return c[2] < 1e-12 || c[2] > 2.0 - 1e-12;
      });

  const int nv = scn->mesh.num_vertices();
  const auto in_solute = [&](const Vec3& p) {
    if (p[2] < prm.slab_lo - 1e-12 || p[2] > prm.slab_hi + 1e-12) return false;
    const double dx = p[0] - 0.5, dy = p[1] - 0.5;
    return dx * dx + dy * dy > prm.pore_radius * prm.pore_radius + 1e-12;
  };

  auto& model = scn->model;
  model.species = {{+1, 0.4, 1.0}, {+1, 0.1, 1.0}, {-1, 0.3, 1.0}};
  model.a0 = prm.a0;
  model.kappa = 0.001;
  model.chi = 5.0;
  model.epsilon.resize(nv);
  model.rho_f.assign(nv, 0.0);
  model.psi_dirichlet.assign(nv, 0.0);
  model.active.assign(nv, 1);
  const double clamp_vals[3] = {0.1, 0.1, 0.2};
  model.conc_dirichlet.assign(3, std::vector<double>(
                                     nv, std::numeric_limits<double>::quiet_NaN()));
  for (int i = 0; i < nv; ++i) {
    const auto& p = scn->mesh.vertices[i];
    const bool solute = in_solute(p);
    model.active[i] = solute ? 0 : 1;
    model.epsilon[i] = solute ? 2.0 : nanopore_eps_s(p[2]);
    if (!solute && (p[2] < 1e-12 || p[2] > 2.0 - 1e-12))
      for (int l = 0; l < 3; ++l) model.conc_dirichlet[l][i] = clamp_vals[l];
    model.psi_dirichlet[i] = p[2] > 1.0 ? prm.voltage : 0.0;
  }

  scn = finish_scenario(std::move(scn), prm.beta);

  // cross-section: NP edges straddling z = 1 (below-cell z <= 1 < above)
  for (std::size_t k = 0; k < scn->disc->np_edges.size(); ++k) {
    const auto& e = scn->dual.interior_edges[scn->disc->np_edges[k]];
    const double zi = scn->mesh.vertices[e.i][2];
    const double zj = scn->mesh.vertices[e.j][2];
    const double zcut = 1.0 + 1e-9;
    if ((zi < zcut) != (zj < zcut)) {
      scn->cross_np_edges.push_back(static_cast<int>(k));
      scn->cross_sign.push_back(zi < zj ? 1 : -1);
    }
  }

  auto& st = scn->initial;
  st.time = 0.0;
  st.c.assign(3, std::vector<double>(nv, 0.0));
  for (int i = 0; i < nv; ++i)
    if (model.active[i])
      for (int l = 0; l < 3; ++l) st.c[l][i] = clamp_vals[l];
  st.psi = solve_poisson(*scn->disc, st.c, 0.0);
  return scn;
}

namespace {

State run_manufactured_trajectory(Scenario& scn, Scheme scheme, double dt,
                                  double T) {
  Stepper stepper(*scn.disc);
  const int steps = static_cast<int>(std::lround(T / dt));
  State prev = scn.initial, curr = scn.initial;
  for (int s = 0; s < steps; ++s) {
    State next = (scheme == Scheme::kI || s == 0)
                     ? stepper.step(curr, nullptr, Scheme::kI, dt)
                     : stepper.step(curr, &prev, Scheme::kII, dt);
    prev = std::move(curr);
    curr = std::move(next);
  }
  return curr;
}

}  // namespace

std::vector<ConvergenceRow> run_convergence(Scheme scheme, MeshRatioRule rule,
                                            const std::vector<int>& levels,
                                            double T, double beta) {
  std::vector<ConvergenceRow> rows;
  for (int n : levels) {
    const double h = 1.0 / n;
    double dt = rule == MeshRatioRule::kDtH2 ? h * h : h / 10.0;
    const int steps = std::max(1, static_cast<int>(std::lround(T / dt)));
    dt = T / steps;

    auto scn = make_manufactured(n, beta);
    State curr;
    try {
      curr = run_manufactured_trajectory(*scn, scheme, dt, T);
    } catch (const SolverError&) {
      break;  // partial table
    }

    ConvergenceRow row;
    row.h = h;
    row.dt = dt;
    double e1 = 0.0, e2 = 0.0, ep = 0.0;
    for (int i = 0; i < scn->dual.num_cells(); ++i) {
      const auto& p = scn->mesh.vertices[i];
      const double m = scn->dual.cell_measures[i];
      const double d1 = curr.c[0][i] - Manufactured::c1(p[0], p[1], curr.time);
      const double d2 = curr.c[1][i] - Manufactured::c2(p[0], p[1], curr.time);
      const double dp = curr.psi[i] - Manufactured::psi(p[0], p[1], curr.time);
      e1 += m * d1 * d1;
      e2 += m * d2 * d2;
      ep += m * dp * dp;
    }
    row.err_c1 = std::sqrt(e1);
    row.err_c2 = std::sqrt(e2);
    row.err_psi = std::sqrt(ep);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ConvergenceRow> run_temporal_refinement(
    Scheme scheme, int n, const std::vector<double>& dts, double T) {
  auto scn = make_manufactured(n);
  double dt_min = dts.front();
  for (double dt : dts) dt_min = std::min(dt_min, dt);
  const State ref = run_manufactured_trajectory(*scn, scheme, dt_min / 8.0, T);

  std::vector<ConvergenceRow> rows;
  for (double dt : dts) {
    const State sol = run_manufactured_trajectory(*scn, scheme, dt, T);
    ConvergenceRow row;
    row.h = 1.0 / n;
    row.dt = dt;
    double e1 = 0.0, e2 = 0.0, ep = 0.0;
    for (int i = 0; i < scn->dual.num_cells(); ++i) {
      const double m = scn->dual.cell_measures[i];
      const double d1 = sol.c[0][i] - ref.c[0][i];
      const double d2 = sol.c[1][i] - ref.c[1][i];
      const double dp = sol.psi[i] - ref.psi[i];
      e1 += m * d1 * d1;
      e2 += m * d2 * d2;
      ep += m * dp * dp;
    }
    rows.push_back(
        {row.h, dt, std::sqrt(e1), std::sqrt(e2), std::sqrt(ep)});
  }
  return rows;
}

std::vector<double> observed_orders(const std::vector<double>& errors) {
  std::vector<double> orders(errors.size(), 0.0);
  for (std::size_t k = 1; k < errors.size(); ++k)
    orders[k] = std::log2(errors[k - 1] / errors[k]);
  return orders;
}

double ionic_current(const Scenario& scn, const State& state, int species) {
  if (scn.cross_np_edges.empty())
    throw ModelError("ionic_current: empty cross-section");
  const auto& disc = *scn.disc;

  std::vector<std::vector<double>> mu(disc.num_species());
  for (int l = 0; l < disc.num_species(); ++l)
    chemical_potential_field(state, *disc.model, l, mu[l]);

  double I = 0.0;
  for (std::size_t k = 0; k < scn.cross_np_edges.size(); ++k) {
    const int ke = scn.cross_np_edges[k];
    const auto& e = scn.dual.interior_edges[disc.np_edges[ke]];
    const double dmu = mu[species][e.j] - mu[species][e.i];
    const int from = dmu < 0.0 ? e.i : e.j;
    const auto& st = disc.stencils->get(disc.np_edges[ke], from, e);
    const double mob =
        reconstruct_face_value(state.c[species], e, st, from, disc.beta);
    // net mass flow i -> j, re-signed to point along +z
    const double q_ij = disc.model->species[species].gamma * e.tau * mob *
                        (mu[species][e.i] - mu[species][e.j]);
    I += scn.cross_sign[k] * q_ij;
  }
  return I;
}

double rectification_ratio(double current_neg_v, double current_pos_v) {
  if (current_pos_v == 0.0)
    throw ModelError("rectification_ratio undefined: I(V) = 0");
  return std::abs(current_neg_v / current_pos_v);
}

std::vector<IvPoint> iv_sweep(const NanoporeParams& base,
                              const std::vector<double>& voltages,
                              Scheme scheme, double dt, double t_max,
                              double steady_tol, int threads) {
  std::vector<IvPoint> out(voltages.size());
  std::mutex err_mutex;
  std::string first_error;

  const auto run_one = [&](std::size_t idx) {
    try {
      NanoporeParams prm = base;
      prm.voltage = voltages[idx];
      auto scn = make_nanopore(prm);
      Stepper stepper(*scn->disc);
      State prev = scn->initial, curr = scn->initial;
      const int steps = static_cast<int>(std::ceil(t_max / dt));
      for (int s = 0; s < steps; ++s) {
        State next = (scheme == Scheme::kI || s == 0)
                         ? stepper.step(curr, nullptr, Scheme::kI, dt)
                         : stepper.step(curr, &prev, Scheme::kII, dt);
        const double delta = state_distance(next, curr);
        prev = std::move(curr);
        curr = std::move(next);
        if (delta <= steady_tol * dt) break;  // per unit time
      }
      IvPoint pt;
      pt.voltage = voltages[idx];
      for (int l = 0; l < 3; ++l)
        pt.current.push_back(ionic_current(*scn, curr, l));
      out[idx] = std::move(pt);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (first_error.empty()) first_error = e.what();
    }
  };

  if (threads <= 1) {
    for (std::size_t k = 0; k < voltages.size(); ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    std::size_t next_job = 0;
    std::mutex job_mutex;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard<std::mutex> lock(job_mutex);
            if (next_job >= voltages.size()) return;
            k = next_job++;
          }
          run_one(k);
        }
      });
    for (auto& th : pool) th.join();
  }
  if (!first_error.empty())
    throw SolverError("iv_sweep: " + first_error);
  return out;
}

void write_field_dump(const std::string& path, const State& state,
                      const DualMesh& dual, const ModelSpec& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "'");
  out << "# id x y z";
  for (int l = 1; l <= model.num_species(); ++l) out << " c_" << l;
  out << " psi\n";
  char buf[64];
  for (int i = 0; i < dual.num_cells(); ++i) {
    out << i;
    for (int d = 0; d < 3; ++d) {
      std::snprintf(buf, sizeof buf, " %.17g", dual.centers[i][d]);
      out << buf;
    }
    for (int l = 0; l < model.num_species(); ++l) {
      std::snprintf(buf, sizeof buf, " %.17g", state.c[l][i]);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, " %.17g", state.psi[i]);
    out << buf << "\n";
  }
}

}  // namespace scenarios
}  // namespace mpnp
