// Acceptance suite: runs every structural guarantee end to end and prints
// one PASS/FAIL line per criterion. Exit code = number of failures.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "mpnp/config.hpp"
#include "mpnp/diagnostics.hpp"
#include "mpnp/scenarios.hpp"
#include "mpnp/solver.hpp"
#include "../support.hpp"
#include "../support_jets.hpp"

using namespace mpnp;
using scenarios::Manufactured;

namespace {

int failures = 0;

void report(int idx, bool pass, const std::string& label,
            const std::string& detail) {
  std::printf("[%2d/10] %s  %-34s %s\n", idx, pass ? "PASS" : "FAIL",
              label.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---------------------------------------------------------------------------

void criterion_1_convergence_scheme_I() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = scenarios::run_convergence(
      Scheme::kI, scenarios::MeshRatioRule::kDtH2, {8, 16, 32, 64});
  bool pass = rows.size() == 4;
  double o1 = 0, o2 = 0, op = 0;
  if (pass) {
    o1 = std::log2(rows[2].err_c1 / rows[3].err_c1);
    o2 = std::log2(rows[2].err_c2 / rows[3].err_c2);
    op = std::log2(rows[2].err_psi / rows[3].err_psi);
    pass = o1 >= 1.8 && o2 >= 1.8 && op >= 1.8;
  }
  report(1, pass, "convergence, Scheme I (dt=h^2)",
         fmt("finest-pair orders c1=%.2f c2=%.2f psi=%.2f (>=1.8), %.0fs",
             o1, o2, op, elapsed_s(t0)));
}

void criterion_2_convergence_scheme_II() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = scenarios::run_convergence(
      Scheme::kII, scenarios::MeshRatioRule::kDtHOver10, {8, 16, 32, 64});
  bool pass = rows.size() == 4;
  double o1 = 0, o2 = 0, op = 0, to_min = 0;
  if (pass) {
    o1 = std::log2(rows[2].err_c1 / rows[3].err_c1);
    o2 = std::log2(rows[2].err_c2 / rows[3].err_c2);
    op = std::log2(rows[2].err_psi / rows[3].err_psi);
    pass = o1 >= 1.8 && o2 >= 1.8 && op >= 1.8;
  }
  const auto trows = scenarios::run_temporal_refinement(
      Scheme::kII, 16, {0.02, 0.01, 0.005}, 0.1);
  if (trows.size() == 3) {
    const double ta = std::log2(trows[1].err_c1 / trows[2].err_c1);
    const double tb = std::log2(trows[1].err_c2 / trows[2].err_c2);
    const double tc = std::log2(trows[1].err_psi / trows[2].err_psi);
    to_min = std::min({ta, tb, tc});
    pass = pass && to_min >= 1.8;
  } else {
    pass = false;
  }
  report(2, pass, "convergence, Scheme II (dt=h/10)",
         fmt("spatial c1=%.2f c2=%.2f psi=%.2f, temporal>=%.2f, %.0fs", o1,
             o2, op, to_min, elapsed_s(t0)));
}

struct TrajectoryDigest {
  double worst_mass_drift = 0.0;
  bool dissipation_ok = true;
  double worst_dissipation_slack = -1e300;  // max of F diff + bound
  double min_conc = 1e300;
  double min_solvent = 1e300;
  bool completed = true;
};

TrajectoryDigest run_property(Scheme scheme, double dt, int steps) {
  TrajectoryDigest digest;
  auto scn = scenarios::make_property2d(10);
  Stepper stepper(*scn->disc);
  State prev = scn->initial, curr = scn->initial;
  const auto rec0 = make_record(curr, scn->dual, scn->model);
  auto last = rec0;
  digest.min_conc = rec0.c_min;
  digest.min_solvent = rec0.solvent_min;
  try {
    for (int s = 0; s < steps; ++s) {
      StepInfo info;
      State next = (scheme == Scheme::kI || s == 0)
                       ? stepper.step(curr, nullptr, Scheme::kI, dt, &info)
                       : stepper.step(curr, &prev, Scheme::kII, dt, &info);
      prev = std::move(curr);
      curr = std::move(next);
      const auto rec = make_record(curr, scn->dual, scn->model, &info, 0.0);
      for (int l = 0; l < 2; ++l)
        digest.worst_mass_drift =
            std::max(digest.worst_mass_drift,
                     std::abs(rec.mass[l] - rec0.mass[l]) / rec0.mass[l]);
      const double slack = rec.F - last.F + rec.dissipation_bound;
      digest.worst_dissipation_slack =
          std::max(digest.worst_dissipation_slack, slack);
      if (check_dissipation(last, rec) != DissipationVerdict::kPass)
        digest.dissipation_ok = false;
      digest.min_conc = std::min(digest.min_conc, rec.c_min);
      digest.min_solvent = std::min(digest.min_solvent, rec.solvent_min);
      last = rec;
    }
  } catch (const SolverError&) {
    digest.completed = false;
  }
  return digest;
}

void criterion_3_and_4_and_5() {
  const auto t0 = std::chrono::steady_clock::now();

  // the two 200-step reference runs
  const auto runI = run_property(Scheme::kI, 0.02, 200);
  const auto runII = run_property(Scheme::kII, 0.02, 200);

  const bool mass_pass = runI.completed && runII.completed &&
                         runI.worst_mass_drift <= 1e-12 &&
                         runII.worst_mass_drift <= 1e-12;
  report(3, mass_pass, "mass conservation (200 steps)",
         fmt("rel drift: scheme I %.2e, scheme II %.2e (<=1e-12)",
             runI.worst_mass_drift, runII.worst_mass_drift));

  // unconditionality spot-check at large time steps
  bool diss_pass = runI.dissipation_ok && runII.dissipation_ok;
  double worst_slack =
      std::max(runI.worst_dissipation_slack, runII.worst_dissipation_slack);
  for (Scheme scheme : {Scheme::kI, Scheme::kII}) {
    for (const auto& [dt, steps] : std::vector<std::pair<double, int>>{
             {0.2, 40}, {1.0, 15}}) {
      const auto d = run_property(scheme, dt, steps);
      diss_pass = diss_pass && d.completed && d.dissipation_ok;
      worst_slack = std::max(worst_slack, d.worst_dissipation_slack);
    }
  }
  report(4, diss_pass, "energy dissipation (dt in {1/50,1/5,1})",
         fmt("F^{n+1}-F^n <= -bound+1e-10 every step; worst slack %.1e, %.0fs",
             worst_slack, elapsed_s(t0)));

  // positivity: the runs above plus randomized initial conditions
  bool pos_pass = runI.min_conc > 0 && runI.min_solvent > 0 &&
                  runII.min_conc > 0 && runII.min_solvent > 0;
  double min_seen = std::min({runI.min_conc, runII.min_conc});
  std::mt19937_64 rng(424242);
  test::Fixture fx;
  fx.mesh = generate_structured(
      Box{{0, 0, 0}, {1, 1, 0}}, {5, 5, 0},
      [](const Vec3& c) { return c[0] < 1e-12 || c[0] > 1 - 1e-12; });
  test::fill_property_model(fx);
  fx.finalize();
  Stepper stepper(*fx.disc);
  for (int rep = 0; rep < 50 && pos_pass; ++rep) {
    State prev = test::make_random_admissible_state(fx, rng);
    State curr = prev;
    try {
      for (int s = 0; s < 5; ++s) {
        State next = s == 0 ? stepper.step(curr, nullptr, Scheme::kI, 0.05)
                            : stepper.step(curr, &prev, Scheme::kII, 0.05);
        prev = std::move(curr);
        curr = std::move(next);
        const auto rec = make_record(curr, fx.dual, fx.model);
        min_seen = std::min({min_seen, rec.c_min, rec.solvent_min});
        pos_pass = pos_pass && rec.c_min > 0 && rec.solvent_min > 0;
      }
    } catch (const SolverError&) {
      pos_pass = false;
    }
  }
  report(5, pos_pass, "positivity (runs + 50 random ICs)",
         fmt("min over all trajectories: %.3e (> 0)", min_seen));
}

void criterion_6_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(777);
  bool pass = true;
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    test::Fixture fx;
    fx.mesh = test::make_random_quad(rng);
    test::fill_property_model(fx);
    fx.finalize();
    const State sm = test::make_random_admissible_state(fx, rng, 0.6);
    State sn = test::make_random_admissible_state(fx, rng, 0.6);
    try {
      Stepper stepper(*fx.disc);
      const State a = stepper.step(sn, &sm, Scheme::kII, 0.05);
      const State b = minimize_J_oracle(*fx.disc, sn, sm, 0.05);
      worst = std::max(worst, state_distance(a, b));
    } catch (const SolverError&) {
      pass = false;
    }
  }
  pass = pass && worst <= 1e-8;
  report(6, pass, "oracle equivalence (10 random 4-cell)",
         fmt("max |step - argmin J| = %.2e (<=1e-8), %.1fs", worst,
             elapsed_s(t0)));
}

void criterion_7_steady_states() {
  const auto t0 = std::chrono::steady_clock::now();
  auto scn = scenarios::make_property2d(10);
  const double area = scn->dual.domain_measure;
  const State pb = solve_steady_pb(*scn->disc, {0.1 * area, 0.1 * area});

  // 100 steps of each scheme starting at the PB state
  double worst_drift = 0.0;
  for (Scheme scheme : {Scheme::kI, Scheme::kII}) {
    Stepper stepper(*scn->disc);
    State prev = pb, curr = pb;
    for (int s = 0; s < 100; ++s) {
      State next = (scheme == Scheme::kI || s == 0)
                       ? stepper.step(curr, nullptr, Scheme::kI, 0.02)
                       : stepper.step(curr, &prev, Scheme::kII, 0.02);
      prev = std::move(curr);
      curr = std::move(next);
    }
    worst_drift = std::max(worst_drift, state_distance(curr, pb));
  }

  // long trajectory converges to the PB state
  Stepper stepper(*scn->disc);
  State prev = scn->initial, curr = scn->initial;
  double dist = 1e300;
  int s = 0;
  for (; s < 4000; ++s) {
    State next = s == 0 ? stepper.step(curr, nullptr, Scheme::kI, 0.1)
                        : stepper.step(curr, &prev, Scheme::kII, 0.1);
    prev = std::move(curr);
    curr = std::move(next);
    dist = state_distance(curr, pb);
    if (dist <= 5e-7) break;
  }
  const bool pass = worst_drift <= 1e-9 && dist <= 1e-6;
  report(7, pass, "steady-state preservation",
         fmt("100-step drift %.1e (<=1e-9); |traj - PB| %.1e after %d steps, "
             "%.0fs",
             worst_drift, dist, s + 1, elapsed_s(t0)));
}

void criterion_8_multislope_positivity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> mag(-6.0, 2.0);
  long checked = 0;
  long violations = 0;
  int fields_done = 0;
  while (fields_done < 10000) {
    test::Fixture fx;
    fx.mesh = test::make_jittered_2d(3 + fields_done % 5, rng);
    fx.model.species = {{+1, 0.1, 1.0}};
    fx.model.a0 = 0.3;
    const int nv = fx.mesh.num_vertices();
    fx.model.epsilon.assign(nv, 1.0);
    fx.model.rho_f.assign(nv, 0.0);
    fx.model.psi_dirichlet.assign(nv, 0.0);
    fx.finalize();
    std::vector<double> u(nv);
    for (int rep = 0; rep < 100 && fields_done < 10000; ++rep, ++fields_done) {
      for (auto& x : u) x = std::pow(10.0, mag(rng));
      for (double beta : {1.0, 1.5, 2.0}) {
        for (std::size_t eid = 0; eid < fx.dual.interior_edges.size(); ++eid) {
          const auto& e = fx.dual.interior_edges[eid];
          const double vij = reconstruct_face_value(
              u, e, fx.stencils.get(static_cast<int>(eid), e.i, e), e.i, beta);
          const double vji = reconstruct_face_value(
              u, e, fx.stencils.get(static_cast<int>(eid), e.j, e), e.j, beta);
          checked += 2;
          if (!(vij > 0.0)) ++violations;
          if (!(vji > 0.0)) ++violations;
        }
      }
    }
  }
  report(8, violations == 0, "multislope positivity (1e4 fields)",
         fmt("%ld face values checked, %ld nonpositive, %.0fs", checked,
             violations, elapsed_s(t0)));
}

void criterion_9_nanopore() {
  const auto t0 = std::chrono::steady_clock::now();
  scenarios::NanoporeParams prm;  // default coarse 8x8x16 geometry
  std::vector<double> voltages{1, -1, 2, -2, 3, -3, 4, -4, 5, -5};
  bool pass = true;
  std::string detail;
  try {
    const auto points = scenarios::iv_sweep(prm, voltages, Scheme::kI, 0.05,
                                            30.0, 1e-7, 1);
    const auto current = [&](double v, int l) {
      for (const auto& p : points)
        if (p.voltage == v) return p.current[l];
      throw SolverError("voltage missing");
    };
    // selectivity: |I1| > |I2| at every voltage
    double min_ratio = 1e300;
    for (double v : voltages) {
      const double r = std::abs(current(v, 0)) / std::abs(current(v, 1));
      min_ratio = std::min(min_ratio, r);
      pass = pass && std::abs(current(v, 0)) > std::abs(current(v, 1));
    }
    // rectification: r2 > r1 > 0 and r2 further from 1
    double worst_r1 = 0, worst_r2 = 0;
    bool rect = true;
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) {
      const double r1 =
          scenarios::rectification_ratio(current(-v, 0), current(v, 0));
      const double r2 =
          scenarios::rectification_ratio(current(-v, 1), current(v, 1));
      rect = rect && r2 > r1 && r1 > 0 &&
             std::abs(r2 - 1.0) > std::abs(r1 - 1.0);
      worst_r1 = r1;
      worst_r2 = r2;
    }
    pass = pass && rect;
    detail = fmt("min |I1|/|I2| = %.2f; r1(5)=%.3f r2(5)=%.3f, %.0fs",
                 min_ratio, worst_r1, worst_r2, elapsed_s(t0));
  } catch (const std::exception& e) {
    pass = false;
    detail = e.what();
  }
  report(9, pass, "nanopore selectivity + rectification", detail);
}

// jet-based residual oracle (same construction as the unit test)
void criterion_10_manufactured_self_test() {
  using test::Jet2;
  std::mt19937_64 rng(909090);
  std::uniform_real_distribution<double> ux(0.01, 0.99), ut(0.0, 0.5);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double x = ux(rng), y = ux(rng), t = ut(rng);
    const double a13 = 1e-3, a23 = 8e-3, a03 = 0.027;
    const Jet2 X = Jet2::var_x(x), Y = Jet2::var_y(y);
    const Jet2 P = 0.1 * std::exp(-t) * cos(M_PI * X) * cos(M_PI * Y);
    const Jet2 c1 = P + 0.2;
    const Jet2 c2 = 0.2 - P;
    const Jet2 psi = P / (Manufactured::kappa * M_PI * M_PI);
    const Jet2 w = 1.0 - a13 * c1 - a23 * c2;
    const Jet2 u = -50.0 * abs(X - 0.5) + 10.0;
    const Jet2 ie = inv(30.0 + 48.0 * (1.0 / (1.0 + exp(u))));

    const auto grad_x = [](const Jet2& f) {
      return Jet2{f.dx, f.dxx, f.dxy, 0, 0, 0};
    };
    const auto grad_y = [](const Jet2& f) {
      return Jet2{f.dy, f.dxy, f.dyy, 0, 0, 0};
    };
    const Jet2 Sx = a13 * grad_x(c1) + a23 * grad_x(c2);
    const Jet2 Sy = a13 * grad_y(c1) + a23 * grad_y(c2);

    const auto divF = [&](const Jet2& c, double a3, double a, double zsign) {
      const Jet2 Fx = grad_x(c) + zsign * (c * grad_x(psi)) +
                      (a3 / a03) * c * Sx / w +
                      (Manufactured::chi / a) * c * grad_x(ie);
      const Jet2 Fy =
          grad_y(c) + zsign * (c * grad_y(psi)) + (a3 / a03) * c * Sy / w;
      return Fx.dx + Fy.dy;
    };

    const double r1 =
        -P.v - divF(c1, a13, Manufactured::a1, +1.0) - Manufactured::f1(x, y, t);
    const double r2 =
        +P.v - divF(c2, a23, Manufactured::a2, -1.0) - Manufactured::f2(x, y, t);
    const Jet2 eps = inv(ie);
    const Jet2 Ex = eps * grad_x(psi);
    const Jet2 Ey = eps * grad_y(psi);
    const double rp = -Manufactured::kappa * (Ex.dx + Ey.dy) - (c1.v - c2.v) -
                      Manufactured::rho_f(x, y, t);
    worst = std::max({worst, std::abs(r1), std::abs(r2), std::abs(rp)});
  }
  report(10, worst <= 1e-10, "manufactured-source self-test",
         fmt("max |PDE residual| at 100 random points = %.2e (<=1e-10)",
             worst));
}

}  // namespace

int main() {
  std::printf("mpnp acceptance suite\n");
  criterion_1_convergence_scheme_I();
  criterion_2_convergence_scheme_II();
  criterion_3_and_4_and_5();
  criterion_6_oracle_equivalence();
  criterion_7_steady_states();
  criterion_8_multislope_positivity();
  criterion_9_nanopore();
  criterion_10_manufactured_self_test();
  std::printf("%s (%d failure%s)\n", failures == 0 ? "ALL PASS" : "FAILURES",
              failures, failures == 1 ? "" : "s");
  return failures;
}
