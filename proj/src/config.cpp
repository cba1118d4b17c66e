#include "mpnp/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mpnp/expression.hpp"

namespace mpnp {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return j;
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= (key == a);
    if (!ok)
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

void require_schema(const json& j) {
  if (!j.contains("schema_version") || j["schema_version"] != 1)
    throw ConfigError("config requires \"schema_version\": 1");
}

Scheme parse_scheme(const std::string& s) {
  if (s == "I" || s == "1") return Scheme::kI;
  if (s == "II" || s == "2") return Scheme::kII;
  throw ConfigError("scheme must be \"I\" or \"II\"");
}

Expression parse_expr(const json& j, const std::string& where) {
  try {
    if (j.is_number()) return Expression::parse(std::to_string(j.get<double>()));
    return Expression::parse(j.get<std::string>());
  } catch (const ExpressionError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::string atomic_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void atomic_rename(const std::string& tmp, const std::string& final) {
  std::error_code ec;
  std::filesystem::rename(tmp, final, ec);
  if (ec) throw std::runtime_error("rename failed: " + ec.message());
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const json j = load_json(path);
  require_schema(j);
  check_keys(j, {"schema_version", "mesh", "model", "initial", "scheme",
                 "newton", "output", "assertions", "mass_targets"},
             "config root");

  RunConfig cfg;

  const json& mesh = j.at("mesh");
  check_keys(mesh, {"file", "generator", "dirichlet_where"}, "mesh");
  if (mesh.contains("file")) {
    cfg.mesh_file = mesh["file"].get<std::string>();
    if (!std::filesystem::exists(*cfg.mesh_file))
      throw ConfigError("mesh file does not exist: " + *cfg.mesh_file);
  } else {
    const json& gen = mesh.at("generator");
    check_keys(gen, {"kind", "n", "lower", "upper"}, "mesh.generator");
    const std::string kind = gen.at("kind").get<std::string>();
    if (kind != "box2d" && kind != "box3d")
      throw ConfigError("generator.kind must be box2d or box3d");
    cfg.mesh_3d = kind == "box3d";
    const auto n = gen.at("n").get<std::vector<int>>();
    if (static_cast<int>(n.size()) != (cfg.mesh_3d ? 3 : 2))
      throw ConfigError("generator.n has wrong length");
    cfg.mesh_n = {n[0], n[1], cfg.mesh_3d ? n[2] : 0};
    cfg.mesh_box = Box{{0, 0, 0}, {1, 1, cfg.mesh_3d ? 1.0 : 0.0}};
    if (gen.contains("lower")) {
      const auto lo = gen["lower"].get<std::vector<double>>();
      for (std::size_t k = 0; k < lo.size() && k < 3; ++k)
        cfg.mesh_box.lo[k] = lo[k];
    }
    if (gen.contains("upper")) {
      const auto hi = gen["upper"].get<std::vector<double>>();
      for (std::size_t k = 0; k < hi.size() && k < 3; ++k)
        cfg.mesh_box.hi[k] = hi[k];
    }
    if (mesh.contains("dirichlet_where"))
      cfg.dirichlet_where = mesh["dirichlet_where"].get<std::string>();
  }

  const json& model = j.at("model");
  check_keys(model,
             {"species", "a0", "kappa", "chi", "epsilon", "rho_f",
              "psi_dirichlet", "psi_neumann", "voltage", "solute_where",
              "epsilon_solute", "conc_dirichlet"},
             "model");
  for (const json& sp : model.at("species")) {
    check_keys(sp, {"z", "a", "gamma"}, "species");
    cfg.species.push_back({sp.at("z").get<int>(), sp.at("a").get<double>(),
                           sp.value("gamma", 1.0)});
  }
  cfg.a0 = model.value("a0", 0.3);
  cfg.kappa = model.value("kappa", 1.0);
  cfg.chi = model.value("chi", 0.0);
  if (model.contains("epsilon"))
    cfg.epsilon_expr = model["epsilon"].is_number()
                           ? std::to_string(model["epsilon"].get<double>())
                           : model["epsilon"].get<std::string>();
  if (model.contains("rho_f"))
    cfg.rho_f_expr = model["rho_f"].is_number()
                         ? std::to_string(model["rho_f"].get<double>())
                         : model["rho_f"].get<std::string>();
  if (model.contains("psi_dirichlet"))
    cfg.psi_dirichlet_expr =
        model["psi_dirichlet"].is_number()
            ? std::to_string(model["psi_dirichlet"].get<double>())
            : model["psi_dirichlet"].get<std::string>();
  if (model.contains("psi_neumann"))
    cfg.psi_neumann_expr =
        model["psi_neumann"].is_number()
            ? std::to_string(model["psi_neumann"].get<double>())
            : model["psi_neumann"].get<std::string>();
  cfg.voltage = model.value("voltage", 0.0);
  if (model.contains("solute_where"))
    cfg.solute_where = model["solute_where"].get<std::string>();
  cfg.epsilon_solute = model.value("epsilon_solute", 2.0);
  if (model.contains("conc_dirichlet")) {
    const json& cd = model["conc_dirichlet"];
    check_keys(cd, {"where", "values"}, "conc_dirichlet");
    cfg.conc_dirichlet_where = cd.at("where").get<std::string>();
    cfg.conc_dirichlet_values = cd.at("values").get<std::vector<double>>();
    if (cfg.conc_dirichlet_values.size() != cfg.species.size())
      throw ConfigError("conc_dirichlet.values: one value per species");
  }

  const json& init = j.at("initial");
  check_keys(init, {"concentrations"}, "initial");
  for (const json& c : init.at("concentrations"))
    cfg.initial_conc.push_back(c.is_number()
                                   ? std::to_string(c.get<double>())
                                   : c.get<std::string>());
  if (cfg.initial_conc.size() != cfg.species.size())
    throw ConfigError("initial.concentrations: one entry per species");

  const json& sch = j.at("scheme");
  check_keys(sch, {"type", "dt", "t_end", "beta"}, "scheme");
  cfg.scheme = parse_scheme(sch.at("type").get<std::string>());
  cfg.dt = sch.at("dt").get<double>();
  cfg.t_end = sch.at("t_end").get<double>();
  cfg.beta = sch.value("beta", 2.0);
  if (!(cfg.dt > 0.0)) throw ConfigError("scheme.dt must be > 0");
  if (!(cfg.t_end >= cfg.dt)) throw ConfigError("scheme.t_end must be >= dt");
  if (cfg.beta < 1.0 || cfg.beta > 2.0)
    throw ConfigError("scheme.beta must lie in [1,2]");

  if (j.contains("newton")) {
    const json& nw = j["newton"];
    check_keys(nw, {"tol_residual", "max_iter", "theta"}, "newton");
    cfg.newton.tol_residual = nw.value("tol_residual", 1e-10);
    cfg.newton.max_iter = nw.value("max_iter", 50);
    cfg.newton.theta_safeguard = nw.value("theta", 0.95);
    if (!(cfg.newton.tol_residual > 0.0) || cfg.newton.max_iter < 1 ||
        !(cfg.newton.theta_safeguard > 0.0 &&
          cfg.newton.theta_safeguard < 1.0))
      throw ConfigError("invalid newton block");
  }

  if (j.contains("output")) {
    const json& out = j["output"];
    check_keys(out, {"diagnostics", "fields", "field_stride"}, "output");
    cfg.diagnostics_csv = out.value("diagnostics", cfg.diagnostics_csv);
    cfg.fields_out = out.value("fields", cfg.fields_out);
    cfg.field_stride = out.value("field_stride", 0);
  }

  if (j.contains("assertions")) {
    const json& as = j["assertions"];
    check_keys(as, {"mass", "energy", "positivity"}, "assertions");
    cfg.assert_mass = as.value("mass", true);
    cfg.assert_energy = as.value("energy", true);
    cfg.assert_positivity = as.value("positivity", true);
  }

  if (j.contains("mass_targets"))
    cfg.mass_targets = j["mass_targets"].get<std::vector<double>>();

  return cfg;
}

std::unique_ptr<scenarios::Scenario> RunConfig::build() const {
  auto scn = std::make_unique<scenarios::Scenario>();

  const double V = voltage;
  if (mesh_file) {
    scn->mesh = load_mesh(*mesh_file);
  } else {
    Expression where;
    if (!dirichlet_where.empty()) where = Expression::parse(dirichlet_where);
    scn->mesh = generate_structured(
        mesh_box, mesh_n, [&where, V](const Vec3& c) {
          return !where.empty() && where.eval(c[0], c[1], c[2], 0.0, V) >= 0.5;
        });
  }
  scn->dual = build_dual(scn->mesh);
  scn->stencils = build_stencils(scn->mesh, scn->dual);

  auto& model = scn->model;
  model.species = species;
  model.a0 = a0;
  model.kappa = kappa;
  model.chi = chi;

  const Expression eps_e = Expression::parse(epsilon_expr);
  const Expression rho_e = Expression::parse(rho_f_expr);
  const Expression psid_e = Expression::parse(psi_dirichlet_expr);
  Expression solute_e, concd_e;
  if (!solute_where.empty()) solute_e = Expression::parse(solute_where);
  if (!conc_dirichlet_where.empty())
    concd_e = Expression::parse(conc_dirichlet_where);

  const int nv = scn->mesh.num_vertices();
  const int M = model.num_species();
  model.epsilon.resize(nv);
  model.rho_f.resize(nv);
  model.psi_dirichlet.resize(nv);
  model.active.assign(nv, 1);
  if (!conc_dirichlet_where.empty())
    model.conc_dirichlet.assign(
        M, std::vector<double>(nv, std::numeric_limits<double>::quiet_NaN()));

  for (int i = 0; i < nv; ++i) {
    const auto& p = scn->mesh.vertices[i];
    const bool solute =
        !solute_e.empty() && solute_e.eval(p[0], p[1], p[2], 0.0, V) >= 0.5;
    model.active[i] = solute ? 0 : 1;
    model.epsilon[i] =
        solute ? epsilon_solute : eps_e.eval(p[0], p[1], p[2], 0.0, V);
    model.rho_f[i] = rho_e.eval(p[0], p[1], p[2], 0.0, V);
    model.psi_dirichlet[i] = psid_e.eval(p[0], p[1], p[2], 0.0, V);
    if (!solute && !concd_e.empty() &&
        concd_e.eval(p[0], p[1], p[2], 0.0, V) >= 0.5)
      for (int l = 0; l < M; ++l)
        model.conc_dirichlet[l][i] = conc_dirichlet_values[l];
  }
  if (rho_e.depends_on('t'))
    model.rho_f_fn = [rho_e, V](const Vec3& p, double t) {
      return rho_e.eval(p[0], p[1], p[2], t, V);
    };
  if (psid_e.depends_on('t'))
    model.psi_dirichlet_fn = [psid_e, V](const Vec3& p, double t) {
      return psid_e.eval(p[0], p[1], p[2], t, V);
    };
  if (!psi_neumann_expr.empty()) {
    const Expression psin_e = Expression::parse(psi_neumann_expr);
    model.psi_neumann.resize(scn->dual.neumann_edges.size());
    for (std::size_t k = 0; k < scn->dual.neumann_edges.size(); ++k) {
      const auto& f =
          scn->mesh.boundary_faces[scn->dual.neumann_edges[k].face];
      Vec3 ctr{0, 0, 0};
      int cnt = 0;
      for (int a = 0; a < scn->mesh.dim; ++a, ++cnt)
        ctr = ctr + scn->mesh.vertices[f.vertices[a]];
      ctr = (1.0 / cnt) * ctr;
      model.psi_neumann[k] = psin_e.eval(ctr[0], ctr[1], ctr[2], 0.0, V);
    }
  }

  model.validate(scn->dual);
  scn->disc = std::make_unique<Discretization>(scn->mesh, scn->dual, model,
                                               scn->stencils, beta);

  auto& st = scn->initial;
  st.time = 0.0;
  st.c.assign(M, std::vector<double>(nv, 0.0));
  for (int l = 0; l < M; ++l) {
    const Expression ic = Expression::parse(initial_conc[l]);
    for (int i = 0; i < nv; ++i) {
      if (!model.is_active(i)) continue;
      const auto& p = scn->mesh.vertices[i];
      st.c[l][i] = model.is_conc_clamped(l, i)
                       ? model.conc_dirichlet[l][i]
                       : ic.eval(p[0], p[1], p[2], 0.0, V);
    }
  }
  st.psi = solve_poisson(*scn->disc, st.c, 0.0);
  st.validate(model);
  return scn;
}

ConvergenceConfig load_convergence_config(const std::string& path) {
  const json j = load_json(path);
  require_schema(j);
  check_keys(j, {"schema_version", "scheme", "levels", "ratio", "T", "beta",
                 "temporal"},
             "convergence config");
  ConvergenceConfig cfg;
  cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
  cfg.levels = j.at("levels").get<std::vector<int>>();
  const std::string ratio = j.at("ratio").get<std::string>();
  if (ratio == "dt=h^2")
    cfg.rule = scenarios::MeshRatioRule::kDtH2;
  else if (ratio == "dt=h/10")
    cfg.rule = scenarios::MeshRatioRule::kDtHOver10;
  else
    throw ConfigError("ratio must be \"dt=h^2\" or \"dt=h/10\"");
  cfg.T = j.value("T", 0.1);
  cfg.beta = j.value("beta", 2.0);
  if (j.contains("temporal")) {
    const json& tp = j["temporal"];
    check_keys(tp, {"n", "dts"}, "temporal");
    cfg.temporal_n = tp.at("n").get<int>();
    cfg.temporal_dts = tp.at("dts").get<std::vector<double>>();
  }
  return cfg;
}

IvConfig load_iv_config(const std::string& path) {
  const json j = load_json(path);
  require_schema(j);
  check_keys(j, {"schema_version", "n", "voltages", "scheme", "dt", "t_max",
                 "steady_tol", "a0", "pore_radius", "slab", "beta"},
             "iv config");
  IvConfig cfg;
  if (j.contains("n")) {
    const auto n = j["n"].get<std::vector<int>>();
    if (n.size() != 3) throw ConfigError("n must have three entries");
    cfg.base.n = {n[0], n[1], n[2]};
  }
  cfg.voltages = j.at("voltages").get<std::vector<double>>();
  if (cfg.voltages.empty()) throw ConfigError("voltages must be nonempty");
  if (j.contains("scheme"))
    cfg.scheme = parse_scheme(j["scheme"].get<std::string>());
  cfg.dt = j.value("dt", 0.05);
  cfg.t_max = j.value("t_max", 20.0);
  cfg.steady_tol = j.value("steady_tol", 1e-7);
  cfg.base.a0 = j.value("a0", 0.3);
  cfg.base.pore_radius = j.value("pore_radius", 0.25);
  if (j.contains("slab")) {
    const auto s = j["slab"].get<std::vector<double>>();
    if (s.size() != 2) throw ConfigError("slab must be [lo, hi]");
    cfg.base.slab_lo = s[0];
    cfg.base.slab_hi = s[1];
  }
  cfg.base.beta = j.value("beta", 2.0);
  if (!(cfg.dt > 0.0) || !(cfg.t_max >= cfg.dt))
    throw ConfigError("invalid dt/t_max");
  return cfg;
}

namespace cli {

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ExpressionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MeshError& e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int cmd_run(const Options& opt) {
  return guarded([&]() -> int {
    const RunConfig cfg = load_run_config(opt.config_path);
    auto scn = cfg.build();
    std::filesystem::create_directories(opt.out_dir);

    const std::string csv_final = atomic_path(opt.out_dir, cfg.diagnostics_csv);
    const std::string csv_tmp = csv_final + ".tmp";
    DiagnosticsCsv csv(csv_tmp, cfg.species.size());

    const bool clamped = !scn->model.conc_dirichlet.empty();
    const bool check_mass = opt.assertions && cfg.assert_mass && !clamped &&
                            scn->model.sources.empty();
    const bool check_energy = opt.assertions && cfg.assert_energy && !clamped;
    const bool check_positivity = opt.assertions && cfg.assert_positivity;

    Stepper stepper(*scn->disc, cfg.newton);
    State prev = scn->initial, curr = scn->initial;
    DiagnosticsRecord rec0 =
        make_record(curr, scn->dual, scn->model, nullptr, 0.0);
    csv.write(rec0);
    DiagnosticsRecord last = rec0;

    const int steps = static_cast<int>(std::llround(cfg.t_end / cfg.dt));
    bool ok = true;
    std::string failure;
    for (int s = 0; s < steps; ++s) {
      StepInfo info;
      State next = (cfg.scheme == Scheme::kI || s == 0)
                       ? stepper.step(curr, nullptr, Scheme::kI, cfg.dt, &info)
                       : stepper.step(curr, &prev, Scheme::kII, cfg.dt, &info);
      const double delta = state_distance(next, curr);
      prev = std::move(curr);
      curr = std::move(next);

      DiagnosticsRecord rec =
          make_record(curr, scn->dual, scn->model, &info, delta);
      csv.write(rec);

      if (check_mass)
        for (std::size_t l = 0; l < rec.mass.size(); ++l)
          if (std::abs(rec.mass[l] - rec0.mass[l]) >
              1e-12 * std::abs(rec0.mass[l])) {
            ok = false;
            failure = "mass drift (species " + std::to_string(l + 1) + ")";
          }
      if (check_energy &&
          check_dissipation(last, rec) == DissipationVerdict::kFail) {
        ok = false;
        failure = "energy dissipation violated at t = " +
                  std::to_string(rec.time);
      }
      if (check_positivity && !(rec.c_min > 0.0 && rec.solvent_min > 0.0)) {
        ok = false;
        failure = "positivity lost at t = " + std::to_string(rec.time);
      }
      last = rec;

      if (cfg.field_stride > 0 && (s + 1) % cfg.field_stride == 0) {
        char name[64];
        std::snprintf(name, sizeof name, "fields_%06d.txt", s + 1);
        scenarios::write_field_dump(atomic_path(opt.out_dir, name), curr,
                                    scn->dual, scn->model);
      }
      if (!ok) break;
    }

    atomic_rename(csv_tmp, csv_final);
    const std::string fields_final = atomic_path(opt.out_dir, cfg.fields_out);
    scenarios::write_field_dump(fields_final + ".tmp", curr, scn->dual,
                                scn->model);
    atomic_rename(fields_final + ".tmp", fields_final);

    if (!ok) {
      std::cerr << "assertion failed: " << failure << "\n";
      return 4;
    }
    return 0;
  });
}

int cmd_convergence(const Options& opt) {
  return guarded([&]() -> int {
    const ConvergenceConfig cfg = load_convergence_config(opt.config_path);
    std::filesystem::create_directories(opt.out_dir);
    const auto rows =
        scenarios::run_convergence(cfg.scheme, cfg.rule, cfg.levels, cfg.T,
                                   cfg.beta);
    if (rows.size() != cfg.levels.size()) {
      std::cerr << "solver failed before finishing all levels\n";
      return 3;
    }

    std::vector<double> e1, e2, ep;
    for (const auto& r : rows) {
      e1.push_back(r.err_c1);
      e2.push_back(r.err_c2);
      ep.push_back(r.err_psi);
    }
    const auto o1 = scenarios::observed_orders(e1);
    const auto o2 = scenarios::observed_orders(e2);
    const auto op = scenarios::observed_orders(ep);

    const std::string path = atomic_path(opt.out_dir, "convergence.csv");
    {
      std::ofstream out(path + ".tmp");
      out << "h,dt,err_c1,err_c2,err_psi,order_c1,order_c2,order_psi\n";
      char buf[256];
      for (std::size_t k = 0; k < rows.size(); ++k) {
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.4f,%.4f,%.4f\n",
                      rows[k].h, rows[k].dt, rows[k].err_c1, rows[k].err_c2,
                      rows[k].err_psi, k ? o1[k] : 0.0, k ? o2[k] : 0.0,
                      k ? op[k] : 0.0);
        out << buf;
      }
      if (cfg.temporal_n > 0) {
        const auto trows = scenarios::run_temporal_refinement(
            cfg.scheme, cfg.temporal_n, cfg.temporal_dts, cfg.T);
        out << "# temporal refinement (self-convergence), n = "
            << cfg.temporal_n << "\n";
        std::vector<double> te1;
        for (const auto& r : trows) te1.push_back(r.err_c1);
        const auto to1 = scenarios::observed_orders(te1);
        for (std::size_t k = 0; k < trows.size(); ++k) {
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.4f\n",
                        trows[k].h, trows[k].dt, trows[k].err_c1,
                        trows[k].err_c2, trows[k].err_psi, k ? to1[k] : 0.0);
          out << buf;
        }
      }
    }
    atomic_rename(path + ".tmp", path);

    for (std::size_t k = 0; k < rows.size(); ++k)
      std::printf("h=1/%-4d err(c1)=%.3e err(c2)=%.3e err(psi)=%.3e "
                  "order(c1)=%.2f order(c2)=%.2f order(psi)=%.2f\n",
                  static_cast<int>(std::lround(1.0 / rows[k].h)),
                  rows[k].err_c1, rows[k].err_c2, rows[k].err_psi,
                  k ? o1[k] : 0.0, k ? o2[k] : 0.0, k ? op[k] : 0.0);
    return 0;
  });
}

int cmd_iv(const Options& opt) {
  return guarded([&]() -> int {
    const IvConfig cfg = load_iv_config(opt.config_path);
    std::filesystem::create_directories(opt.out_dir);
    const auto points =
        scenarios::iv_sweep(cfg.base, cfg.voltages, cfg.scheme, cfg.dt,
                            cfg.t_max, cfg.steady_tol, opt.threads);

    // rectification ratios pair +-V
    const auto current_at = [&](double v, int l) -> std::optional<double> {
      for (const auto& p : points)
        if (p.voltage == v) return p.current[l];
      return std::nullopt;
    };

    const std::string path = atomic_path(opt.out_dir, "iv_curve.csv");
    {
      std::ofstream out(path + ".tmp");
      out << "V,I_1,I_2,I_3,r_1,r_2\n";
      char buf[256];
      for (const auto& p : points) {
        double r1 = std::numeric_limits<double>::quiet_NaN();
        double r2 = r1;
        const auto in1 = current_at(-p.voltage, 0);
        const auto in2 = current_at(-p.voltage, 1);
        if (p.voltage > 0 && in1 && p.current[0] != 0.0)
          r1 = std::abs(*in1 / p.current[0]);
        if (p.voltage > 0 && in2 && p.current[1] != 0.0)
          r2 = std::abs(*in2 / p.current[1]);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      p.voltage, p.current[0], p.current[1], p.current[2], r1,
                      r2);
        out << buf;
      }
    }
    atomic_rename(path + ".tmp", path);

    for (const auto& p : points)
      std::printf("V=%+.2f I1=%+.4e I2=%+.4e I3=%+.4e\n", p.voltage,
                  p.current[0], p.current[1], p.current[2]);
    return 0;
  });
}

int cmd_steady(const Options& opt) {
  return guarded([&]() -> int {
    const RunConfig cfg = load_run_config(opt.config_path);
    if (cfg.mass_targets.empty())
      throw ConfigError("steady requires mass_targets");
    auto scn = cfg.build();
    std::filesystem::create_directories(opt.out_dir);

    std::vector<double> xi;
    const State pb =
        solve_steady_pb(*scn->disc, cfg.mass_targets, cfg.newton, &xi);
    const std::string path = atomic_path(opt.out_dir, "steady_fields.txt");
    scenarios::write_field_dump(path + ".tmp", pb, scn->dual, scn->model);
    atomic_rename(path + ".tmp", path);
    for (std::size_t l = 0; l < xi.size(); ++l)
      std::printf("mu_%zu = %.12g\n", l + 1, xi[l]);
    return 0;
  });
}

}  // namespace cli
}  // namespace mpnp
