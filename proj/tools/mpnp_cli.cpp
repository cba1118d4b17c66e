#include <string>

#include "CLI11.hpp"
#include "mpnp/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mpnp: finite-volume solver for modified Poisson-Nernst-Planck systems"};
  app.require_subcommand(1);

  mpnp::cli::Options opt;
  std::string assert_mode = "on";

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON configuration file")
        ->required();
    sub->add_option("--out-dir", opt.out_dir, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads");
    sub->add_option("--assert", assert_mode, "runtime assertions {on,off}")
        ->check(CLI::IsMember({"on", "off"}));
  };

  CLI::App* run = app.add_subcommand("run", "run a trajectory to t_end");
  CLI::App* conv =
      app.add_subcommand("convergence", "manufactured-solution accuracy study");
  CLI::App* iv = app.add_subcommand("iv", "nanopore current-voltage sweep");
  CLI::App* steady =
      app.add_subcommand("steady", "discrete Poisson-Boltzmann steady state");
  for (CLI::App* sub : {run, conv, iv, steady}) add_common(sub);

  CLI11_PARSE(app, argc, argv);
  opt.assertions = assert_mode == "on";

  if (run->parsed()) return mpnp::cli::cmd_run(opt);
  if (conv->parsed()) return mpnp::cli::cmd_convergence(opt);
  if (iv->parsed()) return mpnp::cli::cmd_iv(opt);
  if (steady->parsed()) return mpnp::cli::cmd_steady(opt);
  return 2;
}
