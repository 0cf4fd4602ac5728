#include <CLI11.hpp>

#include <iostream>

#include "pstrat/cli.hpp"

using pstrat::RunConfig;

namespace {

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const pstrat::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pstrat::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return pstrat::kExitRuntime;
  }
}

void add_common(CLI::App* cmd, RunConfig& config, std::string& config_path,
                std::uint64_t& seed_flag, bool& seed_given) {
  cmd->add_option("--config", config_path, "JSON config file");
  cmd->add_option("--seed", seed_flag, "master seed (mandatory unless set in the config)")
      ->each([&seed_given](const std::string&) { seed_given = true; });
  cmd->add_option("--threads", config.threads, "worker thread cap (0 = hardware)");
  cmd->add_flag("--strict", config.strict, "treat convergence warnings as errors (exit 3)");
  cmd->add_option("--out", config.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian principal-stratification inference with auxiliary outcomes"};
  app.require_subcommand(1);

  RunConfig config;
  std::string config_path;
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  std::string family_name_flag, init_name;

  auto* fit = app.add_subcommand("fit", "fit model variants to a dataset");
  add_common(fit, config, config_path, seed_flag, seed_given);
  fit->add_option("--input", config.input, "dataset CSV")->required();
  fit->add_option("--variant", config.variant_names,
                  "variants to fit (Univariate, UnivariateER, Bivariate, BivariatePER); "
                  "default: all applicable");
  fit->add_option("--family", family_name_flag,
                  "data family: univariate, continuous_binary, continuous_continuous");
  fit->add_option("--chains", config.n_chains, "number of chains");
  fit->add_option("--iters", config.n_iter, "iterations per chain");
  fit->add_option("--burnin", config.n_burnin, "burn-in iterations");
  fit->add_option("--thin", config.thin, "keep every k-th draw");
  fit->add_option("--init", init_name, "init strategy: moment_perturb or prior_draw");
  fit->add_flag("--log-y1", config.log_y1, "model the natural log of y1");
  fit->add_flag("--kde", config.emit_kde, "emit kernel density grids");
  fit->add_flag("!--no-dump", config.dump_draws, "disable the per-draw parameter dump");

  auto* ppc = app.add_subcommand("ppc", "posterior predictive checks from a fit's draw dumps");
  add_common(ppc, config, config_path, seed_flag, seed_given);
  ppc->add_option("--input", config.input, "dataset CSV")->required();
  ppc->add_option("--draws", config.draws_path, "draw dump file, or a fit output directory")
      ->required();
  ppc->add_option("-K,--replicates", config.ppc_K, "replicates per SPPV");
  ppc->add_option("-J,--parameter-draws", config.ppc_J, "parameter draws for the modified SPPV");
  ppc->add_flag("--log-y1", config.log_y1, "model the natural log of y1");

  auto* sim = app.add_subcommand("simulate", "scenario data generation and fitting comparisons");
  add_common(sim, config, config_path, seed_flag, seed_given);
  sim->add_option("--scenario", config.scenario, "scenario id: I..VII")->required();
  std::string emit_data;
  sim->add_option("--emit-data", emit_data, "'only' writes the dataset CSV and stops");
  sim->add_flag("--emit-truth", config.emit_truth, "also write the true stratum labels");
  sim->add_option("--variant", config.variant_names, "variants to compare");
  sim->add_option("--replications", config.replications,
                  "repeated-sampling study with this many replications");
  sim->add_option("--chains", config.n_chains, "number of chains");
  sim->add_option("--iters", config.n_iter, "iterations per chain");
  sim->add_option("--burnin", config.n_burnin, "burn-in iterations");

  auto* summ = app.add_subcommand("summarize", "recompute summary tables from a draw dump");
  summ->add_option("--draws", config.draws_path, "draw dump CSV")->required();
  summ->add_option("--out", config.out_dir, "output directory")->required();

  auto* oracle = app.add_subcommand("oracle", "grid-quadrature posterior for tiny univariate data");
  oracle->group("");  // hidden: validation instrument
  add_common(oracle, config, config_path, seed_flag, seed_given);
  oracle->add_option("--input", config.input, "dataset CSV")->required();
  oracle->add_option("--variances", config.oracle_variances,
                     "known variances, cell order c0,c1,n0,n1")
      ->expected(4);
  oracle->add_option("--points-pi", config.oracle_points_pi, "grid points for pi_c");
  oracle->add_option("--points-mu", config.oracle_points_mu, "grid points per mean axis");

  CLI11_PARSE(app, argc, argv);

  return run_guarded([&]() -> int {
    if (!config_path.empty()) pstrat::load_config_file(config, config_path);
    if (seed_given) config.seed = seed_flag;
    if (!family_name_flag.empty()) config.family = pstrat::family_from_name(family_name_flag);
    if (!init_name.empty()) {
      if (init_name == "prior_draw") config.init = pstrat::InitStrategy::PriorDraw;
      else if (init_name == "moment_perturb") config.init = pstrat::InitStrategy::MomentPerturb;
      else throw pstrat::ValidationError("unknown init strategy: " + init_name);
    }
    if (sim->parsed()) {
      if (!emit_data.empty() && emit_data != "only")
        throw pstrat::ValidationError("--emit-data accepts only the value 'only'");
      config.emit_data_only = emit_data == "only";
    }

    if (fit->parsed()) return pstrat::cmd_fit(config);
    if (ppc->parsed()) return pstrat::cmd_ppc(config);
    if (sim->parsed()) return pstrat::cmd_simulate(config);
    if (summ->parsed()) return pstrat::cmd_summarize(config);
    if (oracle->parsed()) return pstrat::cmd_oracle(config);
    return pstrat::kExitValidation;
  });
}
