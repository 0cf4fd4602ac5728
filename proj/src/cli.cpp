#include "pstrat/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "pstrat/estimands.hpp"
#include "pstrat/model.hpp"
#include "pstrat/oracle.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/simlab.hpp"

namespace pstrat {

namespace fs = std::filesystem;
using nlohmann::json;

ChainConfig RunConfig::chain_config() const {
  ChainConfig c;
  c.n_iter = n_iter;
  c.n_burnin = n_burnin;
  c.thin = thin;
  c.n_chains = n_chains;
  c.seed = seed.value_or(0);
  c.init = init;
  c.threads = threads;
  return c;
}

std::vector<Variant> RunConfig::variants() const {
  if (variant_names.empty()) return applicable_variants(family);
  std::vector<Variant> out;
  for (const auto& name : variant_names) out.push_back(variant_from_name(name));
  return out;
}

namespace {

void require_seed(const RunConfig& config) {
  if (!config.seed) throw ValidationError("a seed is required (--seed or config \"seed\")");
}

void require_out(const RunConfig& config) {
  if (config.out_dir.empty()) throw ValidationError("an output directory is required (--out)");
  fs::create_directories(config.out_dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

json summary_to_json(const FitResult& fit) {
  json j;
  j["variant"] = variant_name(fit.variant);
  j["family"] = family_name(fit.spec.family);
  j["restriction"] = restriction_name(fit.spec.restriction);
  j["converged"] = fit.converged;
  json ests = json::object();
  for (std::size_t i = 0; i < fit.estimands.size(); ++i) {
    const PosteriorSummary& s = fit.summaries[i];
    json e;
    e["median"] = s.median;
    e["q025"] = s.q025;
    e["q975"] = s.q975;
    e["width"] = s.width;
    e["prob_negative"] = s.prob_negative;
    e["mean"] = s.mean;
    if (std::isfinite(fit.psrf[i])) e["psrf"] = fit.psrf[i];
    ests[fit.estimands[i]] = e;
  }
  j["estimands"] = ests;
  return j;
}

int convergence_exit(const std::vector<FitResult>& fits, bool strict) {
  bool all_ok = true;
  for (const auto& fit : fits) {
    if (!fit.converged) {
      all_ok = false;
      std::cerr << "warning: PSRF > 1.1 for variant " << variant_name(fit.variant)
                << " (run saved)\n";
    }
  }
  if (all_ok) return kExitOk;
  return strict ? kExitConvergence : kExitOk;
}

}  // namespace

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.contains("family")) config.family = family_from_name(m["family"].get<std::string>());
    if (m.contains("restriction"))
      config.restriction = restriction_from_name(m["restriction"].get<std::string>());
  }
  if (j.contains("priors")) {
    const auto& p = j["priors"];
    if (p.contains("mean_variance")) config.priors.mean_variance = p["mean_variance"].get<double>();
    if (p.contains("pi_beta")) {
      config.priors.pi_a = p["pi_beta"][0].get<double>();
      config.priors.pi_b = p["pi_beta"][1].get<double>();
    }
    if (p.contains("var_inverse_gamma")) {
      config.priors.var_shape = p["var_inverse_gamma"][0].get<double>();
      config.priors.var_rate = p["var_inverse_gamma"][1].get<double>();
    }
    if (p.contains("wishart_df")) config.priors.wishart_df = p["wishart_df"].get<double>();
    if (p.contains("wishart_scale")) {
      const auto& w = p["wishart_scale"];
      config.priors.wishart_scale << w[0][0].get<double>(), w[0][1].get<double>(),
          w[1][0].get<double>(), w[1][1].get<double>();
    }
    if (p.contains("cov_prior_mean")) {
      config.priors.cov.sigma0 << p["cov_prior_mean"][0].get<double>(),
          p["cov_prior_mean"][1].get<double>();
    }
    if (p.contains("cov_prior_variance")) {
      config.priors.cov.Sigma0 << p["cov_prior_variance"][0].get<double>(), 0.0, 0.0,
          p["cov_prior_variance"][1].get<double>();
    }
  }
  if (j.contains("chains")) {
    const auto& c = j["chains"];
    if (c.contains("count")) config.n_chains = c["count"].get<int>();
    if (c.contains("iterations")) config.n_iter = c["iterations"].get<int>();
    if (c.contains("burnin")) config.n_burnin = c["burnin"].get<int>();
    if (c.contains("thin")) config.thin = c["thin"].get<int>();
    if (c.contains("init")) {
      const std::string init = c["init"].get<std::string>();
      if (init == "prior_draw") config.init = InitStrategy::PriorDraw;
      else if (init == "moment_perturb") config.init = InitStrategy::MomentPerturb;
      else throw ValidationError("unknown init strategy: " + init);
    }
  }
  if (j.contains("columns")) {
    const auto& c = j["columns"];
    if (c.contains("z")) config.columns.z = c["z"].get<std::string>();
    if (c.contains("d")) config.columns.d = c["d"].get<std::string>();
    if (c.contains("y1")) config.columns.y1 = c["y1"].get<std::string>();
    if (c.contains("y2")) config.columns.y2 = c["y2"].get<std::string>();
  }
  if (j.contains("transforms") && j["transforms"].contains("log_y1"))
    config.log_y1 = j["transforms"]["log_y1"].get<bool>();
  if (j.contains("report")) {
    const auto& r = j["report"];
    if (r.contains("kde")) config.emit_kde = r["kde"].get<bool>();
    if (r.contains("dump_draws")) config.dump_draws = r["dump_draws"].get<bool>();
  }
  if (j.contains("ppc")) {
    const auto& p = j["ppc"];
    if (p.contains("K")) config.ppc_K = p["K"].get<int>();
    if (p.contains("J")) config.ppc_J = p["J"].get<int>();
  }
  if (j.contains("threads")) config.threads = j["threads"].get<int>();
  if (j.contains("variants")) {
    config.variant_names.clear();
    for (const auto& v : j["variants"]) config.variant_names.push_back(v.get<std::string>());
  }
}

std::string resolved_config_json(const RunConfig& config, const std::string& command) {
  json j;
  j["command"] = command;
  j["seed"] = config.seed.value_or(0);
  j["model"] = {{"family", family_name(config.family)},
                {"restriction", restriction_name(config.restriction)}};
  j["priors"] = {
      {"mean_variance", config.priors.mean_variance},
      {"pi_beta", {config.priors.pi_a, config.priors.pi_b}},
      {"var_inverse_gamma", {config.priors.var_shape, config.priors.var_rate}},
      {"wishart_df", config.priors.wishart_df},
      {"wishart_scale",
       {{config.priors.wishart_scale(0, 0), config.priors.wishart_scale(0, 1)},
        {config.priors.wishart_scale(1, 0), config.priors.wishart_scale(1, 1)}}},
      {"cov_prior_mean", {config.priors.cov.sigma0[0], config.priors.cov.sigma0[1]}},
      {"cov_prior_variance", {config.priors.cov.Sigma0(0, 0), config.priors.cov.Sigma0(1, 1)}}};
  j["chains"] = {{"count", config.n_chains},
                 {"iterations", config.n_iter},
                 {"burnin", config.n_burnin},
                 {"thin", config.thin},
                 {"init", config.init == InitStrategy::PriorDraw ? "prior_draw" : "moment_perturb"}};
  j["columns"] = {{"z", config.columns.z},
                  {"d", config.columns.d},
                  {"y1", config.columns.y1},
                  {"y2", config.columns.y2}};
  j["transforms"] = {{"log_y1", config.log_y1}};
  j["report"] = {{"kde", config.emit_kde}, {"dump_draws", config.dump_draws}};
  j["ppc"] = {{"K", config.ppc_K}, {"J", config.ppc_J}};
  j["threads"] = config.threads;
  j["strict"] = config.strict;
  json variants = json::array();
  for (Variant v : config.variants()) variants.push_back(variant_name(v));
  j["variants"] = variants;
  j["input"] = config.input;
  j["out"] = config.out_dir;
  if (!config.scenario.empty()) {
    j["scenario"] = config.scenario;
    j["replications"] = config.replications;
  }
  return j.dump(2) + "\n";
}

int cmd_fit(const RunConfig& config) {
  require_seed(config);
  require_out(config);
  if (config.input.empty()) throw ValidationError("fit requires --input");

  const ObservedDataset raw =
      read_dataset_csv(config.input, config.columns, config.family, config.log_y1);
  ModelSpec declared;
  declared.family = config.family;
  declared.restriction = Restriction::None;
  declared.priors = config.priors;
  validate_dataset(raw, declared);
  std::cout << render_dataset_summary(dataset_summary(raw));

  std::vector<FitResult> fits;
  for (Variant v : config.variants())
    fits.push_back(fit_variant(raw, v, config.family, config.priors, config.chain_config(),
                               *config.seed));

  const fs::path out(config.out_dir);
  write_summary_csv((out / "summary.csv").string(), fits);
  if (config.dump_draws)
    for (const auto& fit : fits)
      write_draws_csv((out / ("draws_" + std::string(variant_name(fit.variant)) + ".csv")).string(),
                      fit.draws, fit.variant);
  if (config.emit_kde) write_kde_csv((out / "kde.csv").string(), fits);

  json j;
  j["fits"] = json::array();
  for (const auto& fit : fits) j["fits"].push_back(summary_to_json(fit));
  write_text((out / "summary.json").string(), j.dump(2) + "\n");
  write_text((out / "config_resolved.json").string(), resolved_config_json(config, "fit"));
  return convergence_exit(fits, config.strict);
}

int cmd_ppc(const RunConfig& config) {
  require_seed(config);
  require_out(config);
  if (config.input.empty()) throw ValidationError("ppc requires --input");
  if (config.draws_path.empty()) throw ValidationError("ppc requires --draws");
  if (config.ppc_K < 1) throw ValidationError("ppc requires K >= 1");
  if (config.ppc_J < 1) throw ValidationError("ppc requires J >= 1");

  std::vector<std::string> dump_files;
  if (fs::is_directory(config.draws_path)) {
    for (const auto& entry : fs::directory_iterator(config.draws_path)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("draws_", 0) == 0 && entry.path().extension() == ".csv")
        dump_files.push_back(entry.path().string());
    }
    std::sort(dump_files.begin(), dump_files.end());
    if (dump_files.empty())
      throw ValidationError("no draws_*.csv dumps found in " + config.draws_path);
  } else {
    dump_files.push_back(config.draws_path);
  }

  std::vector<std::pair<std::string, PValueReport>> reports;
  for (const auto& file : dump_files) {
    const LoadedDraws loaded = read_draws_csv(file);
    const ObservedDataset data =
        read_dataset_csv(config.input, config.columns, loaded.store.spec.family, config.log_y1);
    validate_dataset(data, loaded.store.spec);
    const std::string vname = variant_name(loaded.variant);
    const std::uint64_t seed = *config.seed;

    reports.emplace_back(vname, pppv(loaded.store, data, RngStream::derive(seed, {1}).seed(),
                                     config.threads));

    RngStream pick = RngStream::derive(seed, {2});
    const std::size_t star =
        static_cast<std::size_t>(pick.uniform() * static_cast<double>(loaded.store.total_draws()));
    reports.emplace_back(
        vname, sppv(loaded.store.draw(std::min(star, loaded.store.total_draws() - 1)), data,
                    config.ppc_K, RngStream::derive(seed, {3}).seed()));

    reports.emplace_back(vname,
                         modified_sppv(loaded.store, data, config.ppc_J, config.ppc_K,
                                       RngStream::derive(seed, {4}).seed(), config.threads));
  }

  const fs::path out(config.out_dir);
  write_pvalues_csv((out / "pvalues.csv").string(), reports);
  json j = json::array();
  for (const auto& [vname, report] : reports) {
    json r;
    r["variant"] = vname;
    r["method"] = report.method;
    r["K"] = report.K;
    r["J"] = report.J;
    json ps = json::object();
    for (std::size_t i = 0; i < report.measures.size(); ++i)
      if (report.p[i]) ps[measure_name(report.measures[i])] = *report.p[i];
    r["p"] = ps;
    j.push_back(r);
  }
  write_text((out / "pvalues.json").string(), j.dump(2) + "\n");
  write_text((out / "config_resolved.json").string(), resolved_config_json(config, "ppc"));
  return kExitOk;
}

int cmd_simulate(const RunConfig& config) {
  require_seed(config);
  require_out(config);
  if (config.scenario.empty()) throw ValidationError("simulate requires --scenario");
  const Scenario scenario = scenario_params(scenario_from_roman(config.scenario));
  const fs::path out(config.out_dir);

  if (config.emit_data_only) {
    const SimulatedDataset sim = generate_dataset(scenario, *config.seed);
    const std::string tag = "scenario_" + scenario_roman(scenario.id);
    write_dataset_csv((out / (tag + "_data.csv")).string(), sim.data);
    if (config.emit_truth) write_truth_csv((out / (tag + "_truth.csv")).string(), sim.truth_labels);
    write_text((out / "config_resolved.json").string(), resolved_config_json(config, "simulate"));
    return kExitOk;
  }

  if (config.replications > 0) {
    ChainConfig cc = config.chain_config();
    std::vector<Variant> variants = config.variant_names.empty()
                                        ? std::vector<Variant>{Variant::Univariate, Variant::Bivariate}
                                        : config.variants();
    const RecoveryReport report =
        repeated_sampling_study(scenario, config.replications, variants, cc);
    std::ofstream csv(out / "recovery.csv");
    csv << "variant,estimand,truth,bias,percent_bias,mse,coverage,mean_width,replications\n";
    for (const auto& [key, rec] : report.metrics)
      csv << key.first << ',' << key.second << ',' << format_g17(rec.truth) << ','
          << format_g17(rec.bias) << ',' << format_g17(rec.percent_bias) << ','
          << format_g17(rec.mse) << ',' << format_g17(rec.coverage) << ','
          << format_g17(rec.mean_width) << ',' << rec.n_reps << '\n';
    write_text((out / "config_resolved.json").string(), resolved_config_json(config, "simulate"));
    return kExitOk;
  }

  std::vector<Variant> variants =
      config.variant_names.empty()
          ? std::vector<Variant>{Variant::Univariate, Variant::Bivariate, Variant::BivariatePER}
          : config.variants();
  const ComparisonResult cmp =
      run_comparison(scenario, variants, config.chain_config(), *config.seed);
  write_summary_csv((out / "summary.csv").string(), cmp.fits);
  if (config.dump_draws)
    for (const auto& fit : cmp.fits)
      write_draws_csv((out / ("draws_" + std::string(variant_name(fit.variant)) + ".csv")).string(),
                      fit.draws, fit.variant);
  if (config.emit_kde) write_kde_csv((out / "kde.csv").string(), cmp.fits);
  json j;
  j["scenario"] = scenario_roman(scenario.id);
  j["truth"] = {{"tau_c", tau(scenario.truth, Stratum::Complier)},
                {"tau_n", tau(scenario.truth, Stratum::NeverTaker)},
                {"pi_c", scenario.pi_c}};
  j["fits"] = json::array();
  for (const auto& fit : cmp.fits) j["fits"].push_back(summary_to_json(fit));
  write_text((out / "summary.json").string(), j.dump(2) + "\n");
  write_text((out / "config_resolved.json").string(), resolved_config_json(config, "simulate"));
  return convergence_exit(cmp.fits, config.strict);
}

int cmd_summarize(const RunConfig& config) {
  require_out(config);
  if (config.draws_path.empty()) throw ValidationError("summarize requires --draws");
  const LoadedDraws loaded = read_draws_csv(config.draws_path);

  FitResult fit;
  fit.variant = loaded.variant;
  fit.spec = loaded.store.spec;
  fit.draws = loaded.store;
  fit.estimands = variant_estimands(fit.spec);
  for (const auto& name : fit.estimands) {
    auto extract = [&name](const Theta& t) { return estimand_value(name, t); };
    fit.summaries.push_back(summarize(fit.draws.flat(extract)));
    double r = std::numeric_limits<double>::quiet_NaN();
    if (fit.draws.chains.size() >= 2) r = gelman_rubin(fit.draws.per_chain(extract));
    fit.psrf.push_back(r);
    if ((std::isfinite(r) && r > 1.1) || std::isinf(r)) fit.converged = false;
  }

  const fs::path out(config.out_dir);
  write_summary_csv((out / "summary.csv").string(), {fit});
  json j;
  j["fits"] = json::array({summary_to_json(fit)});
  write_text((out / "summary.json").string(), j.dump(2) + "\n");
  return kExitOk;
}

int cmd_oracle(const RunConfig& config) {
  require_seed(config);
  if (config.input.empty()) throw ValidationError("oracle requires --input");
  if (config.oracle_variances.size() != 4)
    throw ValidationError("oracle requires --variances with 4 values (cells c0,c1,n0,n1)");

  const ObservedDataset data =
      read_dataset_csv(config.input, config.columns, Family::Univariate, config.log_y1);
  ModelSpec spec;
  spec.family = Family::Univariate;
  spec.priors = config.priors;
  validate_dataset(data, spec);

  std::array<double, 4> variances;
  std::copy(config.oracle_variances.begin(), config.oracle_variances.end(), variances.begin());
  const GridSpec grid = default_grid(data, config.oracle_points_pi, config.oracle_points_mu);
  const GridPosterior post = grid_posterior(data, config.priors, variances, grid);
  std::cout << "nodes " << post.n_nodes << "\n"
            << "mean_pi_c " << format_g17(post.mean_pi_c) << "\n"
            << "mean_tau_c " << format_g17(post.mean_tau_c) << "\n"
            << "mean_tau_n " << format_g17(post.mean_tau_n) << "\n";
  if (post.boundary_mass_warning)
    std::cerr << "warning: nontrivial posterior mass on the grid boundary (grid too narrow?)\n";

  if (!config.out_dir.empty()) {
    require_out(config);
    json j;
    j["nodes"] = post.n_nodes;
    j["mean_pi_c"] = post.mean_pi_c;
    j["mean_tau_c"] = post.mean_tau_c;
    j["mean_tau_n"] = post.mean_tau_n;
    j["boundary_mass_warning"] = post.boundary_mass_warning;
    write_text((fs::path(config.out_dir) / "oracle.json").string(), j.dump(2) + "\n");
  }
  return kExitOk;
}

}  // namespace pstrat
