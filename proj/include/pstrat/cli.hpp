#ifndef PSTRAT_CLI_HPP
#define PSTRAT_CLI_HPP

#include <optional>
#include <string>
#include <vector>

#include "pstrat/gibbs.hpp"
#include "pstrat/io.hpp"
#include "pstrat/types.hpp"

namespace pstrat {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitConvergence = 3;

/// Fully-resolved run configuration: JSON config file values overlaid with
/// command-line flags. A seed is mandatory; there is no wall-clock default.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  Family family = Family::ContinuousBinary;
  Restriction restriction = Restriction::None;  // restriction of the declared model (fit default)
  Priors priors;

  int n_chains = 3;
  int n_iter = 15000;
  int n_burnin = 5000;
  int thin = 1;
  InitStrategy init = InitStrategy::MomentPerturb;

  ColumnSpec columns;
  bool log_y1 = false;
  bool emit_kde = false;
  bool dump_draws = true;
  int ppc_K = 500;
  int ppc_J = 1000;
  int threads = 0;
  bool strict = false;

  std::vector<std::string> variant_names;  // empty = all applicable
  std::string input;
  std::string out_dir;
  std::string draws_path;  // ppc/summarize: a dump file or a fit output directory

  std::string scenario;  // simulate
  int replications = 0;
  bool emit_data_only = false;
  bool emit_truth = false;

  // hidden oracle subcommand
  std::vector<double> oracle_variances;  // cell order c0, c1, n0, n1
  int oracle_points_pi = 25;
  int oracle_points_mu = 15;

  ChainConfig chain_config() const;
  std::vector<Variant> variants() const;
};

/// Merges `path` (JSON) into the config. Flags applied afterwards win.
void load_config_file(RunConfig& config, const std::string& path);

/// Serialized, fully-resolved configuration (deterministic key order).
std::string resolved_config_json(const RunConfig& config, const std::string& command);

int cmd_fit(const RunConfig& config);
int cmd_ppc(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_summarize(const RunConfig& config);
int cmd_oracle(const RunConfig& config);

}  // namespace pstrat

#endif
