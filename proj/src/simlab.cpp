#include "pstrat/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pstrat/model.hpp"
#include "pstrat/parallel.hpp"
#include "pstrat/samplers.hpp"

namespace pstrat {

namespace {

CellParams make_cell(double m1, double m2, double s11, double s12, double s22) {
  CellParams c = CellParams::make(2);
  c.mu << m1, m2;
  c.sigma << s11, s12, s12, s22;
  return c;
}

}  // namespace

Scenario scenario_params(int id) {
  if (id < 1 || id > 7) throw ValidationError("scenario id must be 1..7");
  Scenario sc;
  sc.id = id;
  sc.truth = Theta::make(Family::ContinuousContinuous);
  sc.truth.pi_c = 0.7;

  // Complier cells are common to every scenario.
  sc.truth.cell(Stratum::Complier, 0) = make_cell(2.5, 8.0, 0.09, 0.24, 1.0);
  sc.truth.cell(Stratum::Complier, 1) = make_cell(0.5, 6.5, 0.01, 0.08, 1.0);

  CellParams n0, n1;
  switch (id) {
    case 1:
      n0 = make_cell(2.75, 12.0, 0.16, 0.16, 4.0);
      n1 = make_cell(4.25, 12.0, 0.04, 0.08, 4.0);
      break;
    case 2:
      n0 = make_cell(2.75, 12.0, 0.16, 0.64, 4.0);
      n1 = make_cell(4.25, 13.0, 0.04, 0.32, 4.0);
      break;
    case 3:
      n0 = make_cell(2.75, 12.0, 0.16, 0.16, 4.0);
      n1 = make_cell(4.25, 13.0, 0.04, 0.08, 4.0);
      break;
    case 4:
      n0 = make_cell(2.75, 12.0, 0.16, 0.64, 4.0);
      n1 = make_cell(4.25, 24.0, 0.04, 0.48, 9.0);
      break;
    case 5:
      n0 = make_cell(2.75, 12.0, 0.16, 0.16, 4.0);
      n1 = make_cell(4.25, 24.0, 0.04, 0.12, 9.0);
      break;
    case 6:
      n0 = make_cell(2.75, 24.0, 0.16, 0.96, 9.0);
      n1 = make_cell(4.25, 36.0, 0.04, 0.80, 25.0);
      break;
    case 7:
      n0 = make_cell(2.75, 24.0, 0.16, 0.24, 9.0);
      n1 = make_cell(4.25, 36.0, 0.04, 0.20, 25.0);
      break;
  }
  sc.truth.cell(Stratum::NeverTaker, 0) = n0;
  sc.truth.cell(Stratum::NeverTaker, 1) = n1;
  return sc;
}

int scenario_from_roman(const std::string& roman) {
  static const std::array<const char*, 7> names{"I", "II", "III", "IV", "V", "VI", "VII"};
  for (int i = 0; i < 7; ++i)
    if (roman == names[i]) return i + 1;
  // also accept plain digits
  if (roman.size() == 1 && roman[0] >= '1' && roman[0] <= '7') return roman[0] - '0';
  throw ValidationError("unknown scenario: " + roman + " (expected I..VII)");
}

std::string scenario_roman(int id) {
  static const std::array<const char*, 7> names{"I", "II", "III", "IV", "V", "VI", "VII"};
  if (id < 1 || id > 7) throw ValidationError("scenario id must be 1..7");
  return names[id - 1];
}

SimulatedDataset generate_dataset(const Scenario& scenario, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, {0xDA7Au, static_cast<std::uint64_t>(scenario.id)});
  const int n = scenario.n;
  SimulatedDataset sim;
  sim.data.units.resize(n);
  sim.truth_labels.resize(n);

  // Exactly half the sample treated: Fisher-Yates permutation of unit ids.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  std::vector<int> assign(n, 0);
  for (int k = 0; k < n / 2; ++k) assign[order[k]] = 1;

  for (int i = 0; i < n; ++i) {
    const Stratum s = rng.uniform() < scenario.pi_c ? Stratum::Complier : Stratum::NeverTaker;
    sim.truth_labels[i] = s;
    ObservedUnit& u = sim.data.units[i];
    u.z = assign[i];
    u.d = (u.z == 1 && s == Stratum::Complier) ? 1 : 0;
    const CellParams& cell = scenario.truth.cell(s, u.z);
    const Vector y = sample_mvn(cell.mu, cell.sigma, rng);
    u.y1 = y[0];
    u.y2 = y[1];
  }
  return sim;
}

const FitResult& ComparisonResult::fit(Variant v) const {
  for (const auto& f : fits)
    if (f.variant == v) return f;
  throw std::out_of_range(std::string("no fit for variant ") + variant_name(v));
}

ComparisonResult run_comparison(const Scenario& scenario, const std::vector<Variant>& variants,
                                const ChainConfig& config, std::uint64_t seed) {
  if (variants.empty()) throw ValidationError("run_comparison: variant list is empty");
  const SimulatedDataset sim = generate_dataset(scenario, seed);
  ComparisonResult res;
  res.scenario_id = scenario.id;
  res.seed = seed;
  res.fits.resize(variants.size());
  for (std::size_t k = 0; k < variants.size(); ++k)
    res.fits[k] = fit_variant(sim.data, variants[k], Family::ContinuousContinuous,
                              Priors{}, config, seed);
  return res;
}

EstimandRecovery aggregate_recovery(const std::vector<ReplicateEstimate>& estimates, double truth) {
  if (estimates.empty()) throw ValidationError("aggregate_recovery: no replicates");
  EstimandRecovery rec;
  rec.truth = truth;
  rec.n_reps = static_cast<int>(estimates.size());
  double sum_err = 0.0, sum_sq = 0.0, covered = 0.0, widths = 0.0;
  for (const auto& e : estimates) {
    const double err = e.point - truth;
    sum_err += err;
    sum_sq += err * err;
    covered += (e.lo <= truth && truth <= e.hi);
    widths += e.hi - e.lo;
  }
  const double r = static_cast<double>(rec.n_reps);
  rec.bias = sum_err / r;
  rec.mse = sum_sq / r;
  rec.coverage = covered / r;
  rec.mean_width = widths / r;
  rec.percent_bias = truth != 0.0 ? 100.0 * rec.bias / std::fabs(truth)
                                  : std::numeric_limits<double>::quiet_NaN();
  return rec;
}

RecoveryReport repeated_sampling_study(const Scenario& scenario, int replications,
                                       const std::vector<Variant>& variants,
                                       const ChainConfig& config) {
  if (replications < 2) throw ValidationError("repeated_sampling_study: needs R >= 2");
  if (variants.empty()) throw ValidationError("repeated_sampling_study: variant list is empty");

  struct PerRep {
    std::map<std::pair<std::string, std::string>, ReplicateEstimate> cells;
  };
  std::vector<PerRep> reps(replications);

  ChainConfig fit_config = config;
  fit_config.threads = 1;  // replications are the parallel axis
  parallel_for(replications, config.threads, [&](int r) {
    const std::uint64_t rep_seed =
        RngStream::derive(config.seed, {0x5EEDu, static_cast<std::uint64_t>(scenario.id),
                                        static_cast<std::uint64_t>(r)})
            .seed();
    const SimulatedDataset sim = generate_dataset(scenario, rep_seed);
    for (Variant v : variants) {
      const FitResult fit = fit_variant(sim.data, v, Family::ContinuousContinuous, Priors{},
                                        fit_config, rep_seed);
      for (const std::string& est : {std::string("tau_c"), std::string("tau_n"), std::string("pi_c")}) {
        bool have = std::find(fit.estimands.begin(), fit.estimands.end(), est) != fit.estimands.end();
        if (!have) continue;
        const PosteriorSummary& s = fit.summary(est);
        reps[r].cells[{variant_name(v), est}] = ReplicateEstimate{s.median, s.q025, s.q975};
      }
    }
  });

  RecoveryReport report;
  report.scenario_id = scenario.id;
  report.replications = replications;
  const std::map<std::string, double> truths{
      {"tau_c", tau(scenario.truth, Stratum::Complier)},
      {"tau_n", tau(scenario.truth, Stratum::NeverTaker)},
      {"pi_c", scenario.pi_c}};
  for (Variant v : variants) {
    for (const auto& [est, truth] : truths) {
      std::vector<ReplicateEstimate> series;
      series.reserve(replications);
      for (const auto& rep : reps) {
        auto it = rep.cells.find({variant_name(v), est});
        if (it != rep.cells.end()) series.push_back(it->second);
      }
      if (!series.empty())
        report.metrics[{variant_name(v), est}] = aggregate_recovery(series, truth);
    }
  }
  return report;
}

}  // namespace pstrat
