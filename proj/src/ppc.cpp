#include "pstrat/ppc.hpp"

#include <algorithm>
#include <cmath>

#include "pstrat/estimands.hpp"
#include "pstrat/gauss.hpp"
#include "pstrat/model.hpp"
#include "pstrat/parallel.hpp"
#include "pstrat/samplers.hpp"

namespace pstrat {

std::vector<MeasureId> measure_list(Family family) {
  std::vector<MeasureId> out;
  const int outcomes = outcome_dim(family);
  for (int m = 1; m <= outcomes; ++m) {
    for (MeasureKind k : {MeasureKind::Signal, MeasureKind::Noise, MeasureKind::SignalToNoise})
      for (int s : {0, 1}) out.push_back({k, m, s});
    out.push_back({MeasureKind::Chi2, m, -1});
    if (m == 1) out.push_back({MeasureKind::KS, 1, -1});
  }
  return out;
}

std::string measure_name(const MeasureId& m) {
  std::string base;
  switch (m.kind) {
    case MeasureKind::Signal: base = "signal"; break;
    case MeasureKind::Noise: base = "noise"; break;
    case MeasureKind::SignalToNoise: base = "signal_to_noise"; break;
    case MeasureKind::Chi2: base = "chi2"; break;
    case MeasureKind::KS: base = "ks"; break;
  }
  base += "_y" + std::to_string(m.outcome);
  if (m.stratum == 0) base += "_c";
  if (m.stratum == 1) base += "_n";
  return base;
}

std::optional<SiNoSn> discrepancy_si_no_sn(const ObservedDataset& data,
                                           const std::vector<Stratum>& labels, int outcome,
                                           Stratum s) {
  double n[2] = {0.0, 0.0}, sum[2] = {0.0, 0.0}, sumsq[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    if (labels[i] != s) continue;
    const auto& u = data.units[i];
    const double y = outcome == 1 ? u.y1 : u.y2;
    n[u.z] += 1.0;
    sum[u.z] += y;
    sumsq[u.z] += y * y;
  }
  if (n[0] < 2.0 || n[1] < 2.0) return std::nullopt;
  double mean[2], var[2];
  for (int z = 0; z < 2; ++z) {
    mean[z] = sum[z] / n[z];
    var[z] = (sumsq[z] - n[z] * mean[z] * mean[z]) / (n[z] - 1.0);
    var[z] = std::max(var[z], 0.0);  // guard tiny negative round-off
  }
  SiNoSn d;
  d.si = std::fabs(mean[1] - mean[0]);
  d.no = std::sqrt(var[0] / n[0] + var[1] / n[1]);
  d.sn = d.no > 0.0 ? d.si / d.no : std::numeric_limits<double>::infinity();
  return d;
}

double chi2_discrepancy(const ObservedDataset& data, const std::vector<Stratum>& labels,
                        const Theta& theta, int outcome, int* n_excluded) {
  double total = 0.0;
  int excluded = 0;
  const bool do_y1 = outcome == 0 || outcome == 1;
  const bool do_y2 = (outcome == 0 || outcome == 2) && theta.family != Family::Univariate;
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    const CellParams& cell = theta.cell(labels[i], u.z);
    if (do_y1) {
      const double d = u.y1 - cell.mu[0];
      total += d * d / cell.sigma(0, 0);
    }
    if (do_y2) {
      if (theta.family == Family::ContinuousContinuous) {
        const double d = u.y2 - cell.mu[1];
        total += d * d / cell.sigma(1, 1);
      } else {
        const double p = norm_cdf(cell.mu[1]);
        if (p <= 0.0 || p >= 1.0) {
          ++excluded;
        } else {
          const double d = u.y2 - p;
          total += d * d / (p * (1.0 - p));
        }
      }
    }
  }
  if (n_excluded) *n_excluded = excluded;
  return total;
}

double ks_discrepancy(const ObservedDataset& data, const Theta& theta) {
  double worst = 0.0;
  for (int z = 0; z < 2; ++z) {
    std::vector<double> ys;
    for (const auto& u : data.units)
      if (u.z == z) ys.push_back(u.y1);
    if (ys.empty()) continue;
    std::sort(ys.begin(), ys.end());
    const CellParams& c = theta.cell(Stratum::Complier, z);
    const CellParams& n = theta.cell(Stratum::NeverTaker, z);
    const double sc = std::sqrt(c.sigma(0, 0)), sn = std::sqrt(n.sigma(0, 0));
    const double nn = static_cast<double>(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double f = theta.pi_c * norm_cdf((ys[i] - c.mu[0]) / sc) +
                       (1.0 - theta.pi_c) * norm_cdf((ys[i] - n.mu[0]) / sn);
      const double hi = (static_cast<double>(i) + 1.0) / nn - f;
      const double lo = f - static_cast<double>(i) / nn;
      worst = std::max({worst, hi, lo});
    }
  }
  return worst;
}

Discrepancies compute_discrepancies(const ObservedDataset& data, const std::vector<Stratum>& labels,
                                    const Theta& theta) {
  Discrepancies out;
  for (const MeasureId& m : measure_list(theta.family)) {
    switch (m.kind) {
      case MeasureKind::Signal:
      case MeasureKind::Noise:
      case MeasureKind::SignalToNoise: {
        const auto d = discrepancy_si_no_sn(data, labels, m.outcome, static_cast<Stratum>(m.stratum));
        if (!d) {
          out.push_back(std::nullopt);
        } else if (m.kind == MeasureKind::Signal) {
          out.push_back(d->si);
        } else if (m.kind == MeasureKind::Noise) {
          out.push_back(d->no);
        } else {
          out.push_back(std::isfinite(d->sn) ? std::optional<double>(d->sn) : std::nullopt);
        }
        break;
      }
      case MeasureKind::Chi2:
        out.push_back(chi2_discrepancy(data, labels, theta, m.outcome));
        break;
      case MeasureKind::KS:
        out.push_back(ks_discrepancy(data, theta));
        break;
    }
  }
  return out;
}

Replicate replicate_dataset(const Theta& theta, const ObservedDataset& data_template,
                            RngStream& rng) {
  Replicate rep;
  rep.data.units.resize(data_template.units.size());
  rep.labels.resize(data_template.units.size());

  // Per-cell Cholesky factors, computed once (sigma22 may be the latent scale).
  struct Chol {
    double mu1, mu2, l11, l21, l22;
    bool bivariate;
  };
  std::array<Chol, 4> chol;
  const bool bivariate = theta.family != Family::Univariate;
  for (int idx = 0; idx < 4; ++idx) {
    const CellParams& cell = theta.cells[idx];
    Chol& ch = chol[idx];
    ch.bivariate = bivariate;
    ch.mu1 = cell.mu[0];
    ch.l11 = std::sqrt(cell.sigma(0, 0));
    if (bivariate) {
      ch.mu2 = cell.mu[1];
      ch.l21 = cell.sigma(0, 1) / ch.l11;
      ch.l22 = std::sqrt(cell.sigma(1, 1) - ch.l21 * ch.l21);
    } else {
      ch.mu2 = ch.l21 = ch.l22 = 0.0;
    }
  }

  for (std::size_t i = 0; i < data_template.units.size(); ++i) {
    const int z = data_template.units[i].z;
    const Stratum s = rng.uniform() < theta.pi_c ? Stratum::Complier : Stratum::NeverTaker;
    rep.labels[i] = s;
    ObservedUnit& u = rep.data.units[i];
    u.z = z;
    u.d = (z == 1 && s == Stratum::Complier) ? 1 : 0;
    const Chol& ch = chol[cell_index(s, z)];
    const double z1 = norm_quantile(rng.uniform());
    u.y1 = ch.mu1 + ch.l11 * z1;
    if (ch.bivariate) {
      const double z2 = norm_quantile(rng.uniform());
      const double y2 = ch.mu2 + ch.l21 * z1 + ch.l22 * z2;
      u.y2 = theta.family == Family::ContinuousBinary ? (y2 > 0.0 ? 1.0 : 0.0) : y2;
    } else {
      u.y2 = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rep;
}

std::optional<double> PValueReport::p_of(const MeasureId& m) const {
  for (std::size_t i = 0; i < measures.size(); ++i)
    if (measures[i] == m) return p[i];
  throw std::out_of_range("PValueReport: unknown measure " + measure_name(m));
}

double pppv_from_pairs(
    const std::vector<std::pair<std::optional<double>, std::optional<double>>>& pairs) {
  double greater = 0.0, valid = 0.0;
  for (const auto& [obs, rep] : pairs) {
    if (!obs || !rep) continue;
    valid += 1.0;
    if (*rep > *obs) greater += 1.0;
    else if (*rep == *obs) greater += 0.5;
  }
  if (valid == 0.0) throw std::runtime_error("pppv: every comparison was undefined");
  return greater / valid;
}

PValueReport pppv(const DrawStore& draws, const ObservedDataset& data, std::uint64_t seed,
                  int threads) {
  const std::size_t total = draws.total_draws();
  if (total == 0) throw ValidationError("pppv: empty draw store");
  const auto measures = measure_list(draws.spec.family);

  std::vector<Discrepancies> obs_all(total), rep_all(total);
  parallel_for(static_cast<int>(total), threads, [&](int t) {
    RngStream rng = RngStream::derive(seed, {0x9901u, static_cast<std::uint64_t>(t)});
    const Theta& theta = draws.draw(static_cast<std::size_t>(t));
    const std::vector<Stratum> obs_labels = impute_strata(theta, data, rng);
    obs_all[t] = compute_discrepancies(data, obs_labels, theta);
    const Replicate rep = replicate_dataset(theta, data, rng);
    rep_all[t] = compute_discrepancies(rep.data, rep.labels, theta);
  });

  PValueReport report;
  report.method = "pppv";
  report.measures = measures;
  report.seed = seed;
  for (std::size_t k = 0; k < measures.size(); ++k) {
    double greater = 0.0, valid = 0.0;
    for (std::size_t t = 0; t < total; ++t) {
      const auto& obs = obs_all[t][k];
      const auto& rep = rep_all[t][k];
      if (!obs || !rep) continue;
      valid += 1.0;
      if (*rep > *obs) greater += 1.0;
      else if (*rep == *obs) greater += 0.5;
    }
    report.n_valid.push_back(static_cast<int>(valid));
    report.n_undefined.push_back(static_cast<int>(total - valid));
    report.p.push_back(valid > 0.0 ? std::optional<double>(greater / valid) : std::nullopt);
  }
  return report;
}

double pppv_measure(const DrawStore& draws, const ObservedDataset& data, const MeasureId& m,
                    std::uint64_t seed) {
  const auto p = pppv(draws, data, seed).p_of(m);
  if (!p) throw std::runtime_error("pppv: measure undefined on every draw");
  return *p;
}

PValueReport sppv(const Theta& theta_star, const ObservedDataset& data, int K, std::uint64_t seed) {
  if (K < 1) throw ValidationError("sppv: K must be >= 1");
  const auto measures = measure_list(theta_star.family);

  RngStream obs_rng = RngStream::derive(seed, {0x5501u});
  const std::vector<Stratum> obs_labels = impute_strata(theta_star, data, obs_rng);
  const Discrepancies obs = compute_discrepancies(data, obs_labels, theta_star);

  std::vector<double> greater(measures.size(), 0.0), less(measures.size(), 0.0),
      ties(measures.size(), 0.0);
  std::vector<int> undefined(measures.size(), 0);
  for (int k = 0; k < K; ++k) {
    RngStream rng = RngStream::derive(seed, {0x5502u, static_cast<std::uint64_t>(k)});
    const Replicate rep = replicate_dataset(theta_star, data, rng);
    const Discrepancies d = compute_discrepancies(rep.data, rep.labels, theta_star);
    for (std::size_t i = 0; i < measures.size(); ++i) {
      if (!obs[i] || !d[i]) {
        ++undefined[i];
        continue;
      }
      if (*d[i] > *obs[i]) greater[i] += 1.0;
      else if (*d[i] < *obs[i]) less[i] += 1.0;
      else ties[i] += 1.0;
    }
  }

  PValueReport report;
  report.method = "sppv";
  report.measures = measures;
  report.K = K;
  report.seed = seed;
  RngStream beta_rng = RngStream::derive(seed, {0x5503u});
  for (std::size_t i = 0; i < measures.size(); ++i) {
    const double n_valid = greater[i] + less[i] + ties[i];
    report.n_valid.push_back(static_cast<int>(n_valid));
    report.n_undefined.push_back(undefined[i]);
    if (!obs[i] || n_valid == 0.0) {
      report.p.push_back(std::nullopt);
      continue;
    }
    const double eps = beta_rng.uniform();
    const double a = greater[i] + eps * ties[i];
    const double b = less[i] + (1.0 - eps) * ties[i];
    report.p.push_back(sample_beta(a + 1.0, b + 1.0, beta_rng));
  }
  return report;
}

PValueReport modified_sppv(const DrawStore& draws, const ObservedDataset& data, int J, int K,
                           std::uint64_t seed, int threads) {
  const std::size_t total = draws.total_draws();
  if (J < 1) throw ValidationError("modified_sppv: J must be >= 1");
  if (static_cast<std::size_t>(J) > total)
    throw ValidationError("modified_sppv: J exceeds the available posterior draws");
  const auto measures = measure_list(draws.spec.family);

  RngStream pick_rng = RngStream::derive(seed, {0xA001u});
  const double u = pick_rng.uniform();
  // J distinct draw indices by partial Fisher-Yates.
  std::vector<std::size_t> index(total);
  for (std::size_t i = 0; i < total; ++i) index[i] = i;
  for (int j = 0; j < J; ++j) {
    const std::size_t pick =
        j + static_cast<std::size_t>(pick_rng.uniform() * static_cast<double>(total - j));
    std::swap(index[j], index[std::min(pick, total - 1)]);
  }

  std::vector<PValueReport> reports(J);
  parallel_for(J, threads, [&](int j) {
    const std::uint64_t sub = RngStream::derive(seed, {0xA002u, static_cast<std::uint64_t>(j)}).seed();
    reports[j] = sppv(draws.draw(index[j]), data, K, sub);
  });

  PValueReport out;
  out.method = "modified_sppv";
  out.measures = measures;
  out.K = K;
  out.J = J;
  out.seed = seed;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    std::vector<double> values;
    int undefined = 0;
    for (const auto& r : reports) {
      if (r.p[i]) values.push_back(*r.p[i]);
      else ++undefined;
    }
    out.n_valid.push_back(static_cast<int>(values.size()));
    out.n_undefined.push_back(undefined);
    if (values.empty()) {
      out.p.push_back(std::nullopt);
      continue;
    }
    std::sort(values.begin(), values.end());
    out.p.push_back(quantile_sorted(values, u));
  }
  return out;
}

}  // namespace pstrat
