#include "pstrat/estimands.hpp"

#include <algorithm>
#include <cmath>

#include "pstrat/gauss.hpp"

namespace pstrat {

double tau(const Theta& theta, Stratum s) {
  return theta.cell(s, 1).mu[0] - theta.cell(s, 0).mu[0];
}

double secondary_effect(const Theta& theta, Stratum s) {
  if (theta.family == Family::Univariate)
    throw std::invalid_argument("secondary_effect: requires a bivariate family");
  const double m1 = theta.cell(s, 1).mu[1];
  const double m0 = theta.cell(s, 0).mu[1];
  if (theta.family == Family::ContinuousBinary) return norm_cdf(m1) - norm_cdf(m0);
  return m1 - m0;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::invalid_argument("quantile_sorted: empty input");
  if (n == 1) return sorted[0];
  const double h = static_cast<double>(n - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

PosteriorSummary summarize(const std::vector<double>& draws) {
  if (draws.size() < 2) throw std::invalid_argument("summarize: needs at least 2 draws");
  std::vector<double> sorted(draws);
  std::sort(sorted.begin(), sorted.end());
  PosteriorSummary s;
  s.median = quantile_sorted(sorted, 0.5);
  s.q025 = quantile_sorted(sorted, 0.025);
  s.q975 = quantile_sorted(sorted, 0.975);
  s.width = s.q975 - s.q025;
  double below = 0.0, sum = 0.0;
  for (double d : draws) {
    below += (d < 0.0);
    sum += d;
  }
  s.prob_negative = below / static_cast<double>(draws.size());
  s.mean = sum / static_cast<double>(draws.size());
  return s;
}

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("gelman_rubin: needs >= 2 chains");
  const std::size_t n = chains[0].size();
  if (n < 2) throw std::invalid_argument("gelman_rubin: chains must have length >= 2");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal lengths");

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (double v : chains[j]) s += v;
    means[j] = s / static_cast<double>(n);
    double ss = 0.0;
    for (double v : chains[j]) ss += (v - means[j]) * (v - means[j]);
    w += ss / static_cast<double>(n - 1);
  }
  w /= static_cast<double>(m);

  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double b_over_n = 0.0;  // between-chain variance of the chain means
  for (double v : means) b_over_n += (v - grand) * (v - grand);
  b_over_n /= static_cast<double>(m - 1);

  if (w == 0.0) return b_over_n > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double nn = static_cast<double>(n);
  const double psrf = std::sqrt(((nn - 1.0) / nn * w + b_over_n) / w);
  return std::max(psrf, 1.0);
}

KdeGrid kde(const std::vector<double>& draws, std::optional<double> bandwidth) {
  if (draws.size() < 2) throw std::invalid_argument("kde: needs at least 2 draws");
  const double n = static_cast<double>(draws.size());
  std::vector<double> sorted(draws);
  std::sort(sorted.begin(), sorted.end());

  double h;
  if (bandwidth) {
    h = *bandwidth;
    if (!(h > 0.0)) throw std::invalid_argument("kde: bandwidth must be positive");
  } else {
    double mean = 0.0;
    for (double v : draws) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : draws) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread == 0.0) spread = std::max(sd, iqr / 1.34);
    if (!(spread > 0.0)) throw std::invalid_argument("kde: zero-variance input");
    h = 0.9 * spread * std::pow(n, -0.2);
  }

  constexpr int kPoints = 512;
  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double step = (hi - lo) / (kPoints - 1);
  KdeGrid grid;
  grid.bandwidth = h;
  grid.x.resize(kPoints);
  grid.density.assign(kPoints, 0.0);
  for (int i = 0; i < kPoints; ++i) grid.x[i] = lo + step * i;
  const double norm = 1.0 / (n * h);
  for (double v : draws) {
    for (int i = 0; i < kPoints; ++i) {
      const double u = (grid.x[i] - v) / h;
      if (std::fabs(u) < 8.0) grid.density[i] += norm * norm_pdf(u);
    }
  }
  return grid;
}

double correlation_ratio(double pi_c, const std::array<CellParams, 4>& cells, int z) {
  const CellParams& c = cells[cell_index(Stratum::Complier, z)];
  const CellParams& n = cells[cell_index(Stratum::NeverTaker, z)];
  if (c.dim() != 2 || n.dim() != 2)
    throw std::invalid_argument("correlation_ratio: requires bivariate cells");
  const double pi_n = 1.0 - pi_c;
  const double diff = c.mu[1] - n.mu[1];
  const double between = pi_c * pi_n * diff * diff;
  const double total = between + pi_c * c.sigma(1, 1) + pi_n * n.sigma(1, 1);
  return total > 0.0 ? between / total : 0.0;
}

double correlation_ratio(const Theta& theta, int z) {
  return correlation_ratio(theta.pi_c, theta.cells, z);
}

}  // namespace pstrat
