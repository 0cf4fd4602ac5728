#ifndef PSTRAT_TYPES_HPP
#define PSTRAT_TYPES_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstrat {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Outcome model families. Univariate models the primary outcome alone;
/// ContinuousBinary pairs it with a probit-linked binary outcome
/// (latent-utility formulation, second diagonal of the covariance fixed
/// at 1); ContinuousContinuous is a full bivariate normal.
enum class Family { Univariate, ContinuousBinary, ContinuousContinuous };

/// Structural restrictions on the never-taker outcome distributions.
/// ER ties the full never-taker distribution across arms; PER ties only
/// the secondary-outcome location (mu2).
enum class Restriction { None, ER, PER };

enum class Stratum : int { Complier = 0, NeverTaker = 1 };

enum class InitStrategy { PriorDraw, MomentPerturb };

/// The four fitting variants exposed by the CLI and the simulation lab.
enum class Variant { Univariate, UnivariateER, Bivariate, BivariatePER };

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

inline int outcome_dim(Family family) {
  return family == Family::Univariate ? 1 : 2;
}

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Univariate: return "univariate";
    case Family::ContinuousBinary: return "continuous_binary";
    case Family::ContinuousContinuous: return "continuous_continuous";
  }
  return "?";
}

inline const char* restriction_name(Restriction r) {
  switch (r) {
    case Restriction::None: return "none";
    case Restriction::ER: return "er";
    case Restriction::PER: return "per";
  }
  return "?";
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Univariate: return "Univariate";
    case Variant::UnivariateER: return "UnivariateER";
    case Variant::Bivariate: return "Bivariate";
    case Variant::BivariatePER: return "BivariatePER";
  }
  return "?";
}

Family family_from_name(const std::string& name);
Restriction restriction_from_name(const std::string& name);
Variant variant_from_name(const std::string& name);

/// One study unit: binary assignment z, binary take-up d, primary outcome
/// y1 and secondary outcome y2 (NaN when the dataset carries no secondary
/// outcome).
struct ObservedUnit {
  int z = 0;
  int d = 0;
  double y1 = 0.0;
  double y2 = std::numeric_limits<double>::quiet_NaN();

  bool has_y2() const { return !std::isnan(y2); }
};

struct ObservedDataset {
  std::vector<ObservedUnit> units;

  int n() const { return static_cast<int>(units.size()); }
  int count(int z) const {
    int c = 0;
    for (const auto& u : units) c += (u.z == z);
    return c;
  }
  int count(int z, int d) const {
    int c = 0;
    for (const auto& u : units) c += (u.z == z && u.d == d);
    return c;
  }
};

/// Mean vector and covariance matrix of one (stratum, arm) outcome cell.
/// Dimension is 1 for the univariate family, 2 otherwise.
struct CellParams {
  Vector mu;
  Matrix sigma;

  int dim() const { return static_cast<int>(mu.size()); }

  static CellParams make(int dim) {
    CellParams c;
    c.mu = Vector::Zero(dim);
    c.sigma = Matrix::Identity(dim, dim);
    return c;
  }
};

/// Flat index of the (stratum, arm) cell: compliers first, control arm first.
inline int cell_index(Stratum s, int z) { return 2 * static_cast<int>(s) + z; }

inline Stratum cell_stratum(int index) { return static_cast<Stratum>(index / 2); }
inline int cell_arm(int index) { return index % 2; }

/// Full parameter vector: stratum probability plus the four outcome cells.
struct Theta {
  double pi_c = 0.5;
  std::array<CellParams, 4> cells;
  Family family = Family::ContinuousContinuous;

  CellParams& cell(Stratum s, int z) { return cells[cell_index(s, z)]; }
  const CellParams& cell(Stratum s, int z) const { return cells[cell_index(s, z)]; }

  static Theta make(Family family) {
    Theta t;
    t.family = family;
    const int d = outcome_dim(family);
    for (auto& c : t.cells) c = CellParams::make(d);
    return t;
  }
};

/// Truncated bivariate normal prior for the free covariance entries
/// (sigma11, sigma12) when sigma22 is pinned at 1. The support is the
/// positive-definite region A = { sigma11 > sigma12^2 }.
struct ConstrainedCovPrior {
  Eigen::Vector2d sigma0{1.0, 0.0};
  Eigen::Matrix2d Sigma0 = (Eigen::Matrix2d() << 100.0, 0.0, 0.0, 100.0).finished();

  static bool in_region(double s11, double s12) { return s11 > 0.0 && s11 > s12 * s12; }
  static bool in_region(const Eigen::Vector2d& s) { return in_region(s[0], s[1]); }
};

struct Priors {
  double mean_variance = 100.0;          // v_a, per coordinate, prior mean 0
  double pi_a = 1.0;                     // Beta(pi_a, pi_b) on pi_c
  double pi_b = 1.0;
  double var_shape = 0.01;               // inverse-gamma on the univariate variance
  double var_rate = 0.01;
  double wishart_df = 4.0;               // inverse-Wishart on the bivariate covariance
  Eigen::Matrix2d wishart_scale = Eigen::Matrix2d::Identity();
  ConstrainedCovPrior cov;               // probit-family covariance block
};

struct ModelSpec {
  Family family = Family::ContinuousContinuous;
  Restriction restriction = Restriction::None;
  Priors priors;
  // Known-variance mode (univariate family only): per-cell sigma11 values,
  // indexed by cell_index. Used when validating the sampler against the
  // grid evaluator.
  std::optional<std::array<double, 4>> fixed_variances;
};

/// Latent state carried by the data-augmentation sweep: stratum label per
/// unit, plus probit utilities for the ContinuousBinary family.
struct AugmentedState {
  std::vector<Stratum> s;
  std::vector<double> y2_star;  // empty unless family == ContinuousBinary
};

/// Maps a fitting variant onto a concrete model spec. `bivariate_family`
/// says which bivariate family the data supports (probit for binary y2,
/// full normal for continuous y2).
ModelSpec make_variant_spec(Variant v, Family bivariate_family, const Priors& priors);

/// Variants applicable to data declared with the given family.
std::vector<Variant> applicable_variants(Family declared_family);

}  // namespace pstrat

#endif
