#include "pstrat/types.hpp"

namespace pstrat {

Family family_from_name(const std::string& name) {
  if (name == "univariate") return Family::Univariate;
  if (name == "continuous_binary") return Family::ContinuousBinary;
  if (name == "continuous_continuous") return Family::ContinuousContinuous;
  throw ValidationError("unknown family: " + name);
}

Restriction restriction_from_name(const std::string& name) {
  if (name == "none") return Restriction::None;
  if (name == "er") return Restriction::ER;
  if (name == "per") return Restriction::PER;
  throw ValidationError("unknown restriction: " + name);
}

Variant variant_from_name(const std::string& name) {
  if (name == "Univariate") return Variant::Univariate;
  if (name == "UnivariateER") return Variant::UnivariateER;
  if (name == "Bivariate") return Variant::Bivariate;
  if (name == "BivariatePER") return Variant::BivariatePER;
  throw ValidationError("unknown variant: " + name);
}

ModelSpec make_variant_spec(Variant v, Family bivariate_family, const Priors& priors) {
  ModelSpec spec;
  spec.priors = priors;
  switch (v) {
    case Variant::Univariate:
      spec.family = Family::Univariate;
      spec.restriction = Restriction::None;
      break;
    case Variant::UnivariateER:
      spec.family = Family::Univariate;
      spec.restriction = Restriction::ER;
      break;
    case Variant::Bivariate:
      spec.family = bivariate_family;
      spec.restriction = Restriction::None;
      break;
    case Variant::BivariatePER:
      spec.family = bivariate_family;
      spec.restriction = Restriction::PER;
      break;
  }
  if (spec.family == Family::Univariate && v >= Variant::Bivariate)
    throw ValidationError("bivariate variant requested for univariate data");
  return spec;
}

std::vector<Variant> applicable_variants(Family declared_family) {
  if (declared_family == Family::Univariate)
    return {Variant::Univariate, Variant::UnivariateER};
  return {Variant::Bivariate, Variant::BivariatePER, Variant::Univariate, Variant::UnivariateER};
}

}  // namespace pstrat
