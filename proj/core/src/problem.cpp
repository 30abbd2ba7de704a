#include "expsol/problem.hpp"

#include <cmath>
#include <sstream>

namespace expsol {

void ProblemSpec::validate() const {
  if (d.size() < 2) throw std::invalid_argument("d: need at least two factors");
  if (mu.size() != d.size())
    throw std::invalid_argument("mu: size must match d");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] < 1)
      throw std::invalid_argument("d: entries must be positive integers");
    if (!std::isfinite(mu[i]))
      throw std::invalid_argument("mu: entries must be finite");
  }
  if (mu[0] != static_cast<double>(d[0] - 1))
    throw std::invalid_argument("mu: mu_1 must equal d_1 - 1 (round sphere factor)");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("eps: must be a positive finite real");
}

bool ProblemSpec::conical_ok() const {
  if (d[0] < 2) return false;
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (mu[i] < 0.0) return false;
  return true;
}

bool ProblemSpec::ricci_flat_tail() const {
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (mu[i] != 0.0) return false;
  return true;
}

void SeedParams::validate(const ProblemSpec& spec) const {
  if (fbar.size() + 1 != spec.d.size())
    throw std::invalid_argument("fbar: need one radius per non-collapsing factor");
  for (double f : fbar)
    if (!(f > 0.0) || !std::isfinite(f))
      throw std::invalid_argument("fbar: radii must be positive finite reals");
  if (!std::isfinite(C)) throw std::invalid_argument("C: must be finite");
}

std::string to_string(SeedRegime regime) {
  switch (regime) {
    case SeedRegime::Regular: return "regular";
    case SeedRegime::Einstein: return "einstein";
    default: return "rejected";
  }
}

SeedRegime validate_seed_regime(const ProblemSpec& spec, const SeedParams& params,
                                std::string* reason) {
  spec.validate();
  params.validate(spec);
  if (params.C > 0.0) {
    if (reason) *reason = "C > 0 is outside the expanding regime (scalar-curvature bound excludes it)";
    return SeedRegime::Rejected;
  }
  for (std::size_t i = 0; i < params.fbar.size(); ++i) {
    const double fb = params.fbar[i];
    const double F = spec.mu[i + 1] / (fb * fb) + spec.eps / 2.0;
    if (!(F > 0.0)) {
      if (reason) {
        std::ostringstream os;
        os << "factor " << i + 2 << ": mu/fbar^2 + eps/2 = " << F << " <= 0";
        *reason = os.str();
      }
      return SeedRegime::Rejected;
    }
  }
  return params.C < 0.0 ? SeedRegime::Regular : SeedRegime::Einstein;
}

}  // namespace expsol
