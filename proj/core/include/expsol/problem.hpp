#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace expsol {

// Fixes the ODE system: factor dimensions d_i, Einstein constants mu_i of the
// link factors, and the expander constant eps. The first factor is a round
// sphere of radius 1 that collapses at the singular orbit, so mu_1 = d_1 - 1.
struct ProblemSpec {
  std::vector<int> d;
  std::vector<double> mu;
  double eps = 1.0;

  int r() const { return static_cast<int>(d.size()); }
  int n() const {
    int sum = 0;
    for (int di : d) sum += di;
    return sum;
  }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // True when the asymptotically-conical pipeline applies: d_1 >= 2 and
  // mu_i >= 0 for i >= 2.
  bool conical_ok() const;

  // True when the Ricci-flat-link rescaling applies: mu_i = 0 for i >= 2.
  bool ricci_flat_tail() const;
};

// Parameters of one trajectory off the singular orbit: initial radii of the
// non-collapsing factors and the potential-curvature constant C (<= 0).
struct SeedParams {
  std::vector<double> fbar;  // size r-1, radii for factors 2..r
  double C = -1.0;

  void validate(const ProblemSpec& spec) const;
};

enum class SeedRegime { Regular, Einstein, Rejected };

std::string to_string(SeedRegime regime);

// C < 0 with all Fbar_i = mu_i/fbar_i^2 + eps/2 > 0 -> Regular;
// C = 0 likewise -> Einstein; anything else -> Rejected.
// When `reason` is non-null and the result is Rejected, a human-readable
// explanation is stored.
SeedRegime validate_seed_regime(const ProblemSpec& spec, const SeedParams& params,
                                std::string* reason = nullptr);

}  // namespace expsol
