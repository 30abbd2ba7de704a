#pragma once

#include <string>
#include <vector>

#include "expsol/analysis.hpp"
#include "expsol/problem.hpp"

namespace expsol {

// Target asymptotic cone: slopes 1/sigma_i over the given link.
struct ConeSpec {
  std::vector<double> sigma;  // one positive entry per factor

  // sum d_i mu_i sigma_i^2 - n (n - 1); the cone's scalar curvature is this
  // coefficient divided by t^2.
  double cone_scal_coeff(const ProblemSpec& spec) const;
};

struct BracketPoint {
  double C = 0.0;
  double sigma1 = 0.0;
  double uncertainty = 0.0;
  bool low_confidence = false;
};

enum class ShootStatus { Converged, BracketFailure, ToleranceNotMet };

struct ShootResult {
  ShootStatus status = ShootStatus::BracketFailure;
  SeedParams params;                  // seed realizing the target
  AsymptoticReport achieved;          // extraction of the final run
  std::vector<BracketPoint> bracket;  // every trajectory evaluation, in order
  std::vector<double> rescale_factors;  // c_2..c_r (1.0 entries when unused)
  int iterations = 0;                   // trajectory evaluations consumed
  bool straddle_violated = false;  // endpoints stopped straddling the target
  std::string message;
};

// Default run configuration used by the solver's trajectory evaluations.
RunConfig shooting_run_config();

// sigma_1 of the trajectory seeded with (fbar, C); regular regime required.
BracketPoint sigma1_of_C(const ProblemSpec& spec,
                         const std::vector<double>& fbar, double C,
                         const RunConfig& config = shooting_run_config());

// Finds C with |sigma_1(C) - target| <= tol * target by bracket expansion
// from C = -eps*n (geometric, factor 4, within |C|/eps in [1e-8, 1e8])
// followed by bisection in theta = log(-C/eps). Continuity plus the two
// boundary limits justify bisection; monotonicity is not assumed, and a
// straddle violation during bisection is surfaced in the result.
ShootResult solve_for_sigma1(const ProblemSpec& spec,
                             const std::vector<double>& fbar, double target,
                             double tol,
                             const RunConfig& config = shooting_run_config());

// For factors with mu_i = 0 (i >= 2) the Y_i equations decouple, so scaling
// fbar_i by 1/c_i scales sigma_i by c_i and leaves (L, X_1, Y_1, X_j)
// untouched. Applies c_i = target_i / achieved_i and re-runs.
ShootResult rescale_for_ricci_flat(const ProblemSpec& spec,
                                   const ShootResult& base,
                                   const std::vector<double>& target_tail,
                                   const RunConfig& config = shooting_run_config());

// solve_for_sigma1 on sigma_1, then rescale_for_ricci_flat on sigma_2..r,
// then a final verification extraction. Requires mu_i = 0 for i >= 2 and all
// sigma_i > 0 (sigma_i = 0 would ask for an Einstein trajectory, which this
// solver cannot produce).
ShootResult realize_cone(const ProblemSpec& spec, const ConeSpec& cone,
                         double tol,
                         const RunConfig& config = shooting_run_config());

struct SweepRow {
  double C = 0.0;
  std::vector<double> sigma;
  std::vector<double> sigma_uncertainty;
  double scal_limit = 0.0;
  double cone_scal_coeff = 0.0;
  std::vector<std::string> flags;
  std::string error;  // non-empty when this row's run failed
};

// One trajectory per C value; rows computed concurrently by up to `workers`
// threads, returned in input order.
std::vector<SweepRow> sweep(const ProblemSpec& spec,
                            const std::vector<double>& fbar,
                            const std::vector<double>& c_values, int workers = 1,
                            const RunConfig& config = shooting_run_config());

}  // namespace expsol
