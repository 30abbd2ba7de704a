#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "expsol/integrator.hpp"
#include "expsol/model.hpp"
#include "expsol/problem.hpp"
#include "expsol/seeding.hpp"

namespace expsol {

// Configuration of one full trajectory run (seed -> s-system -> terminal).
struct RunConfig {
  double l_floor = 1e-6;      // terminal event for regular runs
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  double stab_rel_tol = 5e-12;  // tolerance of the stabilized tail integrator
  double s_switch = 200.0;      // hand-off point of the hybrid engine
  double s_max = 1e13;
  enum class Engine {
    Hybrid,            // adaptive 5(4) transient + stabilized explicit tail
    Adaptive54,        // adaptive 5(4) only
    FixedStepClassic4  // fixed-step classic RK4 in s (reference oracle)
  } engine = Engine::Hybrid;
  double fixed_h = 0.03;
  double t0 = 0.0;  // <= 0 selects default_t0
  int sample_stride = 1;
  double monitor_tol = 1e-6;  // per-sample conservation bound factor
  std::vector<double> s_grid; // optional shared output grid (Adaptive54 only)
  long max_steps = 50'000'000;
};

struct TrajectoryRecord {
  ProblemSpec spec;
  SeedParams params;
  SeedResult seed;
  SeedRegime classification = SeedRegime::Rejected;
  Integration run;                // sampled flat s-states
  std::vector<Diagnostics> diag;  // one per sample
  std::vector<std::string> flags; // invariant violations; never silently dropped
  double max_residual_over_l2 = 0.0;

  SLayout layout() const { return SLayout(spec.r()); }
  std::size_t n_samples() const { return run.n_samples(); }
  std::span<const double> state(std::size_t k) const { return run.sample(k); }
  bool accepted() const { return flags.empty(); }
};

// Seed, convert, integrate to the L-floor (regular) or to the fixed-point
// stopping ball (Einstein), with all per-sample invariants monitored.
// Einstein runs re-impose the exactly conserved sum d_i X_i = 1 after each
// accepted step and stop when max_i |X_i - 1/n| < 1e-8.
// Throws std::invalid_argument when the seed regime is rejected.
TrajectoryRecord run_trajectory(const ProblemSpec& spec, const SeedParams& params,
                                const RunConfig& config);

struct AsymptoticReport {
  std::vector<double> sigma;              // cone radius parameters, lim Y_i/X_i
  std::vector<double> sigma_uncertainty;  // spread of raw/fitted/extrapolated
  std::vector<bool> divergent;            // Einstein case: X_i/Y_i -> infinity
  std::vector<double> refined;            // lim (X_i - (eps/2)L^2)/L^4
  double scal_limit = 0.0;                // lim of (scalar curvature)/L^2
  double cone_scal_coeff = 0.0;           // sum d_i mu_i sigma_i^2 - n(n-1)
  double sigma_fit_residual = 0.0;        // max log-space misfit of the sigma fit
  bool low_confidence = false;
};

// sigma_i from a fit a*exp(b/t^2) of Y_i/X_i over the last decade of t;
// refined limits and scal_limit from linear a + b/t^2 fits of the
// corresponding renormalized quantities.
AsymptoticReport extract_sigma(const TrajectoryRecord& record);

struct ExpanderReport {
  double elt_err = 0.0;                 // |(eps/2) L t - 1| at the terminal sample
  std::vector<double> x_over_l2_err;    // |X_i/L^2 - eps/2| * (2/eps)
  std::vector<double> y_over_l_first;
  std::vector<double> y_over_l_last;
  bool y_over_l_monotone = false;       // non-increasing at every sample pair
  bool pass(double tol) const;
};

ExpanderReport expander_asymptotics_check(const TrajectoryRecord& record,
                                          double mono_slack = 1e-10);

struct InequalityReport {
  bool x1_dominates = true;   // X_1 > X_i for i >= 2, all samples
  bool x1_above_q = true;     // X_1 > sum d X^2, all samples
  bool x1_above_l2 = true;    // X_1 > (eps/2) L^2, all samples
  bool u_negative = true;     // u < 0 for t > 0 (C < 0 records)
  bool udot_negative = true;  // udot < 0 for t > 0 (C < 0 records)
  long first_violation = -1;  // sample index, or -1
  bool all_hold() const {
    return x1_dominates && x1_above_q && x1_above_l2;
  }
};

InequalityReport preserved_inequalities_monitor(const TrajectoryRecord& record);

// Integrates f' = -c1(s) f + c2(s) and returns the terminal value, which must
// approach c2*/c1*; validates the extraction methodology on a problem with a
// known limit.
double comparison_lemma_harness(const std::function<double(double)>& c1,
                                const std::function<double(double)>& c2,
                                double f0, double s_end = 80.0);

// Scalar curvature extrapolated to the singular orbit via an LSQ fit
// R(t) = a + b t^2 + c t^4 over samples with t <= t_window.
double scalar_at_origin(const TrajectoryRecord& record, double t_window = 0.3);

struct OriginRunReport {
  bool lyapunov_strictly_decreasing = false;  // sum Y^2 + (eps/2) L^2
  double final_norm = 0.0;
  std::size_t n_samples = 0;
};

// Forward-integrates a small state (components L, X_1..r, Y_1..r) and checks
// decay to the origin with the Lyapunov quantity strictly decreasing.
OriginRunReport origin_attraction_run(const ProblemSpec& spec,
                                      std::span<const double> lxy, double s_end);

}  // namespace expsol
