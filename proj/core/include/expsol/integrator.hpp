#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace expsol {

// Autonomous flat-vector right-hand side: dy/ds = f(s, y).
using Rhs = std::function<void(double s, std::span<const double> y, std::span<double> dy)>;

// Row-major dim x dim Jacobian d f_i / d y_j of an autonomous rhs.
using Jac =
    std::function<void(double s, std::span<const double> y, std::span<double> jac)>;

enum class IntegratorMode {
  AdaptiveEmbedded54,
  FixedStepClassic4,
  StabilizedExplicit2,
  SemiImplicit43  // Rosenbrock 4(3); uses `jacobian` (finite differences when
                  // unset); assumes an autonomous rhs
};

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  double max_step = 1e6;
  double min_step = 1e-14;
  long max_steps = 50'000'000;
  IntegratorMode mode = IntegratorMode::AdaptiveEmbedded54;
  double fixed_h = 0.03;        // FixedStepClassic4 only
  double initial_h = 1e-6;      // adaptive modes
  double stab_rho = 2.0;        // StabilizedExplicit2: spectral-radius bound
  int stab_m_max = 100000;      // StabilizedExplicit2: stage-count cap
  int sample_stride = 1;        // record every k-th accepted step
  double blowup_norm = 1e12;    // max-norm beyond which the run aborts
  Jac jacobian;                 // SemiImplicit43 only; optional
};

// A scalar event function g(s, y); the event fires on the first accepted step
// where g <= 0 after having been positive. With `localize`, the step is
// bisected so the final state lies on g = 0 to roundoff.
struct EventSpec {
  std::function<double(double s, std::span<const double> y)> g;
  bool terminal = true;
  bool localize = false;
  std::string name;
};

// Optional mutation applied to the state after every accepted step (e.g.
// re-imposing an exactly conserved constraint).
using StepHook = std::function<void(double s, std::span<double> y)>;

enum class IntegrationStatus { ReachedHorizon, EventHit, MaxSteps, Stall, Blowup };

struct Integration {
  IntegrationStatus status = IntegrationStatus::ReachedHorizon;
  std::string event_name;          // when status == EventHit
  double s_final = 0.0;
  std::vector<double> y_final;
  long steps_accepted = 0;
  long steps_rejected = 0;
  long rhs_evals = 0;

  // Row-major sampled trajectory: samples_s[k] with state
  // samples_y[k*dim .. (k+1)*dim).
  int dim = 0;
  std::vector<double> samples_s;
  std::vector<double> samples_y;

  // States recorded exactly at the requested output grid (adaptive 5(4) only).
  std::vector<double> grid_s;
  std::vector<double> grid_y;

  std::span<const double> sample(std::size_t k) const {
    return {samples_y.data() + k * dim, static_cast<std::size_t>(dim)};
  }
  std::size_t n_samples() const { return samples_s.size(); }
  std::span<const double> grid_sample(std::size_t k) const {
    return {grid_y.data() + k * dim, static_cast<std::size_t>(dim)};
  }
};

// Integrate dy/ds = rhs from (s0, y0) until s_end, an event, or a failure.
// `grid`, if non-null, is a sorted list of s values the adaptive 5(4) stepper
// must hit exactly; the states there are recorded in grid_s/grid_y.
Integration integrate(const Rhs& rhs, std::span<const double> y0, double s0,
                      double s_end, const IntegratorConfig& config,
                      const std::vector<EventSpec>& events = {},
                      const StepHook* hook = nullptr,
                      const std::vector<double>* grid = nullptr);

}  // namespace expsol
