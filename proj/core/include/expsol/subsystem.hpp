#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "expsol/integrator.hpp"

namespace expsol {

// Planar limit system obtained by freezing all factors but the first:
//   X' = X (d X^2 - 1) + (d - 1) Y^2
//   Y' = X Y (d X - 1)
// It governs the large-|C| side of the shooting bracket.

void rhs_sub(int d, std::span<const double> state, std::span<double> deriv);

// Renormalized scalar curvature restricted to the planar system.
double rcal_sub(int d, double X, double Y);

struct SubJacobianInfo {
  std::array<std::array<double, 2>, 2> jac;  // at the saddle (1/d, 1/d)
  double lambda_unstable = 0.0;
  double lambda_stable = 0.0;
  std::array<double, 2> unstable_dir{};  // unit vector, pointing into the box
};

// Closed-form Jacobian and eigen-data of the interior fixed point (1/d, 1/d).
SubJacobianInfo saddle_data(int d);

struct SubTrajectory {
  int d = 2;
  double offset = 0.0;
  Integration run;                 // samples of (X, Y)
  // Best (smallest-error) values of the two limit ratios over samples kept
  // before X drops below x_stop, each at its own best sample.
  double ratio_err = 0.0;          // min |X/Y^2 - (d-1)|
  double refined_ratio_err = 0.0;  // min |(X/Y^2 - (d-1))/Y^2 - 2(d-1)^2|
  double ratio_at_stop = 0.0;      // X/Y^2 at the X = x_stop crossing
  double refined_ratio_at_stop = 0.0;
  bool rcal_positive_late = false; // restricted curvature > 0 once X < 1/(2d)
};

// Distinguished trajectory: seeded `offset` along the inward unstable
// eigenvector at (1/d, 1/d), integrated until X crosses x_stop (localized).
// Throws std::invalid_argument if the seed leaves the open box immediately.
SubTrajectory unstable_trajectory(int d, double offset = 1e-8,
                                  double x_stop = 1e-4);

struct BoxReport {
  bool contained = true;   // 0 < X, Y < 1/d at every sample
  bool decayed = false;    // terminal norm below a fifth of the initial norm
  double final_x = 0.0;
  double final_y = 0.0;
};

// Integrates from an interior state and checks invariance of the open box
// plus decay to the origin. Throws std::invalid_argument outside the box.
BoxReport box_preservation_check(int d, double x0, double y0,
                                 double horizon = 200.0);

}  // namespace expsol
