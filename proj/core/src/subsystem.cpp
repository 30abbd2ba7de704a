#include "expsol/subsystem.hpp"

#include <cmath>
#include <stdexcept>

namespace expsol {

void rhs_sub(int d, std::span<const double> state, std::span<double> deriv) {
  const double X = state[0], Y = state[1];
  deriv[0] = X * (d * X * X - 1.0) + (d - 1.0) * Y * Y;
  deriv[1] = X * Y * (d * X - 1.0);
}

double rcal_sub(int d, double X, double Y) {
  return 2.0 * d * X - d * (d + 1.0) * X * X - (d - 1.0) * d * Y * Y;
}

SubJacobianInfo saddle_data(int d) {
  const double x = 1.0 / d;
  SubJacobianInfo info;
  // d/dX of X' is 3dX^2 - 1; d/dY is 2(d-1)Y; d/dX of Y' is Y(2dX - 1);
  // d/dY of Y' is X(dX - 1), which vanishes at the fixed point.
  info.jac = {{{3.0 * x - 1.0, 2.0 * (d - 1.0) * x}, {x, 0.0}}};
  const double tr = info.jac[0][0];
  const double det = -info.jac[0][1] * info.jac[1][0];
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  info.lambda_unstable = (tr + disc) / 2.0;
  info.lambda_stable = (tr - disc) / 2.0;
  // Eigenvector of [[a, b], [c, 0]] for eigenvalue l: (l, c) up to scale,
  // since c * v_x = l * v_y. Both components positive, so the inward
  // direction is its negative.
  double vx = info.lambda_unstable, vy = info.jac[1][0];
  const double nrm = std::hypot(vx, vy);
  info.unstable_dir = {-vx / nrm, -vy / nrm};
  return info;
}

namespace {

Rhs make_sub_rhs(int d) {
  return [d](double, std::span<const double> y, std::span<double> dy) {
    rhs_sub(d, y, dy);
  };
}

}  // namespace

SubTrajectory unstable_trajectory(int d, double offset, double x_stop) {
  if (d < 2) throw std::invalid_argument("unstable_trajectory: d must be >= 2");
  if (!(offset > 0.0))
    throw std::invalid_argument("unstable_trajectory: offset must be positive");
  const SubJacobianInfo sad = saddle_data(d);
  const double x0 = 1.0 / d + offset * sad.unstable_dir[0];
  const double y0 = 1.0 / d + offset * sad.unstable_dir[1];
  if (!(x0 > 0.0 && x0 < 1.0 / d && y0 > 0.0 && y0 < 1.0 / d))
    throw std::invalid_argument(
        "unstable_trajectory: offset too large, seed leaves the open box");

  IntegratorConfig cfg;
  cfg.rel_tol = 1e-13;
  cfg.abs_tol = 1e-16;
  // The refined ratio crosses its limit shortly before the stop; cap the
  // step so the sampled minimum cannot straddle that crossing.
  cfg.max_step = 0.005;
  EventSpec stop;
  stop.name = "x-stop";
  stop.localize = true;
  stop.g = [x_stop](double, std::span<const double> y) { return y[0] - x_stop; };

  SubTrajectory out;
  out.d = d;
  out.offset = offset;
  const double seed[2] = {x0, y0};
  out.run = integrate(make_sub_rhs(d), seed, 0.0, 1e6, cfg, {stop});

  const double lim1 = d - 1.0;
  const double lim2 = 2.0 * (d - 1.0) * (d - 1.0);
  out.ratio_err = 1e300;
  out.refined_ratio_err = 1e300;
  out.rcal_positive_late = true;
  for (std::size_t k = 0; k < out.run.n_samples(); ++k) {
    const auto y = out.run.sample(k);
    const double X = y[0], Y = y[1];
    if (X < x_stop) continue;
    const double q1 = X / (Y * Y);
    const double q2 = (q1 - lim1) / (Y * Y);
    out.ratio_err = std::min(out.ratio_err, std::abs(q1 - lim1));
    out.refined_ratio_err = std::min(out.refined_ratio_err, std::abs(q2 - lim2));
    if (X < 1.0 / (2.0 * d) && !(rcal_sub(d, X, Y) > 0.0))
      out.rcal_positive_late = false;
  }
  {
    const auto yf = std::span<const double>(out.run.y_final);
    const double X = yf[0], Y = yf[1];
    out.ratio_at_stop = X / (Y * Y);
    out.refined_ratio_at_stop = (out.ratio_at_stop - lim1) / (Y * Y);
  }
  return out;
}

BoxReport box_preservation_check(int d, double x0, double y0, double horizon) {
  if (!(x0 > 0.0 && x0 < 1.0 / d && y0 > 0.0 && y0 < 1.0 / d))
    throw std::invalid_argument(
        "box_preservation_check: state must lie in the open box (0, 1/d)^2");
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-16;
  const double seed[2] = {x0, y0};
  const Integration run = integrate(make_sub_rhs(d), seed, 0.0, horizon, cfg);
  BoxReport rep;
  for (std::size_t k = 0; k < run.n_samples(); ++k) {
    const auto y = run.sample(k);
    if (!(y[0] > 0.0 && y[0] < 1.0 / d && y[1] > 0.0 && y[1] < 1.0 / d))
      rep.contained = false;
  }
  rep.final_x = run.y_final[0];
  rep.final_y = run.y_final[1];
  // Y decays only algebraically (~ s^(-1/2)), so the check is relative.
  rep.decayed =
      std::hypot(rep.final_x, rep.final_y) < 0.2 * std::hypot(x0, y0);
  return rep;
}

}  // namespace expsol
