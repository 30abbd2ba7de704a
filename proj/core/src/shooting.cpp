#include "expsol/shooting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace expsol {

double ConeSpec::cone_scal_coeff(const ProblemSpec& spec) const {
  if (sigma.size() != static_cast<std::size_t>(spec.r()))
    throw std::invalid_argument("ConeSpec: sigma size must match factor count");
  double acc = 0.0;
  for (int i = 0; i < spec.r(); ++i)
    acc += spec.d[i] * spec.mu[i] * sigma[i] * sigma[i];
  return acc - static_cast<double>(spec.n()) * (spec.n() - 1);
}

RunConfig shooting_run_config() {
  RunConfig cfg;
  // A shallower floor than the high-accuracy default: each evaluation must be
  // cheap, and sigma extraction at this depth is converged well past the
  // solver's tolerance.
  cfg.l_floor = 1e-3;
  cfg.sample_stride = 4;
  return cfg;
}

namespace {

SeedParams make_params(const ProblemSpec& spec, const std::vector<double>& fbar,
                       double C) {
  SeedParams p;
  p.fbar = fbar;
  p.C = C;
  (void)spec;
  return p;
}

AsymptoticReport evaluate(const ProblemSpec& spec,
                          const std::vector<double>& fbar, double C,
                          const RunConfig& config) {
  const TrajectoryRecord rec =
      run_trajectory(spec, make_params(spec, fbar, C), config);
  return extract_sigma(rec);
}

}  // namespace

BracketPoint sigma1_of_C(const ProblemSpec& spec,
                         const std::vector<double>& fbar, double C,
                         const RunConfig& config) {
  const AsymptoticReport rep = evaluate(spec, fbar, C, config);
  BracketPoint pt;
  pt.C = C;
  pt.sigma1 = rep.sigma[0];
  pt.uncertainty = rep.sigma_uncertainty[0];
  pt.low_confidence = rep.low_confidence;
  return pt;
}

ShootResult solve_for_sigma1(const ProblemSpec& spec,
                             const std::vector<double>& fbar, double target,
                             double tol, const RunConfig& config) {
  if (!(target > 0.0))
    throw std::invalid_argument("solve_for_sigma1: target must be positive");
  ShootResult res;
  res.rescale_factors.assign(std::max(0, spec.r() - 1), 1.0);

  AsymptoticReport best_rep;
  BracketPoint best;
  double best_err = 1e300;
  auto eval = [&](double theta) -> BracketPoint {
    const double C = -spec.eps * std::exp(theta);
    const AsymptoticReport rep = evaluate(spec, fbar, C, config);
    BracketPoint pt;
    pt.C = C;
    pt.sigma1 = rep.sigma[0];
    pt.uncertainty = rep.sigma_uncertainty[0];
    pt.low_confidence = rep.low_confidence;
    res.bracket.push_back(pt);
    ++res.iterations;
    if (std::abs(pt.sigma1 - target) < best_err) {
      best_err = std::abs(pt.sigma1 - target);
      best_rep = rep;
      best = pt;
    }
    return pt;
  };

  const double theta_min = std::log(1e-8), theta_max = std::log(1e8);

  // Bracket expansion: start at C = -eps*n and widen by factor 4 in |C|
  // toward the side the target lies on.
  double theta_a = std::log(static_cast<double>(spec.n()));
  BracketPoint pa = eval(theta_a);
  double theta_b = theta_a;
  BracketPoint pb = pa;
  const double step = std::log(4.0);
  const bool go_up = pa.sigma1 < target;  // sigma_1 grows with |C|
  while ((pa.sigma1 - target) * (pb.sigma1 - target) > 0.0) {
    const double next = go_up ? theta_b + step : theta_a - step;
    if (next < theta_min || next > theta_max) {
      res.status = ShootStatus::BracketFailure;
      res.message = "bracket expansion exhausted the admissible C range";
      return res;
    }
    if (go_up) {
      theta_a = theta_b;
      pa = pb;
      theta_b = next;
      pb = eval(theta_b);
    } else {
      theta_b = theta_a;
      pb = pa;
      theta_a = next;
      pa = eval(theta_a);
    }
  }

  // Bisection in theta until sigma_1 is within the relative tolerance.
  while (std::abs(best.sigma1 - target) > tol * target) {
    if (res.iterations >= 60) {
      res.status = ShootStatus::ToleranceNotMet;
      res.message = "evaluation budget exhausted before reaching tolerance";
      res.params = make_params(spec, fbar, best.C);
      return res;
    }
    if ((pa.sigma1 - target) * (pb.sigma1 - target) > 0.0) {
      res.straddle_violated = true;
      res.status = ShootStatus::ToleranceNotMet;
      res.message = "bracket endpoints stopped straddling the target";
      res.params = make_params(spec, fbar, best.C);
      return res;
    }
    const double theta_m = (theta_a + theta_b) / 2.0;
    const BracketPoint pm = eval(theta_m);
    if ((pa.sigma1 - target) * (pm.sigma1 - target) <= 0.0) {
      theta_b = theta_m;
      pb = pm;
    } else {
      theta_a = theta_m;
      pa = pm;
    }
  }

  res.status = ShootStatus::Converged;
  res.params = make_params(spec, fbar, best.C);
  res.achieved = best_rep;
  return res;
}

ShootResult rescale_for_ricci_flat(const ProblemSpec& spec,
                                   const ShootResult& base,
                                   const std::vector<double>& target_tail,
                                   const RunConfig& config) {
  const int r = spec.r();
  if (target_tail.size() != static_cast<std::size_t>(r - 1))
    throw std::invalid_argument(
        "rescale_for_ricci_flat: need one target per factor beyond the first");
  for (int i = 1; i < r; ++i)
    if (spec.mu[i] != 0.0)
      throw std::invalid_argument(
          "rescale_for_ricci_flat: factors beyond the first must have mu = 0");

  ShootResult res = base;
  res.rescale_factors.assign(r - 1, 1.0);
  for (int i = 1; i < r; ++i) {
    const double achieved = base.achieved.sigma[i];
    if (!(achieved > 0.0))
      throw std::invalid_argument(
          "rescale_for_ricci_flat: base run has non-positive sigma");
    const double c = target_tail[i - 1] / achieved;
    res.rescale_factors[i - 1] = c;
    res.params.fbar[i - 1] = base.params.fbar[i - 1] / c;
  }
  res.achieved = evaluate(spec, res.params.fbar, res.params.C, config);
  ++res.iterations;
  res.status = ShootStatus::Converged;
  res.message.clear();
  return res;
}

ShootResult realize_cone(const ProblemSpec& spec, const ConeSpec& cone,
                         double tol, const RunConfig& config) {
  const int r = spec.r();
  if (cone.sigma.size() != static_cast<std::size_t>(r))
    throw std::invalid_argument("realize_cone: sigma size must match factors");
  for (double s : cone.sigma)
    if (!(s > 0.0))
      throw std::invalid_argument(
          "realize_cone: all sigma must be positive (sigma = 0 would require "
          "an Einstein trajectory, which has no cone in this sense)");
  for (int i = 1; i < r; ++i)
    if (spec.mu[i] != 0.0)
      throw std::invalid_argument(
          "realize_cone: factors beyond the first must have mu = 0");

  std::vector<double> fbar(r - 1, 1.0);
  ShootResult res = solve_for_sigma1(spec, fbar, cone.sigma[0], tol, config);
  if (res.status != ShootStatus::Converged) return res;
  if (r > 1) {
    const std::vector<double> tail(cone.sigma.begin() + 1, cone.sigma.end());
    res = rescale_for_ricci_flat(spec, res, tail, config);
  }
  // Final verification: all sigma within tolerance of the request.
  for (int i = 0; i < r; ++i) {
    if (std::abs(res.achieved.sigma[i] - cone.sigma[i]) >
        tol * cone.sigma[i]) {
      res.status = ShootStatus::ToleranceNotMet;
      res.message = "verification run missed the requested sigma";
    }
  }
  return res;
}

std::vector<SweepRow> sweep(const ProblemSpec& spec,
                            const std::vector<double>& fbar,
                            const std::vector<double>& c_values, int workers,
                            const RunConfig& config) {
  std::vector<SweepRow> rows(c_values.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= c_values.size()) return;
      SweepRow& row = rows[k];
      row.C = c_values[k];
      try {
        const TrajectoryRecord rec = run_trajectory(
            spec, make_params(spec, fbar, c_values[k]), config);
        const AsymptoticReport rep = extract_sigma(rec);
        row.sigma = rep.sigma;
        row.sigma_uncertainty = rep.sigma_uncertainty;
        row.scal_limit = rep.scal_limit;
        row.cone_scal_coeff = rep.cone_scal_coeff;
        row.flags = rec.flags;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(workers, c_values.size()));
  if (nthreads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return rows;
}

}  // namespace expsol
