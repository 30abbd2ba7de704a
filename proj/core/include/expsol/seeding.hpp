#pragma once

#include <vector>

#include "expsol/model.hpp"
#include "expsol/problem.hpp"

namespace expsol {

// A state slightly off the singular orbit t = 0, produced by Taylor expansion:
//   f_1(t)  = t + a3 t^3,        a3 = [eps/2 - (sum_{i>=2} d_i Fbar_i - C)/(d_1+1)] / (6 d_1)
//   f_i(t)  = fbar_i (1 + Fbar_i t^2 / (2(d_1+1))),   Fbar_i = mu_i/fbar_i^2 + eps/2
//   u(t)    = C t^2 / (2(d_1+1))
// with matching first derivatives. a3 comes from matching the O(1) terms of
// the f_1 shape-operator equation.
struct SeedResult {
  double t0 = 0.0;
  std::vector<double> tstate;  // TLayout flat vector at t0
  std::vector<double> sstate;  // SLayout flat vector at t0
  int order = 3;               // Taylor order of the f_1 series
  double est_error = 0.0;      // size of the first omitted correction

  // Mismatch between the series' constant second derivative of u and the
  // conservation law evaluated at the seeded state; O(t0^2).
  double conservation_residual = 0.0;
};

// Default seed time: 1e-3 * min(1, fbar_2..r, 1/sqrt(eps)).
double default_t0(const ProblemSpec& spec, const SeedParams& params);

// Throws std::domain_error when some Fbar_i <= 0 (outside the modeled
// regime) and std::invalid_argument when t0 is too large for the truncation
// target (the message suggests default_t0).
SeedResult taylor_seed(const ProblemSpec& spec, const SeedParams& params, double t0);

}  // namespace expsol
