#include "expsol/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace expsol {

double default_t0(const ProblemSpec& spec, const SeedParams& params) {
  double m = std::min(1.0, 1.0 / std::sqrt(spec.eps));
  for (double fb : params.fbar) m = std::min(m, fb);
  return 1e-3 * m;
}

SeedResult taylor_seed(const ProblemSpec& spec, const SeedParams& params, double t0) {
  spec.validate();
  params.validate(spec);
  const int r = spec.r();
  const int d1 = spec.d[0];
  const double e = spec.eps / 2.0;
  const double C = params.C;

  std::vector<double> Fbar(r - 1);
  double sum_dF = 0.0;
  for (int i = 0; i < r - 1; ++i) {
    const double fb = params.fbar[i];
    Fbar[i] = spec.mu[i + 1] / (fb * fb) + e;
    if (!(Fbar[i] > 0.0)) {
      std::ostringstream os;
      os << "taylor_seed: factor " << i + 2 << " has mu/fbar^2 + eps/2 = "
         << Fbar[i] << " <= 0";
      throw std::domain_error(os.str());
    }
    sum_dF += spec.d[i + 1] * Fbar[i];
  }

  const double t0_max = 100.0 * default_t0(spec, params);
  if (!(t0 > 0.0) || t0 > t0_max) {
    std::ostringstream os;
    os << "taylor_seed: t0 = " << t0 << " outside (0, " << t0_max
       << "]; suggested t0 = " << default_t0(spec, params);
    throw std::invalid_argument(os.str());
  }

  const double a3 = (e - (sum_dF - C) / (d1 + 1)) / (6.0 * d1);

  SeedResult out;
  out.t0 = t0;
  out.order = 3;

  const TLayout tx(r);
  std::vector<double> w(tx.size());
  w[tx.f(0)] = t0 + a3 * t0 * t0 * t0;
  w[tx.fdot(0)] = 1.0 + 3.0 * a3 * t0 * t0;
  for (int i = 1; i < r; ++i) {
    const double fb = params.fbar[i - 1];
    const double F = Fbar[i - 1];
    w[tx.f(i)] = fb * (1.0 + F * t0 * t0 / (2.0 * (d1 + 1)));
    w[tx.fdot(i)] = fb * F * t0 / (d1 + 1);
  }
  w[tx.u()] = C * t0 * t0 / (2.0 * (d1 + 1));
  w[tx.udot()] = C * t0 / (d1 + 1);
  out.tstate = w;
  out.sstate = t_to_s(spec, C, t0, w);

  out.est_error = t0 * t0 * (std::abs(C) + spec.eps + sum_dF) / (d1 + 1);

  // The series carry u with a constant second derivative C/(d_1+1); compare
  // it against the conservation law at the seeded state.
  std::vector<double> dw(tx.size());
  rhs_t(spec, C, w, dw);
  out.conservation_residual = std::abs(dw[tx.udot()] - C / (d1 + 1));
  return out;
}

}  // namespace expsol
