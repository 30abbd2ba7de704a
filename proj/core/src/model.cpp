#include "expsol/model.hpp"

#include <cmath>
#include <stdexcept>

namespace expsol {

namespace {

void check_finite(std::span<const double> y) {
  for (double c : y)
    if (!std::isfinite(c))
      throw std::invalid_argument("state contains a non-finite component");
}

}  // namespace

void rhs_s(const ProblemSpec& spec, std::span<const double> y, std::span<double> dy) {
  check_finite(y);
  const int r = spec.r();
  const SLayout ix(r);
  const double e = spec.eps / 2.0;
  const double L = y[ix.L()];
  const double eL2 = e * L * L;

  double sum_dX2 = 0.0, sum_dX = 0.0;
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    sum_dX2 += spec.d[i] * X * X;
    sum_dX += spec.d[i] * X;
  }
  const double Q = sum_dX2 - eL2;
  const double S2 = sum_dX - 1.0;

  dy[ix.L()] = L * Q;
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    const double Y = y[ix.Y(i)];
    dy[ix.X(i)] = X * (Q - 1.0) + spec.mu[i] * Y * Y + eL2;
    dy[ix.Y(i)] = Y * (Q - X);
  }
  dy[ix.t()] = L;
  dy[ix.u()] = S2;
  // w = (C + eps u) + 1/L^2 stays O(1) while its two halves diverge, so the
  // conservation monitor |s1p1/L^2 - w| never loses digits to cancellation.
  // w' = eps sum dX - 2 sum dX^2 / L^2; undefined (and unused) at L = 0.
  dy[ix.v()] = (L > 0.0) ? spec.eps * sum_dX - 2.0 * sum_dX2 / (L * L) : 0.0;
}

void rhs_s_jacobian(const ProblemSpec& spec, std::span<const double> y,
                    std::span<double> jac) {
  check_finite(y);
  const int r = spec.r();
  const SLayout ix(r);
  const std::size_t nd = ix.size();
  const double e = spec.eps / 2.0;
  const double L = y[ix.L()];
  const double eL2 = e * L * L;

  double sum_dX2 = 0.0, sum_dX = 0.0;
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    sum_dX2 += spec.d[i] * X * X;
    sum_dX += spec.d[i] * X;
  }
  const double Q = sum_dX2 - eL2;

  std::fill(jac.begin(), jac.end(), 0.0);
  auto J = [&](std::size_t row, std::size_t col) -> double& {
    return jac[row * nd + col];
  };
  // dQ/dX_j = 2 d_j X_j, dQ/dL = -eps L.
  J(ix.L(), ix.L()) = Q - spec.eps * L * L;
  for (int j = 0; j < r; ++j)
    J(ix.L(), ix.X(j)) = L * 2.0 * spec.d[j] * y[ix.X(j)];
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    const double Y = y[ix.Y(i)];
    for (int j = 0; j < r; ++j) {
      const double dQj = 2.0 * spec.d[j] * y[ix.X(j)];
      J(ix.X(i), ix.X(j)) = X * dQj;
      J(ix.Y(i), ix.X(j)) = Y * dQj;
    }
    J(ix.X(i), ix.X(i)) += Q - 1.0;
    J(ix.X(i), ix.Y(i)) = 2.0 * spec.mu[i] * Y;
    J(ix.X(i), ix.L()) = -spec.eps * L * X + spec.eps * L;
    J(ix.Y(i), ix.X(i)) += -Y;
    J(ix.Y(i), ix.Y(i)) = Q - X;
    J(ix.Y(i), ix.L()) = -spec.eps * L * Y;
  }
  J(ix.t(), ix.L()) = 1.0;
  for (int j = 0; j < r; ++j) J(ix.u(), ix.X(j)) = spec.d[j];
  if (L > 0.0) {
    J(ix.v(), ix.L()) = 4.0 * sum_dX2 / (L * L * L);
    for (int j = 0; j < r; ++j)
      J(ix.v(), ix.X(j)) =
          spec.eps * spec.d[j] - 4.0 * spec.d[j] * y[ix.X(j)] / (L * L);
  }
}

Diagnostics diagnostics(const ProblemSpec& spec, std::span<const double> y) {
  check_finite(y);
  const int r = spec.r();
  const SLayout ix(r);
  const double e = spec.eps / 2.0;
  const double L = y[ix.L()];
  const double eL2 = e * L * L;

  double sum_dX2 = 0.0, sum_dX = 0.0, sum_dmuY2 = 0.0, sum_dXm = 0.0;
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    const double Y = y[ix.Y(i)];
    sum_dX2 += spec.d[i] * X * X;
    sum_dX += spec.d[i] * X;
    sum_dmuY2 += spec.d[i] * spec.mu[i] * Y * Y;
    sum_dXm += spec.d[i] * (X - eL2);
  }
  const int n = spec.n();

  Diagnostics out;
  // s1 + 1 is a sum of nonnegative terms; keep it cancellation-free for the
  // conservation residual below.
  const double s1p1 = sum_dX2 + sum_dmuY2 + (n - 1) * eL2;
  out.s1 = s1p1 - 1.0;
  out.s2 = sum_dX - 1.0;
  // Algebraically equal to -(s1 + s2^2 + (n+1) e L^2) but with every term
  // O(L^4) in the tail, so late-time positivity is decidable in doubles.
  out.rcal = 2.0 * sum_dXm - sum_dX2 - sum_dX * sum_dX - sum_dmuY2;
  const double X1 = y[ix.X(0)];
  if (X1 > 0.0)
    out.z = ((spec.d[0] - 1) * y[ix.Y(0)] * y[ix.Y(0)] + eL2) / X1;
  // Renormalized conservation residual |S1 - (C + eps u) L^2| / L^2, written
  // as |s1p1/L^2 - w| with w the carried O(1) variable; both sides are
  // evaluated without forming any near-cancelling difference.
  if (L > 0.0) {
    const double s1p1_over_l2 =
        sum_dX2 / (L * L) + sum_dmuY2 / (L * L) + (n - 1) * e;
    out.conservation_residual = std::abs(s1p1_over_l2 - y[ix.v()]);
  }

  bool dom = true;
  for (int i = 1; i < r; ++i) dom = dom && (X1 > y[ix.X(i)]);
  out.ineq_x1_dominates = dom;
  out.ineq_x1_above_q = X1 > sum_dX2;
  out.ineq_x1_above_l2 = X1 > eL2;
  return out;
}

std::vector<double> derivative_identities_check(const ProblemSpec& spec,
                                                std::span<const double> y) {
  const int r = spec.r();
  const SLayout ix(r);
  const double e = spec.eps / 2.0;
  const double L = y[ix.L()];
  const double eL2 = e * L * L;

  std::vector<double> dy(ix.size());
  rhs_s(spec, y, dy);

  double sum_dX2 = 0.0, sum_dX = 0.0, sum_dmuY2 = 0.0;
  double dS1 = 0.0, dS2 = 0.0;
  for (int i = 0; i < r; ++i) {
    const double X = y[ix.X(i)];
    const double Y = y[ix.Y(i)];
    sum_dX2 += spec.d[i] * X * X;
    sum_dX += spec.d[i] * X;
    sum_dmuY2 += spec.d[i] * spec.mu[i] * Y * Y;
    dS1 += 2.0 * spec.d[i] * (X * dy[ix.X(i)] + spec.mu[i] * Y * dy[ix.Y(i)]);
    dS2 += spec.d[i] * dy[ix.X(i)];
  }
  const int n = spec.n();
  dS1 += (n - 1) * spec.eps * L * dy[ix.L()];
  const double Q = sum_dX2 - eL2;
  const double S1 = sum_dX2 + sum_dmuY2 + (n - 1) * eL2 - 1.0;
  const double S2 = sum_dX - 1.0;

  std::vector<double> res;
  res.push_back(std::abs(dS1 - 2.0 * (Q * S1 + eL2 * S2)));
  res.push_back(std::abs(dS2 - (S1 + (Q - 1.0) * S2)));
  const double dRcal = -(dS1 + 2.0 * S2 * dS2 + (n + 1) * spec.eps * L * dy[ix.L()]);
  const double Rcal = -(S1 + S2 * S2 + (n + 1) * eL2);
  res.push_back(std::abs(dRcal - 2.0 * (Q * Rcal + (S2 - S1 - eL2) * S2)));
  if (L != 0.0) {
    for (int i = 0; i < r; ++i) {
      const double YoL = y[ix.Y(i)] / L;
      const double dYoL = (dy[ix.Y(i)] * L - y[ix.Y(i)] * dy[ix.L()]) / (L * L);
      res.push_back(std::abs(dYoL + YoL * y[ix.X(i)]));
    }
  }
  return res;
}

void rhs_t(const ProblemSpec& spec, double C, std::span<const double> w,
           std::span<double> dw) {
  check_finite(w);
  const int r = spec.r();
  const TLayout ix(r);
  for (int i = 0; i < r; ++i)
    if (!(w[ix.f(i)] > 0.0))
      throw std::domain_error("rhs_t: warping functions must be positive");

  const double udot = w[ix.udot()];
  double trL = 0.0;
  for (int i = 0; i < r; ++i) trL += spec.d[i] * w[ix.fdot(i)] / w[ix.f(i)];
  const double W = -udot + trL;

  for (int i = 0; i < r; ++i) {
    const double f = w[ix.f(i)];
    const double g = w[ix.fdot(i)] / f;  // shape-operator entry fdot/f
    dw[ix.f(i)] = w[ix.fdot(i)];
    dw[ix.fdot(i)] = f * (g * g - W * g + spec.mu[i] / (f * f) + spec.eps / 2.0);
  }
  dw[ix.u()] = udot;
  dw[ix.udot()] = C + spec.eps * w[ix.u()] - W * udot;
}

std::vector<double> t_to_s(const ProblemSpec& spec, double C, double t,
                           std::span<const double> w) {
  const int r = spec.r();
  const TLayout tx(r);
  const SLayout sx(r);
  double trL = 0.0;
  for (int i = 0; i < r; ++i) trL += spec.d[i] * w[tx.fdot(i)] / w[tx.f(i)];
  const double denom = -w[tx.udot()] + trL;
  if (!(denom > 0.0))
    throw std::domain_error("t_to_s: -udot + tr L must be positive");
  const double L = 1.0 / denom;

  std::vector<double> y(sx.size());
  y[sx.L()] = L;
  for (int i = 0; i < r; ++i) {
    y[sx.X(i)] = L * w[tx.fdot(i)] / w[tx.f(i)];
    y[sx.Y(i)] = L / w[tx.f(i)];
  }
  y[sx.t()] = t;
  y[sx.u()] = w[tx.u()];
  y[sx.v()] = C + spec.eps * w[tx.u()] + 1.0 / (L * L);
  return y;
}

double scalar_curvature_t(const ProblemSpec& spec, std::span<const double> w) {
  const int r = spec.r();
  const TLayout ix(r);
  double trL = 0.0, trL2 = 0.0, trr = 0.0;
  for (int i = 0; i < r; ++i) {
    const double g = w[ix.fdot(i)] / w[ix.f(i)];
    trL += spec.d[i] * g;
    trL2 += spec.d[i] * g * g;
    trr += spec.d[i] * spec.mu[i] / (w[ix.f(i)] * w[ix.f(i)]);
  }
  return -trr - trL2 + trL * trL -
         2.0 * (w[ix.udot()] * trL + spec.n() * spec.eps / 2.0);
}

}  // namespace expsol
