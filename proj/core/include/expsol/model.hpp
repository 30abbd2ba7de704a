#pragma once

#include <optional>
#include <span>
#include <vector>

#include "expsol/problem.hpp"

namespace expsol {

// Flat s-state layout, length 2r+4:
//   [ L, X_1..X_r, Y_1..Y_r, t, u, v ]
// L, X, Y are the desingularized variables; t and u are carried passively
// (t' = L, u' = S2). The last slot carries w = (C + eps*u) + 1/L^2, which
// stays O(1) all the way to the L-floor even though its two halves diverge;
// it satisfies w' = eps*sum(d X) - 2*sum(d X^2)/L^2 and makes the
// conservation residual |S1/L^2 - (C + eps u)| = |s1p1/L^2 - w| computable
// without cancellation. The accessor keeps the historical name v().
struct SLayout {
  int r;
  explicit SLayout(int r_) : r(r_) {}
  int size() const { return 2 * r + 4; }
  int L() const { return 0; }
  int X(int i) const { return 1 + i; }          // i in [0, r)
  int Y(int i) const { return 1 + r + i; }
  int t() const { return 2 * r + 1; }
  int u() const { return 2 * r + 2; }
  int v() const { return 2 * r + 3; }
};

// Derived scalars along the flow.
struct Diagnostics {
  double s1 = 0.0;                      // sum d X^2 + sum d mu Y^2 + (n-1)(eps/2)L^2 - 1
  double s2 = 0.0;                      // sum d X - 1
  double rcal = 0.0;                    // renormalized scalar curvature R * L^2
  std::optional<double> z;              // (1/X1)((d1-1)Y1^2 + (eps/2)L^2), defined for X1 > 0
  double conservation_residual = 0.0;   // |S1 - (C + eps u) L^2| / L^2, via w
  bool ineq_x1_dominates = false;       // X1 > X_i for all i >= 2
  bool ineq_x1_above_q = false;         // X1 > sum d X^2
  bool ineq_x1_above_l2 = false;        // X1 > (eps/2) L^2
};

// d/ds of the flat s-state. Throws std::invalid_argument on non-finite input.
void rhs_s(const ProblemSpec& spec, std::span<const double> y, std::span<double> dy);

// Row-major (2r+4)^2 Jacobian of rhs_s; used by the semi-implicit integrator.
void rhs_s_jacobian(const ProblemSpec& spec, std::span<const double> y,
                    std::span<double> jac);

Diagnostics diagnostics(const ProblemSpec& spec, std::span<const double> y);

// Residuals of the closed-form derivative identities for S1, S2, Rcal and
// Y_i/L, evaluated by chain rule against rhs_s at an arbitrary state. All
// must vanish to roundoff; they are algebraic identities, not on-trajectory
// facts. The Y_i/L residuals are skipped when L = 0.
std::vector<double> derivative_identities_check(const ProblemSpec& spec,
                                                std::span<const double> y);

// ----- t-coordinate system (used for seeding and as an independent oracle) --

// Flat t-state layout, length 2r+2: [ f_1..f_r, fdot_1..fdot_r, u, udot ].
struct TLayout {
  int r;
  explicit TLayout(int r_) : r(r_) {}
  int size() const { return 2 * r + 2; }
  int f(int i) const { return i; }
  int fdot(int i) const { return r + i; }
  int u() const { return 2 * r; }
  int udot() const { return 2 * r + 1; }
};

// d/dt of the t-state: fddot_i from the shape-operator equation, uddot from
// the conservation law uddot = C + eps*u - (-udot + tr L) udot.
// Throws std::domain_error when some f_i <= 0.
void rhs_t(const ProblemSpec& spec, double C, std::span<const double> w,
           std::span<double> dw);

// Conversion to the s-state: L = 1/(-udot + tr L), X_i = L fdot_i/f_i,
// Y_i = L/f_i; t and u copied, v initialized from (C + eps u) L^2 + 1.
// Throws std::domain_error when the denominator is nonpositive.
std::vector<double> t_to_s(const ProblemSpec& spec, double C, double t,
                           std::span<const double> w);

// Ambient scalar curvature evaluated directly from a t-state:
//   R = -tr r_t - tr L^2 + (tr L)^2 - 2 (udot tr L + n eps/2)
// with tr r_t = sum d_i mu_i / f_i^2. Independent of the s-side formulas;
// used as a cross-check oracle.
double scalar_curvature_t(const ProblemSpec& spec, std::span<const double> w);

}  // namespace expsol
