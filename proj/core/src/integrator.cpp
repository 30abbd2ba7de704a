#include "expsol/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace expsol {

namespace {

// Dormand–Prince 5(4) coefficients.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187,
                 A53 = 64448.0 / 6561, A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192,
                 B5 = -2187.0 / 6784, B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;

struct Recorder {
  Integration& out;
  int stride;
  long count = 0;

  void record(double s, std::span<const double> y, bool force = false) {
    if (force || count % stride == 0) {
      if (!(!out.samples_s.empty() && out.samples_s.back() == s)) {
        out.samples_s.push_back(s);
        out.samples_y.insert(out.samples_y.end(), y.begin(), y.end());
      }
    }
    ++count;
  }
};

bool all_finite(std::span<const double> y) {
  for (double c : y)
    if (!std::isfinite(c)) return false;
  return true;
}

double max_abs(std::span<const double> y) {
  double m = 0.0;
  for (double c : y) m = std::max(m, std::abs(c));
  return m;
}

struct EventTracker {
  const std::vector<EventSpec>& events;
  std::vector<double> g_prev;

  EventTracker(const std::vector<EventSpec>& ev, double s0, std::span<const double> y0)
      : events(ev) {
    g_prev.reserve(ev.size());
    for (const auto& e : ev) g_prev.push_back(e.g(s0, y0));
  }

  // Returns the index of the first terminal event firing at (s, y), or -1.
  int update(double s, std::span<const double> y) {
    int fired = -1;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const double g = events[i].g(s, y);
      if (g_prev[i] > 0.0 && g <= 0.0 && events[i].terminal && fired < 0)
        fired = static_cast<int>(i);
      g_prev[i] = g;
    }
    return fired;
  }
};

struct Dp5Workspace {
  std::vector<double> k2, k3, k4, k5, k6, tmp;
  explicit Dp5Workspace(std::size_t nd)
      : k2(nd), k3(nd), k4(nd), k5(nd), k6(nd), tmp(nd) {}
};

// One embedded 5(4) step of size h from (s, y) with k1 = f(s, y) given.
// Writes the 5th-order solution into ynew and f(s+h, ynew) into k7
// (first-same-as-last). Returns the scaled error norm.
double dp5_step(const Rhs& rhs, double s, std::span<const double> y, double h,
                std::span<const double> k1, const IntegratorConfig& cfg,
                Dp5Workspace& ws, std::span<double> ynew, std::span<double> k7) {
  const std::size_t nd = y.size();
  auto& k2 = ws.k2;
  auto& k3 = ws.k3;
  auto& k4 = ws.k4;
  auto& k5 = ws.k5;
  auto& k6 = ws.k6;
  auto& tmp = ws.tmp;

  for (std::size_t i = 0; i < nd; ++i) tmp[i] = y[i] + h * A21 * k1[i];
  rhs(s + h / 5.0, tmp, k2);
  for (std::size_t i = 0; i < nd; ++i)
    tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
  rhs(s + 3.0 * h / 10.0, tmp, k3);
  for (std::size_t i = 0; i < nd; ++i)
    tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
  rhs(s + 4.0 * h / 5.0, tmp, k4);
  for (std::size_t i = 0; i < nd; ++i)
    tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
  rhs(s + 8.0 * h / 9.0, tmp, k5);
  for (std::size_t i = 0; i < nd; ++i)
    tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] +
                         A65 * k5[i]);
  rhs(s + h, tmp, k6);
  for (std::size_t i = 0; i < nd; ++i)
    ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] +
                          B6 * k6[i]);
  rhs(s + h, ynew, k7);

  double err = 0.0;
  for (std::size_t i = 0; i < nd; ++i) {
    const double e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] +
                          E6 * k6[i] + E7 * k7[i]);
    const double sc =
        cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
    err += (e / sc) * (e / sc);
  }
  return std::sqrt(err / static_cast<double>(nd));
}

Integration run_dp5(const Rhs& rhs, std::span<const double> y0, double s0,
                    double s_end, const IntegratorConfig& cfg,
                    const std::vector<EventSpec>& events, const StepHook* hook,
                    const std::vector<double>* grid) {
  const std::size_t nd = y0.size();
  Integration out;
  out.dim = static_cast<int>(nd);
  Recorder rec{out, cfg.sample_stride};

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> ynew(nd), k1(nd), k7(nd);
  Dp5Workspace ws(nd);

  double s = s0;
  double h = cfg.initial_h;
  double errold = 1e-4;
  rec.record(s, y, true);
  rhs(s, y, k1);
  out.rhs_evals = 1;
  EventTracker tracker(events, s, y);

  std::size_t gi = 0;
  if (grid) {
    while (gi < grid->size() && (*grid)[gi] <= s0) ++gi;
  }

  auto finish = [&](IntegrationStatus st, double sf, std::span<const double> yf) {
    out.status = st;
    out.s_final = sf;
    out.y_final.assign(yf.begin(), yf.end());
    rec.record(sf, yf, true);
    return out;
  };

  for (long step = 0; step < cfg.max_steps; ++step) {
    if (s >= s_end) return finish(IntegrationStatus::ReachedHorizon, s, y);
    h = std::min({h, cfg.max_step, s_end - s});
    bool grid_hit = false;
    if (grid && gi < grid->size() && s + h >= (*grid)[gi] - 1e-14) {
      h = (*grid)[gi] - s;
      grid_hit = true;
    }
    if (h < cfg.min_step) return finish(IntegrationStatus::Stall, s, y);

    const double err = dp5_step(rhs, s, y, h, k1, cfg, ws, ynew, k7);
    out.rhs_evals += 6;
    if (!all_finite(ynew)) return finish(IntegrationStatus::Blowup, s, y);
    if (!(err <= 1.0)) {
      ++out.steps_rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      continue;
    }

    double s_acc = s + h;
    if (hook) (*hook)(s_acc, ynew);
    ++out.steps_accepted;

    const int fired = tracker.update(s_acc, ynew);
    if (fired >= 0) {
      if (events[fired].localize) {
        // Bisect the step size so the terminal state sits on g = 0. Each
        // trial re-steps from the retained pre-step state (y, k1).
        const auto& g = events[fired].g;
        double lo = 0.0, hi = h;
        std::vector<double> ytry(nd), ktry(nd);
        for (int it = 0; it < 80 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
          const double mid = 0.5 * (lo + hi);
          dp5_step(rhs, s, y, mid, k1, cfg, ws, ytry, ktry);
          out.rhs_evals += 6;
          if (hook) (*hook)(s + mid, ytry);
          if (g(s + mid, ytry) <= 0.0)
            hi = mid;
          else
            lo = mid;
        }
        dp5_step(rhs, s, y, hi, k1, cfg, ws, ynew, k7);
        out.rhs_evals += 6;
        if (hook) (*hook)(s + hi, ynew);
        s_acc = s + hi;
      }
      out.event_name = events[fired].name;
      return finish(IntegrationStatus::EventHit, s_acc, ynew);
    }

    std::copy(ynew.begin(), ynew.end(), y.begin());
    if (hook) {
      // The hook may have moved the state off the step's end point, so the
      // first-same-as-last derivative must be refreshed.
      rhs(s_acc, y, k1);
      ++out.rhs_evals;
    } else {
      std::copy(k7.begin(), k7.end(), k1.begin());
    }
    s = s_acc;

    if (max_abs(y) > cfg.blowup_norm)
      return finish(IntegrationStatus::Blowup, s, y);

    rec.record(s, y);
    if (grid_hit) {
      out.grid_s.push_back(s);
      out.grid_y.insert(out.grid_y.end(), y.begin(), y.end());
      ++gi;
    }
    const double fac = std::clamp(
        0.9 * std::pow(err, -0.7 / 5.0) * std::pow(errold, 0.4 / 5.0), 0.2, 5.0);
    h *= fac;
    errold = std::max(err, 1e-4);
  }
  return finish(IntegrationStatus::MaxSteps, s, y);
}

Integration run_rk4(const Rhs& rhs, std::span<const double> y0, double s0,
                    double s_end, const IntegratorConfig& cfg,
                    const std::vector<EventSpec>& events, const StepHook* hook) {
  const std::size_t nd = y0.size();
  Integration out;
  out.dim = static_cast<int>(nd);
  Recorder rec{out, cfg.sample_stride};

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> k1(nd), k2(nd), k3(nd), k4(nd), tmp(nd);
  double s = s0;
  rec.record(s, y, true);
  EventTracker tracker(events, s, y);

  auto finish = [&](IntegrationStatus st) {
    out.status = st;
    out.s_final = s;
    out.y_final = y;
    rec.record(s, y, true);
    return out;
  };

  const double h = cfg.fixed_h;
  for (long step = 0; step < cfg.max_steps; ++step) {
    if (s >= s_end - h / 2.0) return finish(IntegrationStatus::ReachedHorizon);
    rhs(s, y, k1);
    for (std::size_t i = 0; i < nd; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    rhs(s + h / 2.0, tmp, k2);
    for (std::size_t i = 0; i < nd; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    rhs(s + h / 2.0, tmp, k3);
    for (std::size_t i = 0; i < nd; ++i) tmp[i] = y[i] + h * k3[i];
    rhs(s + h, tmp, k4);
    for (std::size_t i = 0; i < nd; ++i)
      y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    out.rhs_evals += 4;
    s += h;
    ++out.steps_accepted;
    if (!all_finite(y) || max_abs(y) > cfg.blowup_norm)
      return finish(IntegrationStatus::Blowup);
    if (hook) (*hook)(s, y);

    const int fired = tracker.update(s, y);
    if (fired >= 0) {
      out.event_name = events[fired].name;
      return finish(IntegrationStatus::EventHit);
    }
    rec.record(s, y);
  }
  return finish(IntegrationStatus::MaxSteps);
}

// T_m, T'_m, T''_m at w0 by the Chebyshev three-term recurrences.
void cheb(int m, double w0, double& t, double& td, double& tdd) {
  double t0 = 1.0, t1 = w0;
  double u0 = 0.0, u1 = 1.0;
  double v0 = 0.0, v1 = 0.0;
  for (int j = 2; j <= m; ++j) {
    const double t2 = 2.0 * w0 * t1 - t0;
    const double u2 = 2.0 * w0 * u1 - u0 + 2.0 * t1;
    const double v2 = 2.0 * w0 * v1 - v0 + 4.0 * u1;
    t0 = t1; t1 = t2;
    u0 = u1; u1 = u2;
    v0 = v1; v1 = v2;
  }
  t = t1;
  td = u1;
  tdd = v1;
}

// Second-order Runge–Kutta–Chebyshev: explicit, with stage count m chosen so
// the stability interval 0.653 m^2 covers h * stab_rho. Used for the slaved
// late-time tail where the embedded 5(4) pair is stability-limited.
Integration run_rkc2(const Rhs& rhs, std::span<const double> y0, double s0,
                     double s_end, const IntegratorConfig& cfg,
                     const std::vector<EventSpec>& events, const StepHook* hook) {
  const std::size_t nd = y0.size();
  Integration out;
  out.dim = static_cast<int>(nd);
  Recorder rec{out, cfg.sample_stride};

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> f0(nd), fj(nd), yjm1(nd), yjm2(nd), yj(nd);
  double s = s0;
  double h = 1.0;
  rec.record(s, y, true);
  EventTracker tracker(events, s, y);

  auto finish = [&](IntegrationStatus st) {
    out.status = st;
    out.s_final = s;
    out.y_final = y;
    rec.record(s, y, true);
    return out;
  };

  for (long step = 0; step < cfg.max_steps; ++step) {
    if (s >= s_end) return finish(IntegrationStatus::ReachedHorizon);
    h = std::min({h, cfg.max_step, s_end - s});
    if (h < cfg.min_step) return finish(IntegrationStatus::Stall);

    int m = 1 + static_cast<int>(std::sqrt(h * cfg.stab_rho / 0.653));
    if (m < 2) m = 2;
    if (m > cfg.stab_m_max) {
      m = cfg.stab_m_max;
      h = 0.653 * m * m / cfg.stab_rho;
    }
    const double w0 = 1.0 + 2.0 / (13.0 * m * m);
    double tm, tmd, tmdd;
    cheb(m, w0, tm, tmd, tmdd);
    const double w1 = tmd / tmdd;

    rhs(s, y, f0);
    ++out.rhs_evals;

    // Chebyshev values T_j(w0) and derivatives, advanced alongside the stages.
    double t1 = w0, u1 = 1.0, v1 = 0.0;
    double t2 = 2.0 * w0 * t1 - 1.0;
    double u2 = 2.0 * w0 * u1 + 2.0 * t1;
    double v2 = 2.0 * w0 * v1 + 4.0 * u1;
    const double b2 = v2 / (u2 * u2);
    const double b1 = b2;  // b0 = b1 = b2
    const double mu1t = b1 * w1;
    for (std::size_t i = 0; i < nd; ++i) {
      yjm2[i] = y[i];
      yjm1[i] = y[i] + h * mu1t * f0[i];
    }
    double bj_m1 = b1, bj_m2 = b2, bj = b2;
    double tjm1 = t1, tj = t2;
    double ujm1 = u1, uj = u2;
    double vjm1 = v1, vj = v2;

    for (int j = 2; j <= m; ++j) {
      if (j > 2) {
        const double tn = 2.0 * w0 * tj - tjm1;
        const double un = 2.0 * w0 * uj - ujm1 + 2.0 * tj;
        const double vn = 2.0 * w0 * vj - vjm1 + 4.0 * uj;
        tjm1 = tj; tj = tn;
        ujm1 = uj; uj = un;
        vjm1 = vj; vj = vn;
        bj_m2 = bj_m1;
        bj_m1 = bj;
        bj = vj / (uj * uj);
      }
      const double muj = 2.0 * bj * w0 / bj_m1;
      const double nuj = -bj / bj_m2;
      const double mujt = 2.0 * bj * w1 / bj_m1;
      const double ajm1 = 1.0 - bj_m1 * tjm1;
      const double gjt = -ajm1 * mujt;
      rhs(s, yjm1, fj);
      ++out.rhs_evals;
      for (std::size_t i = 0; i < nd; ++i)
        yj[i] = (1.0 - muj - nuj) * y[i] + muj * yjm1[i] + nuj * yjm2[i] +
                h * mujt * fj[i] + h * gjt * f0[i];
      std::swap(yjm2, yjm1);
      std::swap(yjm1, yj);
    }
    // After the swaps the m-stage result is in yjm1.
    rhs(s, yjm1, fj);
    ++out.rhs_evals;
    double err = 0.0;
    for (std::size_t i = 0; i < nd; ++i) {
      const double e = 0.8 * (y[i] - yjm1[i]) + 0.4 * h * (f0[i] + fj[i]);
      const double sc = cfg.abs_tol +
                        cfg.rel_tol * std::max(std::abs(y[i]), std::abs(yjm1[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / static_cast<double>(nd));
    if (!all_finite(yjm1)) return finish(IntegrationStatus::Blowup);

    if (err <= 1.0) {
      s += h;
      std::copy(yjm1.begin(), yjm1.end(), y.begin());
      ++out.steps_accepted;
      if (hook) (*hook)(s, y);
      const int fired = tracker.update(s, y);
      if (fired >= 0) {
        out.event_name = events[fired].name;
        return finish(IntegrationStatus::EventHit);
      }
      if (max_abs(y) > cfg.blowup_norm) return finish(IntegrationStatus::Blowup);
      rec.record(s, y);
      h *= std::clamp(0.8 * std::pow(err, -0.5), 0.1, 10.0);
    } else {
      ++out.steps_rejected;
      h *= std::max(0.1, 0.8 * std::pow(err, -0.5));
    }
  }
  return finish(IntegrationStatus::MaxSteps);
}

// Dense LU with partial pivoting for the small (dim <= ~2r+4) Rosenbrock
// stage systems. A is row-major and overwritten by the factors.
bool lu_factor(std::vector<double>& A, std::vector<int>& piv, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t p = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::abs(A[row * n + col]) > std::abs(A[p * n + col])) p = row;
    piv[col] = static_cast<int>(p);
    if (A[p * n + col] == 0.0) return false;
    if (p != col)
      for (std::size_t j = 0; j < n; ++j) std::swap(A[p * n + j], A[col * n + j]);
    const double inv = 1.0 / A[col * n + col];
    for (std::size_t row = col + 1; row < n; ++row) {
      const double f = A[row * n + col] * inv;
      A[row * n + col] = f;
      for (std::size_t j = col + 1; j < n; ++j) A[row * n + j] -= f * A[col * n + j];
    }
  }
  return true;
}

void lu_solve(const std::vector<double>& A, const std::vector<int>& piv,
              std::size_t n, std::vector<double>& b) {
  // Forward substitution must go row by row: row i of L is final once step i
  // of the factorization completes, whereas entries below it keep moving with
  // later pivot swaps.
  for (std::size_t row = 0; row < n; ++row) {
    std::swap(b[row], b[static_cast<std::size_t>(piv[row])]);
    double sum = b[row];
    for (std::size_t j = 0; j < row; ++j) sum -= A[row * n + j] * b[j];
    b[row] = sum;
  }
  for (std::size_t row = n; row-- > 0;) {
    for (std::size_t j = row + 1; j < n; ++j) b[row] -= A[row * n + j] * b[j];
    b[row] /= A[row * n + row];
  }
}

void fd_jacobian(const Rhs& rhs, double s, std::span<const double> y,
                 std::span<const double> f0, std::vector<double>& J,
                 std::vector<double>& ypert, std::vector<double>& fpert,
                 long& evals) {
  const std::size_t n = y.size();
  ypert.assign(y.begin(), y.end());
  for (std::size_t j = 0; j < n; ++j) {
    const double delta = 1.4901161193847656e-8 * std::max(std::abs(y[j]), 1e-5);
    const double saved = ypert[j];
    ypert[j] = saved + delta;
    rhs(s, ypert, fpert);
    ++evals;
    ypert[j] = saved;
    const double inv = 1.0 / delta;
    for (std::size_t i = 0; i < n; ++i) J[i * n + j] = (fpert[i] - f0[i]) * inv;
  }
}

// Rosenbrock 4(3) with the Shampine parameter set: 3 rhs evaluations, one
// Jacobian, and one LU factorization per step, with an embedded third-order
// error estimate. L-stable, so the slaved late-time tail is integrated at
// accuracy-limited (not stability-limited) step sizes.
Integration run_ros43(const Rhs& rhs, std::span<const double> y0, double s0,
                      double s_end, const IntegratorConfig& cfg,
                      const std::vector<EventSpec>& events, const StepHook* hook) {
  constexpr double GAM = 0.5;
  constexpr double RA21 = 2.0, RA31 = 48.0 / 25.0, RA32 = 6.0 / 25.0;
  constexpr double C21 = -8.0, C31 = 372.0 / 25.0, C32 = 12.0 / 5.0;
  constexpr double C41 = -112.0 / 125.0, C42 = -54.0 / 125.0, C43 = -2.0 / 5.0;
  constexpr double RB1 = 19.0 / 9.0, RB2 = 0.5, RB3 = 25.0 / 108.0,
                   RB4 = 125.0 / 108.0;
  constexpr double RE1 = 17.0 / 54.0, RE2 = 7.0 / 36.0, RE3 = 0.0,
                   RE4 = 125.0 / 108.0;

  const std::size_t nd = y0.size();
  Integration out;
  out.dim = static_cast<int>(nd);
  Recorder rec{out, cfg.sample_stride};

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> f0(nd), ftmp(nd), ytmp(nd), ynew(nd);
  std::vector<double> g1(nd), g2(nd), g3(nd), g4(nd);
  std::vector<double> J(nd * nd), A(nd * nd), ypert(nd), fpert(nd);
  std::vector<int> piv(nd);

  double s = s0;
  double h = cfg.initial_h;
  bool rejected_last = false;
  rec.record(s, y, true);
  EventTracker tracker(events, s, y);

  auto finish = [&](IntegrationStatus st) {
    out.status = st;
    out.s_final = s;
    out.y_final = y;
    rec.record(s, y, true);
    return out;
  };

  for (long step = 0; step < cfg.max_steps; ++step) {
    if (s >= s_end) return finish(IntegrationStatus::ReachedHorizon);
    h = std::min({h, cfg.max_step, s_end - s});
    if (h < cfg.min_step) return finish(IntegrationStatus::Stall);

    rhs(s, y, f0);
    ++out.rhs_evals;
    if (cfg.jacobian) {
      cfg.jacobian(s, y, J);
    } else {
      fd_jacobian(rhs, s, y, f0, J, ypert, fpert, out.rhs_evals);
    }

    bool accepted = false;
    double err = 0.0;
    for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
      const double a = 1.0 / (GAM * h);
      for (std::size_t i = 0; i < nd * nd; ++i) A[i] = -J[i];
      for (std::size_t i = 0; i < nd; ++i) A[i * nd + i] += a;
      if (!lu_factor(A, piv, nd)) {
        h *= 0.5;
        continue;
      }

      g1 = f0;
      lu_solve(A, piv, nd, g1);
      for (std::size_t i = 0; i < nd; ++i) ytmp[i] = y[i] + RA21 * g1[i];
      rhs(s + h, ytmp, ftmp);
      ++out.rhs_evals;
      for (std::size_t i = 0; i < nd; ++i) g2[i] = ftmp[i] + (C21 / h) * g1[i];
      lu_solve(A, piv, nd, g2);
      for (std::size_t i = 0; i < nd; ++i)
        ytmp[i] = y[i] + RA31 * g1[i] + RA32 * g2[i];
      rhs(s + 0.6 * h, ytmp, ftmp);
      ++out.rhs_evals;
      for (std::size_t i = 0; i < nd; ++i)
        g3[i] = ftmp[i] + (C31 * g1[i] + C32 * g2[i]) / h;
      lu_solve(A, piv, nd, g3);
      // The fourth stage reuses the third stage's derivative evaluation.
      for (std::size_t i = 0; i < nd; ++i)
        g4[i] = ftmp[i] + (C41 * g1[i] + C42 * g2[i] + C43 * g3[i]) / h;
      lu_solve(A, piv, nd, g4);

      // The raw embedded difference overestimates the error of slaved stiff
      // components once |lambda| h >> 1; filtering it through (aI - J)^{-1} a
      // (a = 1/(GAM h)) damps exactly those components while leaving smooth
      // ones unchanged, so the step size stays accuracy-limited.
      for (std::size_t i = 0; i < nd; ++i) {
        ynew[i] = y[i] + RB1 * g1[i] + RB2 * g2[i] + RB3 * g3[i] + RB4 * g4[i];
        fpert[i] = a * (RE1 * g1[i] + RE2 * g2[i] + RE3 * g3[i] + RE4 * g4[i]);
      }
      lu_solve(A, piv, nd, fpert);
      err = 0.0;
      for (std::size_t i = 0; i < nd; ++i) {
        const double sc = cfg.abs_tol +
                          cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += (fpert[i] / sc) * (fpert[i] / sc);
      }
      err = std::sqrt(err / static_cast<double>(nd));
      if (!all_finite(ynew)) {
        // An overflowing trial step means h overshot, not that the solution
        // blew up; genuine blowup is caught on accepted states below.
        ++out.steps_rejected;
        rejected_last = true;
        h *= 0.1;
        if (h < cfg.min_step) return finish(IntegrationStatus::Stall);
        continue;
      }

      if (err <= 1.0) {
        accepted = true;
      } else {
        ++out.steps_rejected;
        rejected_last = true;
        h *= std::max(0.1, 0.9 * std::pow(err, -1.0 / 3.0));
        if (h < cfg.min_step) return finish(IntegrationStatus::Stall);
      }
    }
    if (!accepted) return finish(IntegrationStatus::Stall);

    s += h;
    std::copy(ynew.begin(), ynew.end(), y.begin());
    ++out.steps_accepted;
    if (hook) (*hook)(s, y);
    const int fired = tracker.update(s, y);
    if (fired >= 0) {
      out.event_name = events[fired].name;
      return finish(IntegrationStatus::EventHit);
    }
    if (max_abs(y) > cfg.blowup_norm) return finish(IntegrationStatus::Blowup);
    rec.record(s, y);
    // After a rejection, do not let the step grow again immediately; the
    // filtered estimate can under-report right at the accuracy boundary and
    // unrestricted growth makes the controller thrash.
    const double grow = rejected_last ? 1.0 : 2.0;
    rejected_last = false;
    h *= std::clamp(0.9 * std::pow(err, -0.25), 0.2, grow);
  }
  return finish(IntegrationStatus::MaxSteps);
}

}  // namespace

Integration integrate(const Rhs& rhs, std::span<const double> y0, double s0,
                      double s_end, const IntegratorConfig& config,
                      const std::vector<EventSpec>& events, const StepHook* hook,
                      const std::vector<double>* grid) {
  switch (config.mode) {
    case IntegratorMode::FixedStepClassic4:
      return run_rk4(rhs, y0, s0, s_end, config, events, hook);
    case IntegratorMode::StabilizedExplicit2:
      return run_rkc2(rhs, y0, s0, s_end, config, events, hook);
    case IntegratorMode::SemiImplicit43:
      return run_ros43(rhs, y0, s0, s_end, config, events, hook);
    case IntegratorMode::AdaptiveEmbedded54:
    default:
      return run_dp5(rhs, y0, s0, s_end, config, events, hook, grid);
  }
}

}  // namespace expsol
