// End-to-end acceptance suite. Each numbered criterion prints a single
// "pass"/"FAIL" line with its measured figure of merit next to the bound it
// must meet; the process exits nonzero when any criterion fails. Expensive
// trajectories are shared between criteria where the required resolution
// allows it.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "expsol/analysis.hpp"
#include "expsol/model.hpp"
#include "expsol/problem.hpp"
#include "expsol/seeding.hpp"
#include "expsol/shooting.hpp"
#include "expsol/subsystem.hpp"

using namespace expsol;

namespace {

int failures = 0;
std::map<int, std::string> lines;

void report(int criterion, bool ok, const std::string& detail) {
  lines[criterion] = std::string(ok ? "pass" : "FAIL") + "  " + detail;
  if (!ok) ++failures;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", x);
  return buf;
}

ProblemSpec r3s1() {
  ProblemSpec spec;
  spec.d = {2, 1};
  spec.mu = {1.0, 0.0};
  spec.eps = 1.0;
  return spec;
}

SeedParams seed(double C, std::vector<double> fbar = {1.0}) {
  SeedParams p;
  p.fbar = std::move(fbar);
  p.C = C;
  return p;
}

RunConfig floor_config(double l_floor, int stride = 16) {
  RunConfig cfg;
  cfg.l_floor = l_floor;
  cfg.sample_stride = stride;
  return cfg;
}

// --- criterion 1: closed-form derivative identities at random states -------
void criterion_1() {
  std::vector<ProblemSpec> specs;
  {
    ProblemSpec s;
    s.d = {2, 1}; s.mu = {1, 0}; s.eps = 1.0; specs.push_back(s);
    s.d = {3, 2}; s.mu = {2, 1}; s.eps = 1.0; specs.push_back(s);
    s.d = {2, 2}; s.mu = {1, 1}; s.eps = 2.0; specs.push_back(s);
    s.d = {4, 1}; s.mu = {3, 0}; s.eps = 0.5; specs.push_back(s);
    s.d = {2, 3, 1}; s.mu = {1, 2, 0}; s.eps = 1.0; specs.push_back(s);
  }
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> uni(0.02, 1.2);
  double worst = 0.0;
  for (const auto& spec : specs) {
    const SLayout ix(spec.r());
    for (int trial = 0; trial < 10000; ++trial) {
      std::vector<double> y(ix.size());
      for (double& c : y) c = uni(rng);
      double nrm = 0.0;
      for (double c : y) nrm = std::max(nrm, std::abs(c));
      const double scale = 1.0 + nrm * nrm * nrm * nrm;
      for (double res : derivative_identities_check(spec, y))
        worst = std::max(worst, std::abs(res) / scale);
    }
  }
  report(1, worst <= 1e-12,
         "identity residual " + fmt(worst) + " <= 1e-12 (5 specs x 1e4 states)");
}

// --- criteria 2 and 4 share the deep floor-1e-6 runs -----------------------
void criteria_2_and_4(std::map<double, TrajectoryRecord>& deep) {
  const ProblemSpec spec = r3s1();
  bool ok2 = true;
  std::string detail2;
  for (double C : {-0.1, -1.0, -10.0}) {
    deep.emplace(C, run_trajectory(spec, seed(C), floor_config(1e-6, 64)));
    const TrajectoryRecord& rec = deep.at(C);
    const double bound = 1e-6 * (1.0 + std::abs(C));
    const bool floor_hit = rec.run.status == IntegrationStatus::EventHit &&
                           rec.run.event_name == "l-floor";
    if (!floor_hit || rec.max_residual_over_l2 > bound) ok2 = false;
    detail2 += "C=" + fmt(C) + ": " + fmt(rec.max_residual_over_l2) + " <= " +
               fmt(bound) + "  ";
  }
  report(2, ok2, detail2);

  const TrajectoryRecord& rec = deep.at(-1.0);
  const ExpanderReport rep = expander_asymptotics_check(rec);
  double x_err = 0.0;
  for (double e : rep.x_over_l2_err) x_err = std::max(x_err, e);
  const bool ok4 = rep.elt_err < 1e-3 && x_err < 1e-3 && rep.y_over_l_monotone;
  report(4, ok4, "|eps/2 L t - 1| " + fmt(rep.elt_err) +
                     " < 1e-3, X/L^2 rel err " + fmt(x_err) +
                     " < 1e-3, Y/L monotone " +
                     (rep.y_over_l_monotone ? "yes" : "NO"));
}

// --- criterion 3: Einstein trajectory contracts onto the fixed point -------
void criterion_3() {
  const ProblemSpec spec = r3s1();
  const TrajectoryRecord rec =
      run_trajectory(spec, seed(0.0), floor_config(1e-6, 8));
  const SLayout ix = rec.layout();
  double x_err = 0.0;
  for (int i = 0; i < spec.r(); ++i)
    x_err = std::max(x_err, std::abs(rec.run.y_final[ix.X(i)] - 1.0 / 3.0));
  const double L = rec.run.y_final[ix.L()];
  const double l_err = std::abs(0.5 * L * L - 1.0 / 3.0);
  const bool ok = rec.run.status == IntegrationStatus::EventHit &&
                  x_err < 1e-6 && l_err < 1e-6;
  report(3, ok, "|X_i - 1/3| " + fmt(x_err) + " < 1e-6, |(eps/2)L^2 - 1/3| " +
                    fmt(l_err) + " < 1e-6");
}

// --- criteria 5 and 6a: fitted tail limits vs the closed forms -------------
void criteria_5_and_6(const ShootResult& cone_result) {
  const ProblemSpec spec = r3s1();
  const TrajectoryRecord rec =
      run_trajectory(spec, seed(-1.0), floor_config(1e-4, 16));
  const AsymptoticReport rep = extract_sigma(rec);
  bool ok5 = true;
  std::string detail5;
  for (int i = 0; i < spec.r(); ++i) {
    const double expected =
        0.25 * (spec.mu[i] * rep.sigma[i] * rep.sigma[i] + 1.0);
    const double rel = std::abs(rep.refined[i] - expected) / std::abs(expected);
    if (!(rel <= 1e-3)) ok5 = false;
    detail5 += "factor " + std::to_string(i + 1) + ": rel err " + fmt(rel) +
               " <= 1e-3  ";
  }
  report(5, ok5, detail5);

  const double expected_scal = 0.25 * rep.cone_scal_coeff;
  const double rel6a =
      std::abs(rep.scal_limit - expected_scal) / std::abs(expected_scal);
  bool ok6 = rel6a <= 1e-3;
  std::string detail6 = "scal limit rel err " + fmt(rel6a) + " <= 1e-3";

  // Positive-coefficient branch: the realized sigma = (2, 1) cone has
  // coefficient 2 > 0, so scalar curvature must be positive along the whole
  // trajectory and extrapolate to -C - (n+1) eps/2 at the singular orbit.
  if (cone_result.status == ShootStatus::Converged) {
    const TrajectoryRecord pos = run_trajectory(
        spec, cone_result.params, floor_config(1e-3, 4));
    bool positive = true;
    for (const Diagnostics& dg : pos.diag)
      if (!(dg.rcal > 0.0)) positive = false;
    const double r0 = scalar_at_origin(pos);
    const double r0_expected = -pos.params.C - 2.0;
    const double rel0 = std::abs(r0 - r0_expected) / std::abs(r0_expected);
    if (!positive || !(rel0 <= 1e-4)) ok6 = false;
    detail6 += ", R > 0 everywhere " + std::string(positive ? "yes" : "NO") +
               ", R(0+) rel err " + fmt(rel0) + " <= 1e-4";
  } else {
    ok6 = false;
    detail6 += ", positive-cone run unavailable (shooting failed)";
  }
  report(6, ok6, detail6);
}

// --- criterion 7: preserved inequalities across a run matrix ---------------
void criterion_7() {
  const ProblemSpec spec = r3s1();
  int runs = 0;
  bool ok = true;
  std::string first_bad;
  // The inequality margins shrink like L^4, so the matrix runs to a floor
  // where they stay well above integration noise.
  for (double C : {-0.1, -0.3, -1.0, -3.0, -10.0}) {
    for (double fb : {0.5, 1.0, 2.0}) {
      const TrajectoryRecord rec =
          run_trajectory(spec, seed(C, {fb}), floor_config(1e-2, 8));
      ++runs;
      const InequalityReport iq = preserved_inequalities_monitor(rec);
      if (!iq.all_hold() || !iq.u_negative || !iq.udot_negative) {
        ok = false;
        if (first_bad.empty())
          first_bad = " first violation at C=" + fmt(C) + " fbar=" + fmt(fb) +
                      " sample " + std::to_string(iq.first_violation);
      }
    }
  }
  // Einstein member of the matrix: the inequalities weaken to the stopping
  // ball but the strict per-sample form must still hold along the way.
  const TrajectoryRecord einstein =
      run_trajectory(spec, seed(0.0), floor_config(1e-2, 8));
  ++runs;
  const InequalityReport iq = preserved_inequalities_monitor(einstein);
  if (!iq.all_hold()) {
    ok = false;
    if (first_bad.empty())
      first_bad = " first violation in the Einstein run, sample " +
                  std::to_string(iq.first_violation);
  }
  report(7, ok && runs >= 12,
         "X1 dominance held in " + std::to_string(runs) + " runs" + first_bad);
}

// --- criterion 8: planar subsystem limits ----------------------------------
void criterion_8() {
  bool ok = true;
  std::string detail;
  for (int d : {2, 3, 5}) {
    const SubTrajectory a = unstable_trajectory(d, 1e-8);
    const SubTrajectory b = unstable_trajectory(d, 5e-9);
    const double drift =
        std::max(std::abs(a.ratio_at_stop - b.ratio_at_stop),
                 std::abs(a.refined_ratio_at_stop - b.refined_ratio_at_stop));
    if (!(a.ratio_err < 1e-3 && a.refined_ratio_err < 1e-2 && drift < 1e-6))
      ok = false;
    detail += "d=" + std::to_string(d) + ": " + fmt(a.ratio_err) + "/" +
              fmt(a.refined_ratio_err) + " drift " + fmt(drift) + "  ";
  }
  report(8, ok, detail + "(bounds 1e-3 / 1e-2 / 1e-6)");
}

// --- criterion 9: decoupled flat factor rescaling --------------------------
void criterion_9() {
  const ProblemSpec spec = r3s1();
  RunConfig cfg;
  cfg.l_floor = 1e-3;
  cfg.engine = RunConfig::Engine::Adaptive54;
  cfg.sample_stride = 1000000;  // rely on the shared grid below
  cfg.s_grid.clear();
  for (double s = 1.0; s <= 512.0; s *= 2.0) cfg.s_grid.push_back(s);

  const TrajectoryRecord a = run_trajectory(spec, seed(-1.0, {1.0}), cfg);
  const TrajectoryRecord b = run_trajectory(spec, seed(-1.0, {0.5}), cfg);
  const AsymptoticReport ra = extract_sigma(a);
  const AsymptoticReport rb = extract_sigma(b);
  const double s2_ratio = rb.sigma[1] / ra.sigma[1];
  const double s1_rel = std::abs(rb.sigma[0] - ra.sigma[0]) / ra.sigma[0];

  // Sample-by-sample invariance of (L, X1, Y1, X2) on the shared grid.
  const SLayout ix(2);
  double samp_rel = 0.0;
  const std::size_t m = std::min(a.run.grid_s.size(), b.run.grid_s.size());
  for (std::size_t k = 0; k < m; ++k) {
    const auto ya = a.run.grid_sample(k);
    const auto yb = b.run.grid_sample(k);
    for (int idx : {ix.L(), ix.X(0), ix.Y(0), ix.X(1)})
      samp_rel = std::max(samp_rel, std::abs(ya[idx] - yb[idx]) /
                                        (1e-30 + std::abs(ya[idx])));
  }
  const bool ok = std::abs(s2_ratio - 2.0) < 2e-3 && s1_rel < 1e-6 &&
                  samp_rel < 1e-6 && m >= 8;
  report(9, ok, "sigma2 ratio " + fmt(s2_ratio) + " ~ 2, sigma1 rel " +
                    fmt(s1_rel) + " < 1e-6, shared-grid rel " + fmt(samp_rel) +
                    " < 1e-6");
}

// --- criterion 10: inverse problem -----------------------------------------
ShootResult criterion_10() {
  const ProblemSpec spec = r3s1();
  bool ok = true;
  std::string detail;
  ShootResult keep;
  for (double target : {0.5, 2.0, 10.0}) {
    ConeSpec cone;
    cone.sigma = {target, 1.0};
    const ShootResult res = realize_cone(spec, cone, 1e-4);
    const double rel1 = std::abs(res.achieved.sigma[0] - target) / target;
    const double rel2 = std::abs(res.achieved.sigma[1] - 1.0);
    if (res.status != ShootStatus::Converged || res.iterations > 60 ||
        rel1 > 1e-4 || rel2 > 1e-4)
      ok = false;
    detail += "sigma1=" + fmt(target) + ": " + std::to_string(res.iterations) +
              " evals, rel " + fmt(std::max(rel1, rel2)) + "  ";
    if (target == 2.0) keep = res;
  }

  std::vector<double> grid(25);
  for (int k = 0; k < 25; ++k)
    grid[k] = -std::pow(10.0, -3.0 + 6.0 * k / 24.0);
  const auto rows = sweep(spec, {1.0}, grid, 4);
  double lo = 1e300, hi = -1e300;
  for (const auto& row : rows) {
    if (!row.error.empty() || row.sigma.empty()) continue;
    lo = std::min(lo, row.sigma[0]);
    hi = std::max(hi, row.sigma[0]);
  }
  if (!(rows.size() == 25 && lo <= 0.1 && hi >= 10.0)) ok = false;
  report(10, ok, detail + "sweep sigma1 range [" + fmt(lo) + ", " + fmt(hi) +
                     "] covers [0.1, 10]");
  return keep;
}

// --- criterion 11: integrator cross-validation -----------------------------
void criterion_11() {
  const ProblemSpec spec = r3s1();
  RunConfig adaptive;
  adaptive.l_floor = 1e-2;
  adaptive.engine = RunConfig::Engine::Adaptive54;
  RunConfig fixed = adaptive;
  fixed.engine = RunConfig::Engine::FixedStepClassic4;
  fixed.fixed_h = 0.005;

  const AsymptoticReport ra =
      extract_sigma(run_trajectory(spec, seed(-1.0), adaptive));
  const AsymptoticReport rf =
      extract_sigma(run_trajectory(spec, seed(-1.0), fixed));
  const double engine_rel = std::abs(ra.sigma[0] - rf.sigma[0]) / ra.sigma[0];

  RunConfig halved = adaptive;
  halved.t0 = 0.5 * default_t0(spec, seed(-1.0));
  const AsymptoticReport rh =
      extract_sigma(run_trajectory(spec, seed(-1.0), halved));
  const double t0_diff = std::abs(rh.sigma[0] - ra.sigma[0]);

  const bool ok = engine_rel < 1e-6 && t0_diff < 1e-8;
  report(11, ok, "engine rel diff " + fmt(engine_rel) +
                     " < 1e-6, t0-halving diff " + fmt(t0_diff) + " < 1e-8");
}

// --- criterion 12: origin attraction with Lyapunov certificate -------------
void criterion_12() {
  const ProblemSpec spec = r3s1();
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  bool ok = true;
  double worst_final = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> lxy(5);
    double nrm = 0.0;
    for (double& c : lxy) {
      c = uni(rng);
      nrm += c * c;
    }
    nrm = std::sqrt(nrm);
    for (double& c : lxy) c *= 1e-2 / nrm;
    // The decay toward the origin is algebraic, so a finite horizon only
    // yields partial contraction; the per-sample Lyapunov monotonicity is
    // the sharp certificate of attraction.
    const OriginRunReport rep = origin_attraction_run(spec, lxy, 2e4);
    if (!rep.lyapunov_strictly_decreasing || !(rep.final_norm < 1e-2))
      ok = false;
    worst_final = std::max(worst_final, rep.final_norm);
  }
  report(12, ok,
         "20 random starts from norm 1e-2, Lyapunov strictly decreasing, "
         "worst final norm " + fmt(worst_final));
}

}  // namespace

int main() {
  criterion_1();
  std::map<double, TrajectoryRecord> deep;
  criteria_2_and_4(deep);
  criterion_3();
  const ShootResult cone = criterion_10();
  criteria_5_and_6(cone);
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_11();
  criterion_12();
  for (const auto& [num, line] : lines)
    std::printf("criterion %2d: %s\n", num, line.c_str());
  std::printf("%s\n", failures == 0 ? "all criteria passed"
                                    : "FAILURES PRESENT");
  return failures == 0 ? 0 : 1;
}
