#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "expsol/subsystem.hpp"

using namespace expsol;

TEST_CASE("hand-evaluated planar derivatives") {
  std::array<double, 2> y{0.25, 0.25};
  std::array<double, 2> dy{};
  rhs_sub(2, y, dy);
  CHECK(dy[0] == doctest::Approx(-0.15625).epsilon(1e-14));
  CHECK(dy[1] == doctest::Approx(-0.03125).epsilon(1e-14));
}

TEST_CASE("fixed points of the planar system") {
  for (int d : {2, 3, 5}) {
    std::array<double, 2> dy{};
    std::array<double, 2> interior{1.0 / d, 1.0 / d};
    rhs_sub(d, interior, dy);
    CHECK(std::abs(dy[0]) < 1e-15);
    CHECK(std::abs(dy[1]) < 1e-15);
    std::array<double, 2> axis{1.0 / std::sqrt(static_cast<double>(d)), 0.0};
    rhs_sub(d, axis, dy);
    CHECK(std::abs(dy[0]) < 1e-15);
    CHECK(std::abs(dy[1]) < 1e-15);
    std::array<double, 2> origin{0.0, 0.0};
    rhs_sub(d, origin, dy);
    CHECK(dy[0] == 0.0);
    CHECK(dy[1] == 0.0);
  }
}

TEST_CASE("saddle eigen-data against finite differences") {
  for (int d : {2, 3, 5}) {
    const SubJacobianInfo info = saddle_data(d);
    // Finite-difference Jacobian at (1/d, 1/d).
    std::array<std::array<double, 2>, 2> fd{};
    const double h = 1e-7;
    for (int j = 0; j < 2; ++j) {
      std::array<double, 2> yp{1.0 / d, 1.0 / d}, ym{1.0 / d, 1.0 / d};
      yp[j] += h;
      ym[j] -= h;
      std::array<double, 2> fp{}, fm{};
      rhs_sub(d, yp, fp);
      rhs_sub(d, ym, fm);
      for (int i = 0; i < 2; ++i) fd[i][j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        CHECK(info.jac[i][j] == doctest::Approx(fd[i][j]).epsilon(1e-6));
    CHECK(info.lambda_unstable > 0.0);
    CHECK(info.lambda_stable < 0.0);
    // Eigenvector check: J v = lambda v.
    const auto& v = info.unstable_dir;
    const double r0 = info.jac[0][0] * v[0] + info.jac[0][1] * v[1] -
                      info.lambda_unstable * v[0];
    const double r1 = info.jac[1][0] * v[0] + info.jac[1][1] * v[1] -
                      info.lambda_unstable * v[1];
    CHECK(std::abs(r0) < 1e-12);
    CHECK(std::abs(r1) < 1e-12);
    // Points into the box: both components negative or both positive toward
    // the interior of (0, 1/d)^2 from the corner saddle; X must decrease.
    CHECK(v[0] < 0.0);
  }
}

TEST_CASE("unstable trajectory realizes the known limit ratios") {
  for (int d : {2, 3, 5}) {
    const SubTrajectory traj = unstable_trajectory(d);
    CHECK(traj.run.status == IntegrationStatus::EventHit);
    CHECK(traj.ratio_err < 1e-3);
    CHECK(traj.refined_ratio_err < 1e-2);
    CHECK(traj.rcal_positive_late);
  }
}

TEST_CASE("limit ratios are insensitive to the seeding offset") {
  const SubTrajectory a = unstable_trajectory(3, 1e-8);
  const SubTrajectory b = unstable_trajectory(3, 5e-9);
  CHECK(std::abs(a.ratio_at_stop - b.ratio_at_stop) < 1e-6);
  CHECK(std::abs(a.refined_ratio_at_stop - b.refined_ratio_at_stop) < 1e-6);
}

TEST_CASE("open box is preserved and attracts to the origin") {
  const BoxReport rep = box_preservation_check(3, 0.2, 0.2);
  CHECK(rep.contained);
  CHECK(rep.decayed);
  CHECK(rep.final_x < 0.04);
  CHECK(rep.final_y < 0.04);
}

TEST_CASE("states outside the box are rejected") {
  CHECK_THROWS_AS((void)box_preservation_check(2, 0.9, 0.9), std::invalid_argument);
}

TEST_CASE("restricted curvature formula") {
  // rcal_sub = 2dX - d(d+1)X^2 - d(d-1)Y^2; spot-check a hand value and
  // positivity on the late-time locus X ~ (d-1)Y^2, Y small.
  CHECK(rcal_sub(2, 1e-4, 1e-2) > 0.0);
  CHECK(rcal_sub(2, 0.25, 0.25) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rcal_sub(3, 1.0 / 3.0, 1.0 / 3.0) ==
        doctest::Approx(2.0 - 12.0 / 9.0 - 6.0 / 9.0).epsilon(1e-13));
}
