#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "expsol/shooting.hpp"

using namespace expsol;

namespace {

ProblemSpec r3s1() {
  ProblemSpec spec;
  spec.d = {2, 1};
  spec.mu = {1.0, 0.0};
  spec.eps = 1.0;
  return spec;
}

RunConfig fast_config() {
  RunConfig cfg = shooting_run_config();
  cfg.l_floor = 1e-3;
  cfg.sample_stride = 8;
  return cfg;
}

}  // namespace

TEST_CASE("cone scalar coefficient") {
  const ProblemSpec spec = r3s1();
  ConeSpec cone;
  cone.sigma = {2.0, 1.0};
  // sum d mu sigma^2 - n(n-1) = 2*1*4 - 6 = 2.
  CHECK(cone.cone_scal_coeff(spec) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("sigma_1 evaluation is reproducible") {
  const ProblemSpec spec = r3s1();
  const RunConfig cfg = fast_config();
  const BracketPoint a = sigma1_of_C(spec, {1.0}, -1.0, cfg);
  const BracketPoint b = sigma1_of_C(spec, {1.0}, -1.0, cfg);
  CHECK(a.sigma1 == b.sigma1);
  CHECK(a.sigma1 > 0.0);
  CHECK(!a.low_confidence);
}

TEST_CASE("solver recovers the C of an already-achieved target") {
  const ProblemSpec spec = r3s1();
  const RunConfig cfg = fast_config();
  const double c_ref = -1.0;
  const BracketPoint ref = sigma1_of_C(spec, {1.0}, c_ref, cfg);
  const ShootResult res = solve_for_sigma1(spec, {1.0}, ref.sigma1, 1e-4, cfg);
  REQUIRE(res.status == ShootStatus::Converged);
  CHECK(std::abs(res.achieved.sigma[0] - ref.sigma1) <= 1e-4 * ref.sigma1);
  CHECK(res.params.C == doctest::Approx(c_ref).epsilon(1e-2));
  CHECK(res.iterations <= 60);
  CHECK(!res.straddle_violated);
}

TEST_CASE("sigma_1 is driven to both small and large targets") {
  const ProblemSpec spec = r3s1();
  const RunConfig cfg = fast_config();
  for (double target : {0.5, 3.0}) {
    const ShootResult res = solve_for_sigma1(spec, {1.0}, target, 1e-3, cfg);
    REQUIRE(res.status == ShootStatus::Converged);
    CHECK(std::abs(res.achieved.sigma[0] - target) <= 1e-3 * target);
    CHECK(!res.bracket.empty());
  }
}

TEST_CASE("rescaling with unit factors is the identity") {
  const ProblemSpec spec = r3s1();
  const RunConfig cfg = fast_config();
  const ShootResult base = solve_for_sigma1(spec, {1.0}, 1.0, 1e-3, cfg);
  REQUIRE(base.status == ShootStatus::Converged);
  const std::vector<double> same_tail = {base.achieved.sigma[1]};
  const ShootResult again = rescale_for_ricci_flat(spec, base, same_tail, cfg);
  REQUIRE(again.status == ShootStatus::Converged);
  CHECK(again.rescale_factors.size() == 1);
  CHECK(again.rescale_factors[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(again.params.fbar[0] == doctest::Approx(base.params.fbar[0]).epsilon(1e-6));
}

TEST_CASE("realize_cone hits a full target cone") {
  const ProblemSpec spec = r3s1();
  ConeSpec cone;
  cone.sigma = {2.0, 1.0};
  const ShootResult res = realize_cone(spec, cone, 1e-3, fast_config());
  REQUIRE(res.status == ShootStatus::Converged);
  CHECK(std::abs(res.achieved.sigma[0] - 2.0) <= 1e-3 * 2.0);
  CHECK(std::abs(res.achieved.sigma[1] - 1.0) <= 1e-3);
  CHECK(res.iterations <= 60);
}

TEST_CASE("Einstein-cone requests are rejected up front") {
  const ProblemSpec spec = r3s1();
  ConeSpec cone;
  cone.sigma = {0.0, 1.0};
  CHECK_THROWS_AS((void)realize_cone(spec, cone, 1e-3, fast_config()),
                  std::invalid_argument);
}

TEST_CASE("sweep returns one row per C in input order") {
  const ProblemSpec spec = r3s1();
  const std::vector<double> cs = {-0.5, -1.0, -2.0};
  const auto rows = sweep(spec, {1.0}, cs, 2, fast_config());
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rows[k].C == cs[k]);
    CHECK(rows[k].error.empty());
    REQUIRE(rows[k].sigma.size() == 2);
    CHECK(rows[k].sigma[0] > 0.0);
  }
  // sigma_1 grows with |C|.
  CHECK(rows[0].sigma[0] < rows[1].sigma[0]);
  CHECK(rows[1].sigma[0] < rows[2].sigma[0]);
}
