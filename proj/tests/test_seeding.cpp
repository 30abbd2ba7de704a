#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "expsol/model.hpp"
#include "expsol/problem.hpp"
#include "expsol/seeding.hpp"

using namespace expsol;

namespace {

ProblemSpec r3s1() {
  ProblemSpec spec;
  spec.d = {2, 1};
  spec.mu = {1.0, 0.0};
  spec.eps = 1.0;
  return spec;
}

}  // namespace

TEST_CASE("Taylor seed matches the closed-form low-order terms") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {1.0};
  params.C = -3.0;
  const double t0 = 1e-3;
  const SeedResult seed = taylor_seed(spec, params, t0);
  const TLayout tx(2);
  CHECK(seed.t0 == t0);
  // u(t0) = C t0^2 / (2(d1+1)) = -3e-6/6
  CHECK(seed.tstate[tx.u()] == doctest::Approx(-5e-7).epsilon(1e-12));
  // f_2(t0) = fbar_2 (1 + Fbar_2 t0^2 / (2(d1+1))), Fbar_2 = eps/2 = 0.5
  CHECK(seed.tstate[tx.f(1)] == doctest::Approx(1.0 + (0.5 / 6.0) * 1e-6).epsilon(1e-14));
  // f_1 = t0 + O(t0^3), fdot_1 = 1 + O(t0^2)
  CHECK(seed.tstate[tx.f(0)] == doctest::Approx(t0).epsilon(1e-5));
  CHECK(seed.tstate[tx.fdot(0)] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(seed.order == 3);
  CHECK(seed.est_error < 1e-5);
  CHECK(std::abs(seed.conservation_residual) < 1e-4);
}

TEST_CASE("seeded s-state is the conversion of the seeded t-state") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {0.7};
  params.C = -1.5;
  const SeedResult seed = taylor_seed(spec, params, default_t0(spec, params));
  const auto converted = t_to_s(spec, params.C, seed.t0, seed.tstate);
  REQUIRE(seed.sstate.size() == converted.size());
  for (std::size_t k = 0; k < converted.size(); ++k)
    CHECK(seed.sstate[k] == doctest::Approx(converted[k]).epsilon(1e-12));
}

TEST_CASE("default seed time") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {1.0};
  params.C = -1.0;
  CHECK(default_t0(spec, params) == doctest::Approx(1e-3));
  params.fbar = {0.25};
  CHECK(default_t0(spec, params) == doctest::Approx(2.5e-4));
  ProblemSpec hot = spec;
  hot.eps = 4.0;
  params.fbar = {1.0};
  CHECK(default_t0(hot, params) == doctest::Approx(5e-4));
}

TEST_CASE("seed regime classification") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {1.0};
  params.C = -1.0;
  CHECK(validate_seed_regime(spec, params) == SeedRegime::Regular);
  params.C = 0.0;
  CHECK(validate_seed_regime(spec, params) == SeedRegime::Einstein);
  params.C = 1.0;
  std::string reason;
  CHECK(validate_seed_regime(spec, params, &reason) == SeedRegime::Rejected);
  CHECK(!reason.empty());

  // A negatively curved second factor is fine while Fbar_2 stays positive.
  ProblemSpec hyp = spec;
  hyp.mu[1] = -1.0;
  params.C = -1.0;
  params.fbar = {2.0};  // Fbar_2 = -1/4 + 1/2 = 1/4 > 0
  CHECK(validate_seed_regime(hyp, params) == SeedRegime::Regular);
  params.fbar = {1.0};  // Fbar_2 = -1 + 1/2 = -1/2
  CHECK(validate_seed_regime(hyp, params, &reason) == SeedRegime::Rejected);
  CHECK(!reason.empty());
}

TEST_CASE("seed rejects out-of-regime input") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {1.0};
  params.C = -1.0;
  CHECK_THROWS_AS((void)taylor_seed(spec, params, 0.5), std::invalid_argument);
  ProblemSpec hyp = spec;
  hyp.mu[1] = -1.0;
  CHECK_THROWS_AS((void)taylor_seed(hyp, params, 1e-3), std::domain_error);
}

TEST_CASE("halving t0 shrinks the truncation estimate") {
  const ProblemSpec spec = r3s1();
  SeedParams params;
  params.fbar = {1.0};
  params.C = -2.0;
  const SeedResult a = taylor_seed(spec, params, 1e-3);
  const SeedResult b = taylor_seed(spec, params, 5e-4);
  CHECK(b.est_error < a.est_error);
  CHECK(b.est_error > 0.0);
}
