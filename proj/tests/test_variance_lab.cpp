#include <cmath>

#include "doctest.h"
#include "divlab/error.hpp"
#include "divlab/variance_lab.hpp"

using namespace divlab;

namespace {

ObjectiveSpec make_spec(ObjectiveKind kind, double alpha, double gamma = 2.0, double tau = 1.0) {
  ObjectiveSpec s;
  s.kind = kind;
  s.alpha = alpha;
  s.gamma = gamma;
  s.tau = tau;
  return s;
}

}  // namespace

TEST_CASE("oracle scores per objective") {
  const double lr = 1.3;
  CHECK(oracle_score(make_spec(ObjectiveKind::DV, 0.3), lr) == lr);
  CHECK(oracle_score(make_spec(ObjectiveKind::NWJ, 0.3), lr) == lr + 1.0);
  CHECK(oracle_score(make_spec(ObjectiveKind::MLCPC, 0.25), lr) ==
        doctest::Approx(skew_oracle_critic(lr, 0.25)).epsilon(1e-15));
  CHECK(oracle_score(make_spec(ObjectiveKind::SkewNWJ, 0.25, 2.0, 0.5), lr) ==
        doctest::Approx(0.5 * (skew_oracle_critic(lr, 0.25) + 1.0)).epsilon(1e-15));
}

TEST_CASE("independent pairs: every objective is near zero with small variance") {
  const ObjectiveKind kinds[] = {ObjectiveKind::DV,    ObjectiveKind::CPC,
                                 ObjectiveKind::MLCPC, ObjectiveKind::RMLCPC,
                                 ObjectiveKind::NWJ,   ObjectiveKind::SkewNWJ};
  for (ObjectiveKind kind : kinds) {
    const auto reports = variance_sweep(make_spec(kind, 1.0 / 128.0), {0.0}, 64, 100, 3);
    REQUIRE(reports.size() == 1);
    const VarianceReport& r = reports[0];
    CHECK(std::abs(r.empirical_mean) <= 1e-12);
    CHECK(r.empirical_variance <= 1e-24);
    CHECK_FALSE(r.variance_infinite);
  }
}

TEST_CASE("reports are reproducible and carry their configuration") {
  const ObjectiveSpec spec = make_spec(ObjectiveKind::RMLCPC, 0.0, 2.0);
  const auto a = variance_sweep(spec, {1.0, 2.0}, 64, 100, 11);
  const auto b = variance_sweep(spec, {2.0}, 64, 100, 11);
  VarianceSweepOptions threaded;
  threaded.threads = 3;
  const auto c = variance_sweep(spec, {1.0, 2.0}, 64, 100, 11, threaded);
  REQUIRE(a.size() == 2);
  CHECK(a[1].empirical_mean == b[0].empirical_mean);
  CHECK(a[1].empirical_variance == b[0].empirical_variance);
  CHECK(c[0].empirical_variance == a[0].empirical_variance);
  CHECK(a[0].true_kl == 1.0);
  CHECK(a[0].n == 64);
  CHECK(a[0].repetitions == 100);
  CHECK(a[0].dim == 20);
  CHECK(a[0].empirical_variance > 0.0);
  REQUIRE(a[0].theorem_lower_bound.has_value());
  CHECK(*a[0].theorem_lower_bound == doctest::Approx(1.0 - 4.0 * std::exp(-4.0)).epsilon(1e-12));
  CHECK(a[0].standard_error() == doctest::Approx(std::sqrt(a[0].empirical_variance / 100.0)));
  CHECK_FALSE(variance_sweep(make_spec(ObjectiveKind::RMLCPC, 0.01), {1.0}, 32, 100, 1)[0]
                  .theorem_lower_bound.has_value());
}

TEST_CASE("oracle means sit near the divergence they target") {
  // DV at the oracle critic estimates the MI; 300 batches of 128 at d = 20.
  const auto r = variance_sweep(make_spec(ObjectiveKind::DV, 0.0), {1.0}, 128, 300, 19)[0];
  CHECK(std::abs(r.empirical_mean - 1.0) <= 4.0 * r.standard_error() + 0.01);
}

TEST_CASE("sweep validation") {
  const ObjectiveSpec spec = make_spec(ObjectiveKind::MLCPC, 0.1);
  CHECK_THROWS_AS(variance_sweep(spec, {1.0}, 64, 99, 0), ConfigError);
  CHECK_THROWS_AS(variance_sweep(spec, {1.0}, 1, 100, 0), ConfigError);
  CHECK_THROWS_AS(variance_sweep(spec, {-1.0}, 64, 100, 0), ConfigError);
}
