#include <cmath>
#include <vector>

#include "doctest.h"
#include "divlab/error.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/rng.hpp"

using namespace divlab;

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) {
    m += x;
  }
  m /= static_cast<double>(v.size());
  double s2 = 0.0;
  for (double x : v) {
    s2 += (x - m) * (x - m);
  }
  s2 /= static_cast<double>(v.size() - 1);
  return {m, std::sqrt(s2 / static_cast<double>(v.size()))};
}

double correlation(const Matrix& x, const Matrix& y, std::size_t col) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double a = x(i, col);
    const double b = y(i, col);
    sx += a;
    sy += b;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  return cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
}

}  // namespace

TEST_CASE("sampler correlation and variance over a million pairs") {
  for (double rho : {0.0, 0.5}) {
    const GaussianPairSpec spec{1, rho};
    const PairBatch b = sample_pair_batch(spec, 1000000, 12345);
    CHECK(std::abs(correlation(b.x, b.y, 0) - rho) < 0.01);
    double s = 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < b.y.rows(); ++i) {
      s += b.y(i, 0);
      ss += b.y(i, 0) * b.y(i, 0);
    }
    const double n = static_cast<double>(b.y.rows());
    CHECK(std::abs(ss / n - (s / n) * (s / n) - 1.0) < 0.01);
  }
}

TEST_CASE("sampler dimensions are independent and seeds are replayable") {
  const GaussianPairSpec spec{3, 0.7};
  const PairBatch a = sample_pair_batch(spec, 200000, 1);
  // Cross-dimension correlation between x_0 and y_1 is zero.
  double sxy = 0.0;
  for (std::size_t i = 0; i < a.x.rows(); ++i) {
    sxy += a.x(i, 0) * a.y(i, 1);
  }
  CHECK(std::abs(sxy / static_cast<double>(a.x.rows())) < 0.01);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::abs(correlation(a.x, a.y, c) - 0.7) < 0.01);
  }
  const PairBatch again = sample_pair_batch(spec, 64, 99);
  const PairBatch same = sample_pair_batch(spec, 64, 99);
  const PairBatch other = sample_pair_batch(spec, 64, 100);
  CHECK(again.x == same.x);
  CHECK(again.y == same.y);
  CHECK_FALSE(again.x == other.x);
}

TEST_CASE("sampler and spec validation") {
  CHECK_THROWS_AS(sample_pair_batch({2, 0.3}, 1, 0), ConfigError);
  CHECK_THROWS_AS(GaussianPairSpec({2, 1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(GaussianPairSpec({2, -1.0}).validate(), ConfigError);
  CHECK_THROWS_AS(GaussianPairSpec({0, 0.1}).validate(), ConfigError);
  CHECK_THROWS_AS(rho_for_mi(20, -1.0), ConfigError);
}

TEST_CASE("analytic MI and its inverse") {
  CHECK(analytic_mi({5, 0.0}) == 0.0);
  CHECK(rho_for_mi(7, 0.0) == 0.0);
  CHECK(rho_for_mi(20, 2.0) == doctest::Approx(std::sqrt(1.0 - std::exp(-0.2))).epsilon(1e-15));
  CHECK(rho_for_mi(20, 2.0) == doctest::Approx(0.4257573).epsilon(1e-7));
  for (double m : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    CHECK(std::abs(analytic_mi({20, rho_for_mi(20, m)}) - m) <= 1e-12);
  }
  // At d = 1 and large MI, 1 − rho² falls below double resolution of rho.
  for (double m : {1.0, 2.0, 4.0}) {
    CHECK(std::abs(analytic_mi({1, rho_for_mi(1, m)}) - m) <= 1e-12);
  }
  CHECK(analytic_mi({3, -0.4}) == analytic_mi({3, 0.4}));
  CHECK(analytic_mi({3, 0.4}) > 0.0);
}

TEST_CASE("MC: E_P[log r] is the MI and E_Q[r] is one") {
  const GaussianPairSpec spec{1, 0.5};
  std::vector<double> pos;
  std::vector<double> neg;
  pos.reserve(10000000);
  neg.reserve(1000000);
  for (std::uint64_t chunk = 0; chunk < 10; ++chunk) {
    const PairBatch b = sample_pair_batch(spec, 1000000, derive_seed(7, {chunk}));
    for (std::size_t i = 0; i < b.x.rows(); ++i) {
      pos.push_back(log_density_ratio(spec, b.x.row(i), b.y.row(i)));
    }
    if (chunk == 0) {
      for (std::size_t i = 0; i + 1 < b.x.rows(); ++i) {
        neg.push_back(std::exp(log_density_ratio(spec, b.x.row(i), b.y.row(i + 1))));
      }
    }
  }
  const Moments mp = moments(pos);
  CHECK(std::abs(mp.mean - analytic_mi(spec)) <= 3.0 * mp.se);
  const Moments mq = moments(neg);
  CHECK(std::abs(mq.mean - 1.0) <= 3.0 * mq.se);
}

TEST_CASE("log density ratio: symmetry, rho = 0, and the table form") {
  const GaussianPairSpec spec{4, 0.6};
  const PairBatch b = sample_pair_batch(spec, 8, 3);
  const Matrix table = log_density_ratio_table(spec, b.x, b.y);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 8; ++j) {
      const double direct = log_density_ratio(spec, b.x.row(i), b.y.row(j));
      CHECK(table(i, j) == doctest::Approx(direct).epsilon(1e-12));
      CHECK(direct == doctest::Approx(log_density_ratio(spec, b.y.row(j), b.x.row(i))).epsilon(1e-14));
    }
  }
  // Against the three-density closed form for one coordinate.
  const double x = 0.3, y = -1.2, r = 0.6;
  const double joint = -std::log(2 * M_PI) - 0.5 * std::log(1 - r * r) -
                       (x * x - 2 * r * x * y + y * y) / (2 * (1 - r * r));
  const double marg = -std::log(2 * M_PI) - 0.5 * (x * x + y * y);
  const double xs[] = {x};
  const double ys[] = {y};
  CHECK(log_density_ratio({1, r}, xs, ys) == doctest::Approx(joint - marg).epsilon(1e-14));
  CHECK(log_density_ratio({1, 0.0}, xs, ys) == 0.0);
  CHECK_THROWS_AS(log_density_ratio(spec, b.x.row(0), std::span<const double>(xs)), DimensionError);
}

TEST_CASE("ratio moments and Rényi divergences in closed form") {
  const GaussianPairSpec spec{3, 0.4};
  CHECK(ratio_moment_under_product(spec, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ratio_moment_under_product(spec, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  // Rényi of order 2 equals the MI for these Gaussians.
  CHECK(analytic_renyi(spec, 2.0) == doctest::Approx(analytic_mi(spec)).epsilon(1e-13));
  CHECK(analytic_renyi(spec, 1.0 + 1e-7) == doctest::Approx(analytic_mi(spec)).epsilon(1e-5));
  CHECK(std::isinf(analytic_renyi({1, 0.6}, 3.0)));
  // MC check of the second moment under the product measure.
  const GaussianPairSpec small{1, 0.3};
  const PairBatch b = sample_pair_batch(small, 400000, 8);
  std::vector<double> r2;
  for (std::size_t i = 0; i + 1 < b.x.rows(); i += 2) {
    r2.push_back(std::exp(2.0 * log_density_ratio(small, b.x.row(i), b.y.row(i + 1))));
  }
  const Moments m = moments(r2);
  CHECK(std::abs(m.mean - ratio_moment_under_product(small, 2.0)) <= 3.0 * m.se);
}

TEST_CASE("skew oracle critic") {
  CHECK(skew_oracle_critic(1.7, 0.0) == 1.7);
  const double a = 0.25;
  const double lr = 2.0;
  const double r = std::exp(lr);
  CHECK(skew_oracle_critic(lr, a) == doctest::Approx(std::log(r / (a * r + 1 - a))).epsilon(1e-14));
  CHECK(skew_oracle_critic(500.0, a) == doctest::Approx(std::log(1.0 / a)).epsilon(1e-12));
  CHECK(skew_oracle_critic(-500.0, a) == doctest::Approx(-500.0 - std::log(1 - a)).epsilon(1e-12));
}

TEST_CASE("staircase schedule") {
  StaircaseSchedule s;
  CHECK(s.mi_at_level(0) == 2.0);
  CHECK(s.mi_at_level(3) == 16.0);
  CHECK(s.total_steps() == 16000);
  CHECK(s.level_of_step(3999) == 0);
  CHECK(s.level_of_step(4000) == 1);
}
