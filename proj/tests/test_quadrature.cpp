#include <cmath>

#include "doctest.h"
#include "divlab/error.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/quadrature.hpp"
#include "divlab/variance_lab.hpp"

using namespace divlab;

namespace {

// Trapezoid rule on a uniform grid over [-L, L]², in the original (x, y)
// coordinates; for smooth Gaussian-tailed integrands it converges
// geometrically in the grid spacing.
template <class F>
double trapezoid_2d(F f, double half_width, int cells) {
  const double h = 2.0 * half_width / cells;
  double s = 0.0;
  for (int i = 0; i <= cells; ++i) {
    const double x = -half_width + i * h;
    const double wx = (i == 0 || i == cells) ? 0.5 : 1.0;
    for (int j = 0; j <= cells; ++j) {
      const double y = -half_width + j * h;
      const double wy = (j == 0 || j == cells) ? 0.5 : 1.0;
      s += wx * wy * f(x, y);
    }
  }
  return s * h * h;
}

double log_joint(double x, double y, double rho) {
  const double q = 1.0 - rho * rho;
  return -std::log(2.0 * M_PI) - 0.5 * std::log(q) - (x * x - 2.0 * rho * x * y + y * y) / (2.0 * q);
}

double log_product(double x, double y) { return -std::log(2.0 * M_PI) - 0.5 * (x * x + y * y); }

double grid_skew_kl(double rho, double alpha) {
  return trapezoid_2d(
      [&](double x, double y) {
        const double lp = log_joint(x, y, rho);
        const double lq = log_product(x, y);
        const double lm = std::log(alpha * std::exp(lp) + (1.0 - alpha) * std::exp(lq));
        return std::exp(lp) * (lp - lm);
      },
      10.0, 1600);
}

double grid_skew_renyi(double rho, double alpha, double gamma) {
  const double integral = trapezoid_2d(
      [&](double x, double y) {
        const double lp = log_joint(x, y, rho);
        const double lq = log_product(x, y);
        const double lm = std::log(alpha * std::exp(lp) + (1.0 - alpha) * std::exp(lq));
        return std::exp(gamma * lp + (1.0 - gamma) * lm);
      },
      10.0, 1600);
  return std::log(integral) / (gamma * (gamma - 1.0));
}

}  // namespace

TEST_CASE("1-D rule on smooth integrands") {
  const auto s = integrate([](double x) { return std::sin(x); }, 0.0, M_PI);
  CHECK(s.converged);
  CHECK(s.value == doctest::Approx(2.0).epsilon(1e-13));
  const auto g = integrate([](double x) { return std::exp(-x * x); }, -12.0, 12.0);
  CHECK(g.value == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-13));
  const auto k = integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0);
  CHECK(k.value == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("2-D rule on a separable Gaussian") {
  const auto r = integrate_2d([](double x, double y) { return std::exp(-x * x - 2.0 * y * y); },
                              -10.0, 10.0, -10.0, 10.0);
  CHECK(r.value == doctest::Approx(M_PI / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("Gaussian KL by quadrature matches the closed form") {
  const auto r = gaussian_kl_quadrature(0.0, 1.0, 1.0, 1.0);
  CHECK(std::abs(r.value - 0.5) <= 1e-8);
  const double mp = 0.3, sp = 0.7, mq = -1.1, sq = 1.9;
  const double closed = std::log(sq / sp) + (sp * sp + (mp - mq) * (mp - mq)) / (2 * sq * sq) - 0.5;
  CHECK(gaussian_kl_quadrature(mp, sp, mq, sq).value == doctest::Approx(closed).epsilon(1e-10));
}

TEST_CASE("skew KL at alpha = 0 is the analytic MI") {
  for (double mi : {0.1, 0.5, 1.0, 2.0}) {
    const GaussianPairSpec spec{1, rho_for_mi(1, mi)};
    CHECK(std::abs(skew_kl_quadrature(spec, 0.0) - mi) <= 1e-6);
  }
  CHECK_THROWS_AS(skew_kl_quadrature({2, 0.5}, 0.1), ConfigError);
}

TEST_CASE("skew divergences agree with a dense grid oracle") {
  for (double rho : {0.3, 0.8}) {
    const GaussianPairSpec spec{1, rho};
    for (double a : {1.0 / 128.0, 0.125, 0.25}) {
      CHECK(skew_kl_quadrature(spec, a) == doctest::Approx(grid_skew_kl(rho, a)).epsilon(1e-7));
      CHECK(skew_renyi_quadrature(spec, a, 2.0) ==
            doctest::Approx(grid_skew_renyi(rho, a, 2.0)).epsilon(1e-7));
    }
  }
}

TEST_CASE("skew Rényi at alpha = 0 matches the closed form") {
  for (double g : {0.5, 2.0, 2.5}) {
    const GaussianPairSpec spec{1, 0.5};
    CHECK(skew_renyi_quadrature(spec, 0.0, g) == doctest::Approx(analytic_renyi(spec, g)).epsilon(1e-8));
  }
}

TEST_CASE("bias check: skewing shrinks KL and is monotone in alpha") {
  const BiasCheck zero = bias_check(0.0, 0.5);
  CHECK(zero.holds);
  CHECK(std::abs(zero.skew_kl - 0.5) <= 1e-6);
  const BiasCheck quarter = bias_check(0.25, 0.5);
  CHECK(quarter.holds);
  CHECK(quarter.skew_kl < 0.375);
  CHECK(quarter.skew_bound == doctest::Approx(0.375).epsilon(1e-6));
  for (double kl : {0.5, 1.0, 2.0}) {
    double prev = bias_check(0.0, kl).skew_kl;
    for (double a : {0.125, 0.25}) {
      const BiasCheck c = bias_check(a, kl);
      CHECK(c.holds);
      CHECK(c.skew_kl < prev);
      prev = c.skew_kl;
    }
  }
}

TEST_CASE("theorem bound evaluation") {
  CHECK(renyi_lower_bound(2.0, 0.0, 0.0) == 0.0);
  const double closed = std::exp(4.0 * 2.0) - 4.0;
  CHECK(renyi_lower_bound(2.0, 2.0, 0.0) == doctest::Approx(closed).epsilon(1e-14));
  const GaussianPairSpec s2{1, rho_for_mi(1, 2.0)};
  const GaussianPairSpec s4{1, rho_for_mi(1, 4.0)};
  // d = 1 Rényi of order 2 from quadrature versus the closed form.
  const double r2 = skew_renyi_quadrature(s2, 0.0, 2.0);
  CHECK(r2 == doctest::Approx(analytic_renyi(s2, 2.0)).epsilon(1e-7));
  const double b2 = renyi_lower_bound(2.0, 2.0, r2);
  const double b4 = renyi_lower_bound(2.0, 4.0, analytic_renyi(s4, 2.0));
  CHECK(b2 > 0.0);
  CHECK(b4 > b2);
  CHECK_THROWS_AS(renyi_lower_bound(1.0, 1.0, 1.0), ConfigError);
}
