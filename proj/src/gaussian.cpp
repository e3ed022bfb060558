#include "divlab/gaussian.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

namespace divlab {

void GaussianPairSpec::validate() const {
  if (dim == 0) {
    throw ConfigError("GaussianPairSpec: dim must be positive");
  }
  if (!(std::abs(rho) < 1.0)) {
    throw ConfigError("GaussianPairSpec: |rho| must be < 1, got " + std::to_string(rho));
  }
}

double StaircaseSchedule::mi_at_level(std::size_t level) const {
  return initial_mi * std::ldexp(1.0, static_cast<int>(level));
}

PairBatch sample_pair_batch(const GaussianPairSpec& spec, std::size_t batch, std::uint64_t seed) {
  spec.validate();
  if (batch < 2) {
    throw ConfigError("sample_pair_batch: batch must be >= 2 to contain a negative pair");
  }
  Rng rng(seed);
  const double noise = std::sqrt(1.0 - spec.rho * spec.rho);
  PairBatch out{Matrix(batch, spec.dim), Matrix(batch, spec.dim)};
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t k = 0; k < spec.dim; ++k) {
      const double xv = rng.normal();
      const double eps = rng.normal();
      out.x(i, k) = xv;
      out.y(i, k) = spec.rho * xv + noise * eps;
    }
  }
  return out;
}

double analytic_mi(const GaussianPairSpec& spec) {
  spec.validate();
  return -0.5 * static_cast<double>(spec.dim) * std::log1p(-spec.rho * spec.rho);
}

double rho_for_mi(std::size_t dim, double target_mi) {
  if (dim == 0 || !(target_mi >= 0.0)) {
    throw ConfigError("rho_for_mi: need dim > 0 and target_mi >= 0");
  }
  return std::sqrt(-std::expm1(-2.0 * target_mi / static_cast<double>(dim)));
}

double log_density_ratio(const GaussianPairSpec& spec, std::span<const double> x,
                         std::span<const double> y) {
  if (x.size() != spec.dim || y.size() != spec.dim) {
    throw DimensionError("log_density_ratio: vectors must have length " +
                         std::to_string(spec.dim));
  }
  const double r2 = spec.rho * spec.rho;
  const double one_minus = 1.0 - r2;
  double quad = 0.0;
  for (std::size_t k = 0; k < spec.dim; ++k) {
    quad += r2 * (x[k] * x[k] + y[k] * y[k]) - 2.0 * spec.rho * x[k] * y[k];
  }
  return -0.5 * static_cast<double>(spec.dim) * std::log1p(-r2) - quad / (2.0 * one_minus);
}

Matrix log_density_ratio_table(const GaussianPairSpec& spec, const Matrix& x, const Matrix& y) {
  spec.validate();
  if (x.cols() != spec.dim || y.cols() != spec.dim) {
    throw DimensionError("log_density_ratio_table: width must equal spec.dim");
  }
  const double r2 = spec.rho * spec.rho;
  const double denom = 2.0 * (1.0 - r2);
  const double offset = -0.5 * static_cast<double>(spec.dim) * std::log1p(-r2);
  auto sq_norms = [](const Matrix& m) {
    Vector n(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (double v : m.row(i)) {
        n[i] += v * v;
      }
    }
    return n;
  };
  const Vector nx = sq_norms(x);
  const Vector ny = sq_norms(y);
  Matrix table = matmul_nt(x, y);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    auto r = table.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] = offset - (r2 * (nx[i] + ny[j]) - 2.0 * spec.rho * r[j]) / denom;
    }
  }
  return table;
}

double ratio_moment_under_product(const GaussianPairSpec& spec, double k) {
  spec.validate();
  const double r2 = spec.rho * spec.rho;
  const double shrink = 1.0 - (k - 1.0) * (k - 1.0) * r2;
  if (!(shrink > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  const double log_per_dim = 0.5 * (1.0 - k) * std::log1p(-r2) - 0.5 * std::log(shrink);
  return std::exp(static_cast<double>(spec.dim) * log_per_dim);
}

double analytic_renyi(const GaussianPairSpec& spec, double gamma) {
  if (gamma == 0.0 || gamma == 1.0) {
    throw ConfigError("analytic_renyi: order must differ from 0 and 1");
  }
  spec.validate();
  const double r2 = spec.rho * spec.rho;
  const double shrink = 1.0 - (gamma - 1.0) * (gamma - 1.0) * r2;
  if (!(shrink > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  const double log_moment = static_cast<double>(spec.dim) *
                            (0.5 * (1.0 - gamma) * std::log1p(-r2) - 0.5 * std::log(shrink));
  return log_moment / (gamma * (gamma - 1.0));
}

double skew_oracle_critic(double log_ratio, double alpha) {
  if (alpha == 0.0) {
    return log_ratio;
  }
  // log(α·r + 1 − α) via log-add-exp of (log α + log r, log(1 − α)).
  const double a = std::log(alpha) + log_ratio;
  const double b = std::log1p(-alpha);
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return log_ratio - (hi + std::log1p(std::exp(lo - hi)));
}

}  // namespace divlab
