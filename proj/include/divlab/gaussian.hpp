#pragma once

// Correlated Gaussian pairs: X, Y ∈ R^d with independent coordinates, each
// coordinate pair jointly normal with unit variances and correlation rho.
// All quantities are in nats.

#include <cstddef>
#include <cstdint>
#include <span>

#include "divlab/matrix.hpp"

namespace divlab {

struct GaussianPairSpec {
  std::size_t dim = 1;
  double rho = 0.0;

  /// Throws ConfigError for dim == 0 or |rho| >= 1.
  void validate() const;
};

/// Row i of x and row i of y form a positive pair; (x_i, y_j), i != j, are
/// negative pairs.
struct PairBatch {
  Matrix x;
  Matrix y;
};

struct StaircaseSchedule {
  double initial_mi = 2.0;
  std::size_t steps_per_level = 4000;
  std::size_t num_levels = 4;

  /// initial_mi · 2^level
  double mi_at_level(std::size_t level) const;
  std::size_t total_steps() const { return steps_per_level * num_levels; }
  std::size_t level_of_step(std::size_t step) const { return step / steps_per_level; }
};

/// Y = rho·X + sqrt(1 − rho²)·ε with Box-Muller normals from `seed`.
/// Throws ConfigError when batch < 2.
PairBatch sample_pair_batch(const GaussianPairSpec& spec, std::size_t batch, std::uint64_t seed);

/// −(d/2)·ln(1 − rho²)
double analytic_mi(const GaussianPairSpec& spec);

/// sqrt(1 − exp(−2·target/d)); inverse of analytic_mi on rho >= 0.
double rho_for_mi(std::size_t dim, double target_mi);

/// log dP_XY/(dP_X dP_Y) at (x, y).
double log_density_ratio(const GaussianPairSpec& spec, std::span<const double> x,
                         std::span<const double> y);

/// table(i, j) = log_density_ratio(x_i, y_j), computed through x·yᵀ.
Matrix log_density_ratio_table(const GaussianPairSpec& spec, const Matrix& x, const Matrix& y);

/// Closed-form Rényi divergence R_γ(P_XY ‖ P_X P_Y) with the
/// 1/(γ(γ−1)) normalization, finite only when (γ−1)²ρ² < 1 (returns +inf
/// otherwise). Additive over coordinates.
double analytic_renyi(const GaussianPairSpec& spec, double gamma);

/// Closed-form E_{P_X P_Y}[r^k] (the k-th moment of the density ratio under
/// the product of marginals); +inf when it diverges.
double ratio_moment_under_product(const GaussianPairSpec& spec, double k);

/// Oracle critic for the α-skew objectives: log(r / (α·r + 1 − α)) given
/// log r. alpha == 0 returns log r unchanged.
double skew_oracle_critic(double log_ratio, double alpha);

}  // namespace divlab
