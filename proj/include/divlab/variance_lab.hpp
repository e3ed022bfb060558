#pragma once

// Monte Carlo study of estimator variance with the exact oracle critic on
// correlated Gaussians: no training noise, only sampling noise.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "divlab/gaussian.hpp"
#include "divlab/objectives.hpp"

namespace divlab {

struct VarianceReport {
  ObjectiveSpec objective;
  std::size_t dim = 0;
  double true_kl = 0.0;
  std::size_t n = 0;
  std::size_t repetitions = 0;
  double empirical_mean = 0.0;
  double empirical_variance = 0.0;  // unbiased, across repetitions
  bool variance_infinite = false;   // some repetition overflowed
  /// Asymptotic lower bound on n·Var; only for the unskewed Rényi objective
  /// with γ > 1.
  std::optional<double> theorem_lower_bound;

  double standard_error() const;
  double scaled_variance() const { return static_cast<double>(n) * empirical_variance; }
};

struct VarianceSweepOptions {
  std::size_t dim = 20;
  std::size_t threads = 1;
};

/// The optimal critic for spec at a pair with log density ratio log_r,
/// already multiplied by tau so that the objective sees it unscaled:
/// log r (unskewed), log(r/(α·r + 1 − α)) (skewed), plus 1 for NWJ kinds.
double oracle_score(const ObjectiveSpec& spec, double log_ratio);

/// In-batch oracle-scored table for one batch of n pairs.
ScoreTable oracle_table(const ObjectiveSpec& spec, const GaussianPairSpec& pair, std::size_t n,
                        std::uint64_t seed);

/// One report per KL value (nats, mapped to rho with rho_for_mi at opts.dim).
/// Repetition r of the cell for KL value k draws its batch from a stream
/// derived from (seed, bits of k, r), so every cell is reproducible on its
/// own. Throws ConfigError for reps < 100, n < 2, or a negative KL.
std::vector<VarianceReport> variance_sweep(const ObjectiveSpec& spec,
                                           const std::vector<double>& kl_values, std::size_t n,
                                           std::size_t reps, std::uint64_t seed,
                                           const VarianceSweepOptions& opts = {});

/// max(0, (e^{γ²·kl} − γ²) / e^{2γ(γ−1)·renyi}). Throws ConfigError for
/// gamma <= 1.
double renyi_lower_bound(double gamma, double kl, double renyi_gamma_div);

struct BiasCheck {
  double alpha = 0.0;
  double kl = 0.0;        // D_KL(P_XY ‖ P_X P_Y) by quadrature
  double skew_kl = 0.0;   // D_KL(P_XY ‖ α·P_XY + (1 − α)·P_X P_Y) by quadrature
  double skew_bound = 0.0;  // (1 − α)·kl
  bool holds = false;     // skew_kl <= skew_bound <= kl
};

/// d = 1 quadrature comparison of the skew divergence against (1 − α)·KL.
/// Throws NumericError when quadrature does not converge.
BiasCheck bias_check(double alpha, double kl);

}  // namespace divlab
