#include "divlab/variance_lab.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "divlab/error.hpp"
#include "divlab/parallel.hpp"
#include "divlab/quadrature.hpp"
#include "divlab/rng.hpp"

namespace divlab {

namespace {

bool is_nwj(ObjectiveKind kind) {
  return kind == ObjectiveKind::NWJ || kind == ObjectiveKind::SkewNWJ;
}

}  // namespace

double VarianceReport::standard_error() const {
  if (repetitions == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::sqrt(empirical_variance / static_cast<double>(repetitions));
}

double oracle_score(const ObjectiveSpec& spec, double log_ratio) {
  double f = skew_oracle_critic(log_ratio, spec.effective_alpha());
  if (is_nwj(spec.kind)) {
    f += 1.0;
  }
  return spec.tau * f;
}

ScoreTable oracle_table(const ObjectiveSpec& spec, const GaussianPairSpec& pair, std::size_t n,
                        std::uint64_t seed) {
  const PairBatch batch = sample_pair_batch(pair, n, seed);
  Matrix table = log_density_ratio_table(pair, batch.x, batch.y);
  for (double& v : table.values()) {
    v = oracle_score(spec, v);
  }
  return extract_pos_neg(table);
}

std::vector<VarianceReport> variance_sweep(const ObjectiveSpec& spec,
                                           const std::vector<double>& kl_values, std::size_t n,
                                           std::size_t reps, std::uint64_t seed,
                                           const VarianceSweepOptions& opts) {
  spec.validate();
  if (reps < 100) {
    throw ConfigError("variance_sweep: need at least 100 repetitions, got " +
                      std::to_string(reps));
  }
  if (n < 2) {
    throw ConfigError("variance_sweep: batch size must be at least 2");
  }
  std::vector<VarianceReport> reports;
  reports.reserve(kl_values.size());
  for (const double kl : kl_values) {
    if (!(kl >= 0.0) || !std::isfinite(kl)) {
      throw ConfigError("variance_sweep: KL values must be finite and non-negative");
    }
    const GaussianPairSpec pair{opts.dim, rho_for_mi(opts.dim, kl)};
    const std::uint64_t cell_seed = derive_seed(seed, {std::bit_cast<std::uint64_t>(kl)});

    std::vector<double> values(reps);
    parallel_for(reps, opts.threads, [&](std::size_t r) {
      values[r] = objective_value(oracle_table(spec, pair, n, derive_seed(cell_seed, {r})), spec);
    });

    VarianceReport rep;
    rep.objective = spec;
    rep.dim = opts.dim;
    rep.true_kl = kl;
    rep.n = n;
    rep.repetitions = reps;
    double mean = 0.0;
    double m2 = 0.0;
    bool finite = true;
    for (std::size_t r = 0; r < reps; ++r) {
      const double v = values[r];
      if (!std::isfinite(v)) {
        finite = false;
        break;
      }
      const double delta = v - mean;
      mean += delta / static_cast<double>(r + 1);
      m2 += delta * (v - mean);
    }
    const double variance = m2 / static_cast<double>(reps - 1);
    if (!finite || !std::isfinite(variance)) {
      rep.variance_infinite = true;
      rep.empirical_mean = finite ? mean : std::numeric_limits<double>::quiet_NaN();
      rep.empirical_variance = std::numeric_limits<double>::infinity();
    } else {
      rep.empirical_mean = mean;
      rep.empirical_variance = variance;
    }
    if (spec.kind == ObjectiveKind::RMLCPC && spec.effective_alpha() == 0.0 && spec.gamma > 1.0) {
      rep.theorem_lower_bound = renyi_lower_bound(spec.gamma, kl, analytic_renyi(pair, spec.gamma));
    }
    reports.push_back(rep);
  }
  return reports;
}

double renyi_lower_bound(double gamma, double kl, double renyi_gamma_div) {
  if (!(gamma > 1.0)) {
    throw ConfigError("renyi_lower_bound: order must exceed 1");
  }
  const double g2 = gamma * gamma;
  const double log_den = 2.0 * gamma * (gamma - 1.0) * renyi_gamma_div;
  const double first = std::exp(g2 * kl - log_den);
  const double second = g2 * std::exp(-log_den);
  const double bound = first - second;
  if (std::isnan(bound)) {
    return 0.0;
  }
  return bound > 0.0 ? bound : 0.0;
}

BiasCheck bias_check(double alpha, double kl) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw ConfigError("bias_check: alpha must lie in [0, 1/2)");
  }
  const GaussianPairSpec pair{1, rho_for_mi(1, kl)};
  BiasCheck out;
  out.alpha = alpha;
  out.kl = skew_kl_quadrature(pair, 0.0);
  out.skew_kl = alpha == 0.0 ? out.kl : skew_kl_quadrature(pair, alpha);
  out.skew_bound = (1.0 - alpha) * out.kl;
  out.holds = out.skew_kl <= out.skew_bound + 1e-9 && out.skew_bound <= out.kl + 1e-12;
  return out;
}

}  // namespace divlab
