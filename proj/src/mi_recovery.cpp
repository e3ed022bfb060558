#include "divlab/mi_recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "divlab/error.hpp"

namespace divlab {

RatioEstimate estimate_mi(const ScoreTable& table, double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw ConfigError("estimate_mi: alpha must lie in [0, 1/2)");
  }
  const std::size_t n = table.anchors();
  const std::size_t k = table.negatives();
  if (n == 0 || k == 0 || table.neg.rows() != n) {
    throw DimensionError("estimate_mi: malformed score table");
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (double v : table.pos) {
    shift = std::max(shift, v);
  }
  for (double v : table.neg.values()) {
    shift = std::max(shift, v);
  }
  if (!std::isfinite(shift)) {
    throw NumericError("estimate_mi: non-finite scores");
  }
  double pos_sum = 0.0;
  for (double v : table.pos) {
    pos_sum += std::exp(v - shift);
  }
  double neg_sum = 0.0;
  for (double v : table.neg.values()) {
    neg_sum += std::exp(v - shift);
  }
  const double nd = static_cast<double>(n);
  // Ẑ·e^{−shift}
  const double z_scaled = alpha * pos_sum / nd + (1.0 - alpha) * neg_sum / (nd * static_cast<double>(k));

  RatioEstimate est;
  est.log_z_hat = shift + std::log(z_scaled);
  est.z_hat = std::exp(est.log_z_hat);
  est.r_hat_pos.resize(n);
  est.log_r_hat_pos.resize(n);
  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(table.pos[i] - shift);
    const double rest = z_scaled - alpha * e;
    if (!(rest > 0.0)) {
      throw NumericError("estimate_mi: Z_hat - alpha*exp(pos) <= 0 at anchor " +
                         std::to_string(i) + " (enlarge the batch)");
    }
    const double log_r = std::log1p(-alpha) + (table.pos[i] - shift) - std::log(rest);
    est.log_r_hat_pos[i] = log_r;
    est.r_hat_pos[i] = std::exp(log_r);
    sum_log += log_r;
  }
  est.mi_hat = sum_log / nd;
  return est;
}

PerAnchorEstimate estimate_mi_per_anchor(const ScoreTable& table, double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw ConfigError("estimate_mi_per_anchor: alpha must lie in [0, 1/2)");
  }
  const std::size_t n = table.anchors();
  const std::size_t k = table.negatives();
  if (n == 0 || k == 0 || table.neg.rows() != n) {
    throw DimensionError("estimate_mi_per_anchor: malformed score table");
  }
  PerAnchorEstimate est;
  est.log_z.resize(n);
  est.log_r_hat_pos.resize(n);
  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = table.neg.row(i);
    double shift = table.pos[i];
    for (double v : row) {
      shift = std::max(shift, v);
    }
    if (!std::isfinite(shift)) {
      throw NumericError("estimate_mi_per_anchor: non-finite scores at anchor " + std::to_string(i));
    }
    double neg_sum = 0.0;
    for (double v : row) {
      neg_sum += std::exp(v - shift);
    }
    const double neg_mean = neg_sum / static_cast<double>(k);
    const double e = std::exp(table.pos[i] - shift);
    const double z = alpha * e + (1.0 - alpha) * neg_mean;
    est.log_z[i] = shift + std::log(z);
    // Z_i − α·e^{pos_i} = (1−α)·mean_j e^{neg_ij} > 0
    const double log_r = std::log1p(-alpha) + (table.pos[i] - shift) -
                         (std::log1p(-alpha) + std::log(neg_mean));
    est.log_r_hat_pos[i] = log_r;
    sum_log += log_r;
  }
  est.mi_hat = sum_log / static_cast<double>(n);
  return est;
}

double unskew_ratio(double normalized_ratio, double alpha) {
  return (1.0 - alpha) * normalized_ratio / (1.0 - alpha * normalized_ratio);
}

}  // namespace divlab
