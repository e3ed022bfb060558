#pragma once

// Mutual-information recovery from a critic trained on an α-skew objective.
// At the optimum e^{f}/Z = r/(α·r + 1 − α); estimating Z on the batch and
// inverting the skew gives r̂ = (1−α)·e^{f} / (Ẑ − α·e^{f}).

#include <cstddef>

#include "divlab/matrix.hpp"
#include "divlab/objectives.hpp"

namespace divlab {

struct RatioEstimate {
  double z_hat = 0.0;      // Ẑ; may overflow for huge scores, log_z_hat does not
  double log_z_hat = 0.0;
  Vector r_hat_pos;        // r̂ at the positive pairs
  Vector log_r_hat_pos;
  double mi_hat = 0.0;     // mean_i log r̂_i
};

/// Ẑ = (α/B)·Σ_i e^{pos_i} + ((1−α)/(B·K))·Σ_ij e^{neg_ij}. Scores must already
/// be temperature-scaled. Throws ConfigError for alpha outside [0, 1/2) and
/// NumericError naming the anchor when Ẑ − α·e^{pos_i} <= 0.
RatioEstimate estimate_mi(const ScoreTable& table, double alpha);

struct PerAnchorEstimate {
  Vector log_z;          // log Z_i, one per anchor
  Vector log_r_hat_pos;
  double mi_hat = 0.0;
};

/// Row-wise normalization Z_i = α·e^{pos_i} + (1−α)·mean_j e^{neg_ij}, then the
/// same skew inversion. Never hits the Ẑ − α·e^{f} pathology: the result
/// reduces to pos_i − log mean_j e^{neg_ij}, independent of α.
PerAnchorEstimate estimate_mi_per_anchor(const ScoreTable& table, double alpha);

/// The ratio transform r = (1−α)·q / (1 − α·q) for q = e^{f}/Ẑ; algebraically
/// the same r̂ as estimate_mi produces from the shared Ẑ.
double unskew_ratio(double normalized_ratio, double alpha);

}  // namespace divlab
