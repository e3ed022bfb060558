#pragma once

// Contrastive representation learning on synthetic clusters: a base encoder
// trained against keys from its moving-average copy, with a cosine critic,
// a symmetrized loss over two global views plus optional local views, and a
// least-squares linear probe for evaluation.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "divlab/matrix.hpp"
#include "divlab/mlp.hpp"
#include "divlab/objectives.hpp"
#include "divlab/rng.hpp"

namespace divlab {

/// Row-wise unit-normalized representations and their norms.
struct CosineCache {
  Matrix q_unit;
  Matrix k_unit;
  Vector q_norm;
  Vector k_norm;
  double tau = 1.0;
};

/// scores(i, j) = zq_i·zk_j / (‖zq_i‖·‖zk_j‖·tau). Throws NumericError
/// naming the row when a representation has zero norm.
Matrix cosine_scores(const Matrix& zq, const Matrix& zk, double tau, CosineCache* cache = nullptr);
ScoreTable cosine_critic(const Matrix& zq, const Matrix& zk, double tau);
/// Gradient with respect to zq given the gradient with respect to the
/// B × B score table.
Matrix cosine_backward_q(const CosineCache& cache, const Matrix& grad_scores);

struct EncoderPair {
  Mlp base;
  Mlp momentum;
  double m = 0.99;
};

/// Encoder pair with identical initial weights in both networks.
EncoderPair make_encoder_pair(std::vector<std::size_t> widths, double m, std::uint64_t seed);

/// θ_k ← m·θ_k + (1 − m)·θ_q elementwise. Throws DimensionError on shape
/// mismatch and ConfigError for m outside [0, 1].
void ema_update(EncoderPair& pair);

struct SyntheticClusterSpec {
  std::size_t num_classes = 4;
  std::size_t input_dim = 64;
  std::size_t signal_dims = 4;     // leading coordinates carrying the class
  double center_scale = 3.0;       // centers ~ N(0, center_scale²) per signal coordinate
  double within_sigma = 0.5;       // spread of a sample around its center
  double nuisance_sigma = 8.0;     // remaining coordinates, redrawn for every view
  double aug_sigma = 0.5;          // additive noise on the signal coordinates
  double hard_multiplier = 4.0;
  bool hard = false;
  double mask_prob = 0.1;          // chance of zeroing each signal coordinate in a view
  double local_multiplier = 2.0;   // extra noise factor for local views
  std::size_t train_per_class = 512;
  std::size_t test_per_class = 256;

  /// Throws ConfigError on zero sizes, signal_dims > input_dim, negative
  /// scales, mask_prob outside [0, 1), or data that cannot vary
  /// (center_scale == within_sigma == 0).
  void validate() const;
  double view_sigma() const { return hard ? aug_sigma * hard_multiplier : aug_sigma; }
};

struct ClusterDataset {
  Matrix centers;       // num_classes × signal_dims
  Matrix train;         // signal coordinates only
  std::vector<std::size_t> train_labels;
  Matrix test;
  std::vector<std::size_t> test_labels;
};

ClusterDataset make_cluster_dataset(const SyntheticClusterSpec& spec, std::uint64_t seed);

/// Full input rows for signal rows: signal coordinates get N(0, noise²) noise
/// and independent masking with mask_prob; nuisance coordinates are fresh
/// N(0, nuisance_sigma²). noise = 0 with mask_prob ignored gives the probe view.
Matrix make_view(const SyntheticClusterSpec& spec, const Matrix& signal, double noise,
                 bool mask, Rng& rng);

struct SymmetricLoss {
  double loss = 0.0;               // −value(q1 vs k2) − value(q2 vs k1)
  std::size_t positives_per_direction = 0;
  MlpGradients base_grads;
  MlpGradients momentum_grads;     // always zero: keys are constants
};

/// The symmetrized loss over global views x1, x2 and local views, gathered
/// into one table per direction before the objective is evaluated once.
/// `objective.tau` is the cosine temperature.
SymmetricLoss symmetric_loss(const EncoderPair& pair, const Matrix& x1, const Matrix& x2,
                             const std::vector<Matrix>& locals, const ObjectiveSpec& objective);

struct SslTrainConfig {
  std::vector<std::size_t> widths;  // empty → {input_dim, 128, 128, 32}
  std::size_t epochs = 50;
  std::size_t batch = 128;
  std::size_t local_views = 0;
  double momentum = 0.99;
  AdamConfig adam;
  double probe_ridge = 1e-6;
};

struct ProbeReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// One-hot least squares on [features, 1] with a small ridge, solved in
/// closed form; accuracy is argmax agreement.
ProbeReport linear_probe(const Matrix& train_features, const std::vector<std::size_t>& train_labels,
                         const Matrix& test_features, const std::vector<std::size_t>& test_labels,
                         std::size_t num_classes, double ridge = 1e-6);

struct SslReport {
  EncoderPair encoders;
  std::vector<double> epoch_loss;  // mean loss per epoch
  ProbeReport initial_probe;       // frozen random-init base encoder
  ProbeReport probe;               // after training
};

/// Seeds: data from derive_seed(seed, {0}), encoders from {1}, batch order
/// and views from {2, epoch}, probe views from {3}.
SslReport ssl_train(const SyntheticClusterSpec& spec, const ObjectiveSpec& objective,
                    const SslTrainConfig& config, std::uint64_t seed);

}  // namespace divlab
