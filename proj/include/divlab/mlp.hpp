#pragma once

// Fully connected ReLU networks with hand-written backpropagation and Adam.
// Hidden layers use ReLU with relu'(0) := 0; the output layer is linear.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "divlab/matrix.hpp"

namespace divlab {

struct DenseLayer {
  Matrix weight;  // in × out
  Vector bias;    // out
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Throws ConfigError unless 0 < lr and 0 <= beta1, beta2 < 1.
  void validate() const;
};

struct MlpGradients {
  std::vector<DenseLayer> layers;

  bool all_finite() const noexcept;
};

struct AdamMoments {
  std::vector<DenseLayer> first;
  std::vector<DenseLayer> second;
  std::int64_t step = 0;
};

/// Activation record of one forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;  // inputs[l] is the input of layer l
  std::vector<Matrix> pre;     // pre[l] = inputs[l]·W_l + b_l
  Matrix output;               // == pre.back()
};

class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}. Weights are Glorot-uniform on
  /// ±sqrt(6/(fan_in + fan_out)) from `seed`; biases start at zero.
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed);

  /// Network of the given shape with every parameter zero.
  static Mlp zeros(std::vector<std::size_t> widths);

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  AdamMoments& adam() noexcept { return adam_; }
  const AdamMoments& adam() const noexcept { return adam_; }

  /// Flat parameter view: layer by layer, weights (row-major) then bias.
  std::size_t param_count() const noexcept;
  double& param(std::size_t k);
  double param(std::size_t k) const;

  /// Gradient container with this network's shapes, zero filled.
  MlpGradients zero_gradients() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<DenseLayer> layers_;
  AdamMoments adam_;
};

double& grad_entry(MlpGradients& g, std::size_t k);
double grad_entry(const MlpGradients& g, std::size_t k);

MlpCache forward(const Mlp& net, const Matrix& x);
MlpGradients backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out);

/// Bias-corrected Adam update. Throws NumericError, leaving the network
/// untouched, when any gradient is non-finite.
void adam_step(Mlp& net, const MlpGradients& grads, const AdamConfig& cfg);

/// Joint critic: in_dim → hidden → 1 with a ReLU hidden layer.
class CriticNet {
 public:
  static constexpr std::size_t kDefaultHidden = 256;

  CriticNet(std::size_t in_dim, std::size_t hidden, std::uint64_t seed);
  explicit CriticNet(Mlp net);

  std::size_t in_dim() const { return net_.in_dim(); }
  std::size_t hidden() const { return net_.widths()[1]; }

  const Matrix& w1() const { return net_.layers()[0].weight; }
  const Vector& b1() const { return net_.layers()[0].bias; }
  const Matrix& w2() const { return net_.layers()[1].weight; }
  double b2() const { return net_.layers()[1].bias[0]; }

  Mlp& mlp() noexcept { return net_; }
  const Mlp& mlp() const noexcept { return net_; }

 private:
  Mlp net_;
};

struct CriticForward {
  Vector scores;
  MlpCache cache;
};

/// Scores each row of `pairs`. Throws DimensionError on width mismatch and
/// NumericError naming the first row with a non-finite score.
CriticForward forward(const CriticNet& net, const Matrix& pairs);
/// Throws DimensionError when the cache came from a different batch size.
MlpGradients backward(const CriticNet& net, const MlpCache& cache,
                      std::span<const double> grad_scores);
void adam_step(CriticNet& net, const MlpGradients& grads, const AdamConfig& cfg);

/// scores(i, j) = f([x_i, y_j]) for every pair, using the split of the first
/// layer into x and y blocks so the cost is O(B²·hidden) instead of
/// O(B²·hidden·in_dim).
Matrix score_all_pairs(const CriticNet& net, const Matrix& x, const Matrix& y);
/// Parameter gradients of Σ_ij grad_scores(i, j)·f([x_i, y_j]).
MlpGradients backward_all_pairs(const CriticNet& net, const Matrix& x, const Matrix& y,
                                const Matrix& grad_scores);

}  // namespace divlab
