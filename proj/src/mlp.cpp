#include "divlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

namespace divlab {

namespace {

std::vector<DenseLayer> zero_layers(const std::vector<std::size_t>& widths) {
  std::vector<DenseLayer> layers;
  layers.reserve(widths.size() - 1);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    layers.push_back({Matrix(widths[l], widths[l + 1]), Vector(widths[l + 1], 0.0)});
  }
  return layers;
}

void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) {
    throw DimensionError("Mlp: need at least input and output widths");
  }
  for (std::size_t w : widths) {
    if (w == 0) {
      throw DimensionError("Mlp: zero-width layer");
    }
  }
}

template <class Layers>
auto& flat_entry(Layers& layers, std::size_t k) {
  for (auto& layer : layers) {
    const std::size_t nw = layer.weight.size();
    if (k < nw) {
      return layer.weight.values()[k];
    }
    k -= nw;
    if (k < layer.bias.size()) {
      return layer.bias[k];
    }
    k -= layer.bias.size();
  }
  throw DimensionError("parameter index out of range");
}

// out = x·W + b
Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix out = matmul(x, layer.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      r[j] += layer.bias[j];
    }
  }
  return out;
}

}  // namespace

void AdamConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw ConfigError("adam: learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) {
    throw ConfigError("adam: eps must be positive");
  }
}

bool MlpGradients::all_finite() const noexcept {
  for (const auto& layer : layers) {
    if (!layer.weight.all_finite()) {
      return false;
    }
    for (double b : layer.bias) {
      if (!std::isfinite(b)) {
        return false;
      }
    }
  }
  return true;
}

Mlp::Mlp(std::vector<std::size_t> widths, std::uint64_t seed) : widths_(std::move(widths)) {
  check_widths(widths_);
  layers_ = zero_layers(widths_);
  Rng rng(seed);
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (double& w : layer.weight.values()) {
      w = rng.uniform(-limit, limit);
    }
  }
  adam_ = {zero_layers(widths_), zero_layers(widths_), 0};
}

Mlp Mlp::zeros(std::vector<std::size_t> widths) {
  check_widths(widths);
  Mlp net;
  net.widths_ = std::move(widths);
  net.layers_ = zero_layers(net.widths_);
  net.adam_ = {zero_layers(net.widths_), zero_layers(net.widths_), 0};
  return net;
}

std::size_t Mlp::param_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += layer.weight.size() + layer.bias.size();
  }
  return n;
}

double& Mlp::param(std::size_t k) { return flat_entry(layers_, k); }
double Mlp::param(std::size_t k) const { return flat_entry(layers_, k); }

MlpGradients Mlp::zero_gradients() const { return {zero_layers(widths_)}; }

double& grad_entry(MlpGradients& g, std::size_t k) { return flat_entry(g.layers, k); }
double grad_entry(const MlpGradients& g, std::size_t k) { return flat_entry(g.layers, k); }

MlpCache forward(const Mlp& net, const Matrix& x) {
  if (x.cols() != net.in_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " columns, network expects " + std::to_string(net.in_dim()));
  }
  MlpCache cache;
  const auto& layers = net.layers();
  cache.inputs.reserve(layers.size());
  cache.pre.reserve(layers.size());
  cache.inputs.push_back(x);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cache.pre.push_back(affine(cache.inputs[l], layers[l]));
    if (l + 1 < layers.size()) {
      Matrix act = cache.pre[l];
      for (double& v : act.values()) {
        v = v > 0.0 ? v : 0.0;
      }
      cache.inputs.push_back(std::move(act));
    }
  }
  cache.output = cache.pre.back();
  return cache;
}

MlpGradients backward(const Mlp& net, const MlpCache& cache, const Matrix& grad_out) {
  const auto& layers = net.layers();
  if (cache.pre.size() != layers.size() || cache.output.cols() != net.out_dim()) {
    throw DimensionError("backward: cache does not belong to this network");
  }
  if (grad_out.rows() != cache.output.rows() || grad_out.cols() != cache.output.cols()) {
    throw DimensionError("backward: stale cache, batch " + std::to_string(cache.output.rows()) +
                         " vs gradient batch " + std::to_string(grad_out.rows()));
  }
  MlpGradients grads = net.zero_gradients();
  Matrix delta = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    grads.layers[l].weight = matmul_tn(cache.inputs[l], delta);
    auto& gb = grads.layers[l].bias;
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto r = delta.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) {
        gb[j] += r[j];
      }
    }
    if (l == 0) {
      break;
    }
    Matrix prev = matmul_nt(delta, layers[l].weight);
    const Matrix& pre = cache.pre[l - 1];
    for (std::size_t k = 0; k < prev.size(); ++k) {
      if (!(pre.values()[k] > 0.0)) {
        prev.values()[k] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

void adam_step(Mlp& net, const MlpGradients& grads, const AdamConfig& cfg) {
  if (grads.layers.size() != net.layers().size()) {
    throw DimensionError("adam_step: gradient layer count mismatch");
  }
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    if (grads.layers[l].weight.rows() != net.layers()[l].weight.rows() ||
        grads.layers[l].weight.cols() != net.layers()[l].weight.cols() ||
        grads.layers[l].bias.size() != net.layers()[l].bias.size()) {
      throw DimensionError("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    }
  }
  if (!grads.all_finite()) {
    throw NumericError("adam_step: non-finite gradient, parameters left untouched");
  }
  auto& moments = net.adam();
  moments.step += 1;
  const double t = static_cast<double>(moments.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](std::span<double> p, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  };
  for (std::size_t l = 0; l < grads.layers.size(); ++l) {
    auto& layer = net.layers()[l];
    update(layer.weight.values(), grads.layers[l].weight.values(),
           moments.first[l].weight.values(), moments.second[l].weight.values());
    update(layer.bias, grads.layers[l].bias, moments.first[l].bias, moments.second[l].bias);
  }
}

CriticNet::CriticNet(std::size_t in_dim, std::size_t hidden, std::uint64_t seed)
    : net_({in_dim, hidden, 1}, seed) {}

CriticNet::CriticNet(Mlp net) : net_(std::move(net)) {
  if (net_.widths().size() != 3 || net_.out_dim() != 1) {
    throw DimensionError("CriticNet: expected in → hidden → 1 network");
  }
}

CriticForward forward(const CriticNet& net, const Matrix& pairs) {
  CriticForward out;
  out.cache = forward(net.mlp(), pairs);
  out.scores.assign(out.cache.output.values().begin(), out.cache.output.values().end());
  for (std::size_t i = 0; i < out.scores.size(); ++i) {
    if (!std::isfinite(out.scores[i])) {
      throw NumericError("critic forward: non-finite score at row " + std::to_string(i));
    }
  }
  return out;
}

MlpGradients backward(const CriticNet& net, const MlpCache& cache,
                      std::span<const double> grad_scores) {
  if (grad_scores.size() != cache.output.rows()) {
    throw DimensionError("critic backward: stale cache, batch " +
                         std::to_string(cache.output.rows()) + " vs " +
                         std::to_string(grad_scores.size()) + " gradients");
  }
  Matrix g(grad_scores.size(), 1, Vector(grad_scores.begin(), grad_scores.end()));
  return backward(net.mlp(), cache, g);
}

void adam_step(CriticNet& net, const MlpGradients& grads, const AdamConfig& cfg) {
  adam_step(net.mlp(), grads, cfg);
}

namespace {

struct SplitFirstLayer {
  Matrix hx;  // x·W1[:d] + b1   (B × H)
  Matrix hy;  // y·W1[d:]        (B × H)
};

SplitFirstLayer split_first_layer(const CriticNet& net, const Matrix& x, const Matrix& y) {
  const std::size_t d = x.cols();
  if (y.cols() + d != net.in_dim()) {
    throw DimensionError("score_all_pairs: x/y widths " + std::to_string(d) + "+" +
                         std::to_string(y.cols()) + " do not sum to critic input " +
                         std::to_string(net.in_dim()));
  }
  if (x.rows() != y.rows()) {
    throw DimensionError("score_all_pairs: x and y batch sizes differ");
  }
  const Matrix& w1 = net.w1();
  Matrix wx = row_slice(w1, 0, d);
  Matrix wy = row_slice(w1, d, w1.rows());
  SplitFirstLayer s{matmul(x, wx), matmul(y, wy)};
  for (std::size_t i = 0; i < s.hx.rows(); ++i) {
    auto r = s.hx.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      r[k] += net.b1()[k];
    }
  }
  return s;
}

}  // namespace

Matrix score_all_pairs(const CriticNet& net, const Matrix& x, const Matrix& y) {
  const SplitFirstLayer s = split_first_layer(net, x, y);
  const std::size_t b = x.rows();
  const std::size_t h = net.hidden();
  const double* w2 = net.w2().values().data();
  const double b2 = net.b2();
  Matrix scores(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    const double* a = s.hx.row(i).data();
    for (std::size_t j = 0; j < b; ++j) {
      const double* c = s.hy.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        const double z = a[k] + c[k];
        acc += w2[k] * (z > 0.0 ? z : 0.0);
      }
      scores(i, j) = acc + b2;
    }
    for (std::size_t j = 0; j < b; ++j) {
      if (!std::isfinite(scores(i, j))) {
        throw NumericError("critic forward: non-finite score at pair (" + std::to_string(i) +
                           ", " + std::to_string(j) + ")");
      }
    }
  }
  return scores;
}

MlpGradients backward_all_pairs(const CriticNet& net, const Matrix& x, const Matrix& y,
                                const Matrix& grad_scores) {
  const std::size_t b = x.rows();
  if (grad_scores.rows() != b || grad_scores.cols() != b) {
    throw DimensionError("backward_all_pairs: gradient table is not " + std::to_string(b) + "x" +
                         std::to_string(b));
  }
  const SplitFirstLayer s = split_first_layer(net, x, y);
  const std::size_t h = net.hidden();
  const double* w2 = net.w2().values().data();

  Matrix grad_hx(b, h);
  Matrix grad_hy(b, h);
  Vector grad_w2(h, 0.0);
  double grad_b2 = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* a = s.hx.row(i).data();
    double* ga = grad_hx.row(i).data();
    for (std::size_t j = 0; j < b; ++j) {
      const double g = grad_scores(i, j);
      if (g == 0.0) {
        continue;
      }
      grad_b2 += g;
      const double* c = s.hy.row(j).data();
      double* gc = grad_hy.row(j).data();
      for (std::size_t k = 0; k < h; ++k) {
        const double z = a[k] + c[k];
        const double on = z > 0.0 ? 1.0 : 0.0;
        const double t = g * w2[k] * on;
        ga[k] += t;
        gc[k] += t;
        grad_w2[k] += g * z * on;
      }
    }
  }

  MlpGradients grads = net.mlp().zero_gradients();
  const std::size_t d = x.cols();
  const Matrix gwx = matmul_tn(x, grad_hx);
  const Matrix gwy = matmul_tn(y, grad_hy);
  Matrix& gw1 = grads.layers[0].weight;
  std::copy(gwx.values().begin(), gwx.values().end(), gw1.values().begin());
  std::copy(gwy.values().begin(), gwy.values().end(),
            gw1.values().begin() + static_cast<std::ptrdiff_t>(d * h));
  auto& gb1 = grads.layers[0].bias;
  for (std::size_t i = 0; i < b; ++i) {
    const auto r = grad_hx.row(i);
    for (std::size_t k = 0; k < h; ++k) {
      gb1[k] += r[k];
    }
  }
  std::copy(grad_w2.begin(), grad_w2.end(), grads.layers[1].weight.values().begin());
  grads.layers[1].bias[0] = grad_b2;
  return grads;
}

}  // namespace divlab
