#include "divlab/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "divlab/error.hpp"

namespace divlab {

namespace {

Matrix unit_rows(const Matrix& z, Vector& norms, const char* which) {
  Matrix out(z.rows(), z.cols());
  norms.assign(z.rows(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto r = z.row(i);
    double s = 0.0;
    for (double v : r) {
      s += v * v;
    }
    const double n = std::sqrt(s);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw NumericError(std::string("cosine critic: ") + which + " row " + std::to_string(i) +
                         " has zero or non-finite norm");
    }
    norms[i] = n;
    auto o = out.row(i);
    for (std::size_t k = 0; k < r.size(); ++k) {
      o[k] = r[k] / n;
    }
  }
  return out;
}

void add_into(MlpGradients& acc, const MlpGradients& g) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    auto a = acc.layers[l].weight.values();
    const auto b = g.layers[l].weight.values();
    for (std::size_t k = 0; k < a.size(); ++k) {
      a[k] += b[k];
    }
    for (std::size_t k = 0; k < acc.layers[l].bias.size(); ++k) {
      acc.layers[l].bias[k] += g.layers[l].bias[k];
    }
  }
}

void check_same_shape(const Mlp& a, const Mlp& b) {
  if (a.widths() != b.widths()) {
    throw DimensionError("encoder pair: base and momentum shapes differ");
  }
}

}  // namespace

Matrix cosine_scores(const Matrix& zq, const Matrix& zk, double tau, CosineCache* cache) {
  if (zq.cols() != zk.cols()) {
    throw DimensionError("cosine critic: representation widths differ");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("cosine critic: tau must be positive");
  }
  CosineCache local;
  CosineCache& c = cache != nullptr ? *cache : local;
  c.q_unit = unit_rows(zq, c.q_norm, "query");
  c.k_unit = unit_rows(zk, c.k_norm, "key");
  c.tau = tau;
  Matrix s = matmul_nt(c.q_unit, c.k_unit);
  for (double& v : s.values()) {
    v /= tau;
  }
  return s;
}

ScoreTable cosine_critic(const Matrix& zq, const Matrix& zk, double tau) {
  return extract_pos_neg(cosine_scores(zq, zk, tau));
}

Matrix cosine_backward_q(const CosineCache& cache, const Matrix& grad_scores) {
  Matrix g_unit = matmul(grad_scores, cache.k_unit);
  Matrix out(g_unit.rows(), g_unit.cols());
  for (std::size_t i = 0; i < g_unit.rows(); ++i) {
    const auto g = g_unit.row(i);
    const auto u = cache.q_unit.row(i);
    double dot = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      dot += g[k] * u[k];
    }
    auto o = out.row(i);
    const double scale = 1.0 / (cache.tau * cache.q_norm[i]);
    for (std::size_t k = 0; k < g.size(); ++k) {
      o[k] = scale * (g[k] - dot * u[k]);
    }
  }
  return out;
}

EncoderPair make_encoder_pair(std::vector<std::size_t> widths, double m, std::uint64_t seed) {
  Mlp base(std::move(widths), seed);
  Mlp momentum = base;
  momentum.adam() = AdamMoments{};
  return EncoderPair{std::move(base), std::move(momentum), m};
}

void ema_update(EncoderPair& pair) {
  if (!(pair.m >= 0.0 && pair.m <= 1.0)) {
    throw ConfigError("ema_update: momentum must lie in [0, 1]");
  }
  check_same_shape(pair.base, pair.momentum);
  const double m = pair.m;
  for (std::size_t l = 0; l < pair.base.layers().size(); ++l) {
    auto k = pair.momentum.layers()[l].weight.values();
    const auto q = pair.base.layers()[l].weight.values();
    for (std::size_t i = 0; i < k.size(); ++i) {
      k[i] = m * k[i] + (1.0 - m) * q[i];
    }
    auto& kb = pair.momentum.layers()[l].bias;
    const auto& qb = pair.base.layers()[l].bias;
    for (std::size_t i = 0; i < kb.size(); ++i) {
      kb[i] = m * kb[i] + (1.0 - m) * qb[i];
    }
  }
}

void SyntheticClusterSpec::validate() const {
  if (num_classes < 2 || input_dim == 0 || signal_dims == 0 || train_per_class == 0 ||
      test_per_class == 0) {
    throw ConfigError("cluster spec: need at least 2 classes and non-empty dimensions and splits");
  }
  if (signal_dims > input_dim) {
    throw ConfigError("cluster spec: signal_dims exceeds input_dim");
  }
  for (double v : {center_scale, within_sigma, nuisance_sigma, aug_sigma, hard_multiplier,
                   local_multiplier}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("cluster spec: scales must be finite and non-negative");
    }
  }
  if (!(mask_prob >= 0.0 && mask_prob < 1.0)) {
    throw ConfigError("cluster spec: mask_prob must lie in [0, 1)");
  }
  if (center_scale == 0.0 && within_sigma == 0.0) {
    throw ConfigError("cluster spec: degenerate data, every sample would be identical");
  }
}

ClusterDataset make_cluster_dataset(const SyntheticClusterSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ClusterDataset data;
  data.centers = Matrix(spec.num_classes, spec.signal_dims);
  for (double& v : data.centers.values()) {
    v = spec.center_scale * rng.normal();
  }
  auto fill = [&](std::size_t per_class, Matrix& rows, std::vector<std::size_t>& labels) {
    rows = Matrix(per_class * spec.num_classes, spec.signal_dims);
    labels.resize(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      const std::size_t c = i % spec.num_classes;
      labels[i] = c;
      for (std::size_t k = 0; k < spec.signal_dims; ++k) {
        rows(i, k) = data.centers(c, k) + spec.within_sigma * rng.normal();
      }
    }
  };
  fill(spec.train_per_class, data.train, data.train_labels);
  fill(spec.test_per_class, data.test, data.test_labels);
  const auto first = data.train.row(0);
  bool varies = false;
  for (std::size_t i = 1; i < data.train.rows() && !varies; ++i) {
    const auto r = data.train.row(i);
    varies = !std::equal(r.begin(), r.end(), first.begin());
  }
  if (!varies) {
    throw ConfigError("cluster data: all samples are identical");
  }
  return data;
}

Matrix make_view(const SyntheticClusterSpec& spec, const Matrix& signal, double noise, bool mask,
                 Rng& rng) {
  if (signal.cols() != spec.signal_dims) {
    throw DimensionError("make_view: expected " + std::to_string(spec.signal_dims) +
                         " signal coordinates");
  }
  Matrix view(signal.rows(), spec.input_dim);
  for (std::size_t i = 0; i < signal.rows(); ++i) {
    for (std::size_t k = 0; k < spec.signal_dims; ++k) {
      double v = signal(i, k) + noise * rng.normal();
      if (mask && rng.uniform() < spec.mask_prob) {
        v = 0.0;
      }
      view(i, k) = v;
    }
    for (std::size_t k = spec.signal_dims; k < spec.input_dim; ++k) {
      view(i, k) = spec.nuisance_sigma * rng.normal();
    }
  }
  return view;
}

SymmetricLoss symmetric_loss(const EncoderPair& pair, const Matrix& x1, const Matrix& x2,
                             const std::vector<Matrix>& locals, const ObjectiveSpec& objective) {
  objective.validate();
  check_same_shape(pair.base, pair.momentum);
  const std::size_t b = x1.rows();
  if (b < 2 || x2.rows() != b) {
    throw DimensionError("symmetric_loss: need two views of the same batch of at least 2 rows");
  }
  for (const Matrix& l : locals) {
    if (l.rows() != b) {
      throw DimensionError("symmetric_loss: local view batch size differs");
    }
  }
  ObjectiveSpec unscaled = objective;
  unscaled.tau = 1.0;

  const Matrix k1 = forward(pair.momentum, x1).output;
  const Matrix k2 = forward(pair.momentum, x2).output;

  // Query forwards: index 0 and 1 are the global views, the rest local.
  std::vector<MlpCache> queries;
  queries.push_back(forward(pair.base, x1));
  queries.push_back(forward(pair.base, x2));
  for (const Matrix& l : locals) {
    queries.push_back(forward(pair.base, l));
  }
  std::vector<Matrix> grad_q;
  for (const MlpCache& q : queries) {
    grad_q.emplace_back(q.output.rows(), q.output.cols(), 0.0);
  }

  SymmetricLoss result;
  result.positives_per_direction = b * (locals.size() + 1);
  // Direction 0 pairs queries {x1, locals} with k2; direction 1 pairs
  // {x2, locals} with k1.
  for (int dir = 0; dir < 2; ++dir) {
    const Matrix& keys = dir == 0 ? k2 : k1;
    std::vector<std::size_t> members{dir == 0 ? 0u : 1u};
    for (std::size_t l = 0; l < locals.size(); ++l) {
      members.push_back(2 + l);
    }
    std::vector<CosineCache> caches(members.size());
    std::vector<ScoreTable> tables;
    for (std::size_t s = 0; s < members.size(); ++s) {
      tables.push_back(extract_pos_neg(
          cosine_scores(queries[members[s]].output, keys, objective.tau, &caches[s])));
    }
    const ObjectiveOutput out = evaluate(concat_tables(tables), unscaled);
    result.loss -= out.value;
    for (std::size_t s = 0; s < members.size(); ++s) {
      Vector gp(out.grad_pos.begin() + static_cast<std::ptrdiff_t>(s * b),
                out.grad_pos.begin() + static_cast<std::ptrdiff_t>((s + 1) * b));
      const Matrix gn = row_slice(out.grad_neg, s * b, (s + 1) * b);
      const Matrix gz = cosine_backward_q(caches[s], scatter_to_square(gp, gn));
      auto acc = grad_q[members[s]].values();
      const auto add = gz.values();
      for (std::size_t k = 0; k < acc.size(); ++k) {
        acc[k] += add[k];
      }
    }
  }

  result.base_grads = pair.base.zero_gradients();
  for (std::size_t q = 0; q < queries.size(); ++q) {
    add_into(result.base_grads, backward(pair.base, queries[q], grad_q[q]));
  }
  result.momentum_grads = pair.momentum.zero_gradients();
  return result;
}

ProbeReport linear_probe(const Matrix& train_features, const std::vector<std::size_t>& train_labels,
                         const Matrix& test_features, const std::vector<std::size_t>& test_labels,
                         std::size_t num_classes, double ridge) {
  if (train_features.rows() != train_labels.size() || test_features.rows() != test_labels.size() ||
      train_features.cols() != test_features.cols()) {
    throw DimensionError("linear_probe: features and labels do not line up");
  }
  const std::size_t p = train_features.cols() + 1;
  auto with_bias = [p](const Matrix& f) {
    Matrix out(f.rows(), p);
    for (std::size_t i = 0; i < f.rows(); ++i) {
      for (std::size_t k = 0; k + 1 < p; ++k) {
        out(i, k) = f(i, k);
      }
      out(i, p - 1) = 1.0;
    }
    return out;
  };
  const Matrix a_train = with_bias(train_features);
  const Matrix a_test = with_bias(test_features);
  Matrix targets(train_labels.size(), num_classes, 0.0);
  for (std::size_t i = 0; i < train_labels.size(); ++i) {
    if (train_labels[i] >= num_classes) {
      throw DimensionError("linear_probe: label out of range");
    }
    targets(i, train_labels[i]) = 1.0;
  }
  Matrix gram = matmul_tn(a_train, a_train);
  double trace = 0.0;
  for (std::size_t k = 0; k < p; ++k) {
    trace += gram(k, k);
  }
  const double lambda = ridge * std::max(1.0, trace / static_cast<double>(p));
  for (std::size_t k = 0; k < p; ++k) {
    gram(k, k) += lambda;
  }
  const Matrix weights = solve_spd(gram, matmul_tn(a_train, targets));
  auto accuracy = [&](const Matrix& a, const std::vector<std::size_t>& labels) {
    const Matrix pred = matmul(a, weights);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
      const auto r = pred.row(i);
      const auto best = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
      hits += best == labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
  };
  return ProbeReport{accuracy(a_train, train_labels), accuracy(a_test, test_labels)};
}

namespace {

ProbeReport probe_encoder(const Mlp& encoder, const SyntheticClusterSpec& spec,
                          const ClusterDataset& data, double ridge, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix train_view = make_view(spec, data.train, 0.0, false, rng);
  const Matrix test_view = make_view(spec, data.test, 0.0, false, rng);
  return linear_probe(forward(encoder, train_view).output, data.train_labels,
                      forward(encoder, test_view).output, data.test_labels, spec.num_classes,
                      ridge);
}

}  // namespace

SslReport ssl_train(const SyntheticClusterSpec& spec, const ObjectiveSpec& objective,
                    const SslTrainConfig& config, std::uint64_t seed) {
  spec.validate();
  objective.validate();
  config.adam.validate();
  if (config.batch < 2 || config.epochs == 0) {
    throw ConfigError("ssl_train: need batch >= 2 and at least one epoch");
  }
  const ClusterDataset data = make_cluster_dataset(spec, derive_seed(seed, {0}));
  const std::size_t n = data.train.rows();
  if (n < config.batch) {
    throw ConfigError("ssl_train: batch larger than the training set");
  }
  std::vector<std::size_t> widths = config.widths;
  if (widths.empty()) {
    widths = {spec.input_dim, 128, 128, 32};
  }
  if (widths.front() != spec.input_dim) {
    throw DimensionError("ssl_train: encoder input width must equal input_dim");
  }
  SslReport report{make_encoder_pair(widths, config.momentum, derive_seed(seed, {1})), {}, {}, {}};
  EncoderPair& pair = report.encoders;
  report.initial_probe =
      probe_encoder(pair.base, spec, data, config.probe_ridge, derive_seed(seed, {3}));

  const double sigma = spec.view_sigma();
  const std::size_t steps = n / config.batch;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(seed, {2, epoch}));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      Matrix batch(config.batch, spec.signal_dims);
      for (std::size_t r = 0; r < config.batch; ++r) {
        const auto src = data.train.row(order[s * config.batch + r]);
        std::copy(src.begin(), src.end(), batch.row(r).begin());
      }
      const Matrix x1 = make_view(spec, batch, sigma, true, rng);
      const Matrix x2 = make_view(spec, batch, sigma, true, rng);
      std::vector<Matrix> locals;
      for (std::size_t l = 0; l < config.local_views; ++l) {
        locals.push_back(make_view(spec, batch, sigma * spec.local_multiplier, true, rng));
      }
      const SymmetricLoss step = symmetric_loss(pair, x1, x2, locals, objective);
      adam_step(pair.base, step.base_grads, config.adam);
      ema_update(pair);
      total += step.loss;
    }
    report.epoch_loss.push_back(total / static_cast<double>(steps));
  }
  report.probe = probe_encoder(pair.base, spec, data, config.probe_ridge, derive_seed(seed, {3}));
  return report;
}

}  // namespace divlab
