#include <cmath>
#include <vector>

#include "doctest.h"
#include "divlab/error.hpp"
#include "divlab/matrix.hpp"
#include "divlab/mlp.hpp"
#include "divlab/rng.hpp"

using namespace divlab;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (double& v : m.values()) {
    v = scale * rng.normal();
  }
  return m;
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(n);
  for (double& x : v) {
    x = rng.normal();
  }
  return v;
}

double weighted_score_sum(const CriticNet& net, const Matrix& pairs, const Vector& w) {
  const auto out = forward(net, pairs);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w[i] * out.scores[i];
  }
  return s;
}

}  // namespace

TEST_CASE("matmul variants agree with the transposed product") {
  const Matrix a = random_matrix(3, 4, 1);
  const Matrix b = random_matrix(4, 5, 2);
  const Matrix c = random_matrix(3, 5, 3);
  const Matrix ab = matmul(a, b);
  CHECK(ab.rows() == 3);
  CHECK(ab.cols() == 5);
  const Matrix tn = matmul_tn(a, c);  // aᵀc
  const Matrix ref_tn = matmul(transpose(a), c);
  for (std::size_t k = 0; k < tn.size(); ++k) {
    CHECK(tn.values()[k] == doctest::Approx(ref_tn.values()[k]).epsilon(1e-12));
  }
  const Matrix e = random_matrix(2, 5, 4);
  const Matrix nt = matmul_nt(c, e);  // c·eᵀ
  const Matrix ref_nt = matmul(c, transpose(e));
  REQUIRE(nt.rows() == 3);
  REQUIRE(nt.cols() == 2);
  for (std::size_t k = 0; k < nt.size(); ++k) {
    CHECK(nt.values()[k] == doctest::Approx(ref_nt.values()[k]).epsilon(1e-12));
  }
  CHECK(ab(1, 2) == doctest::Approx(a(1, 0) * b(0, 2) + a(1, 1) * b(1, 2) + a(1, 2) * b(2, 2) +
                                    a(1, 3) * b(3, 2)));
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 2, Vector{1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("solve_spd solves a small positive-definite system") {
  const Matrix a{{4.0, 1.0}, {1.0, 3.0}};
  const Matrix b{{1.0}, {2.0}};
  const Matrix x = solve_spd(a, b);
  CHECK(x(0, 0) == doctest::Approx(1.0 / 11.0));
  CHECK(x(1, 0) == doctest::Approx(7.0 / 11.0));
  CHECK_THROWS_AS(solve_spd(Matrix{{1.0, 2.0}, {2.0, 1.0}}, b), NumericError);
}

TEST_CASE("rng streams are deterministic and distinct") {
  Rng a(derive_seed(7, {1, 2}));
  Rng b(derive_seed(7, {1, 2}));
  Rng c(derive_seed(7, {2, 1}));
  for (int i = 0; i < 10; ++i) {
    const double va = a.normal();
    CHECK(va == b.normal());
    CHECK(va != c.normal());
  }
  Rng u(3);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    mean += v;
  }
  CHECK(mean / 100000.0 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("forward: zero weights give b2 everywhere") {
  Mlp zero = Mlp::zeros({6, 5, 1});
  zero.layers()[1].bias[0] = 0.75;
  const CriticNet net(zero);
  const auto out = forward(net, random_matrix(4, 6, 11));
  for (double s : out.scores) {
    CHECK(s == 0.75);
  }
}

TEST_CASE("forward: identity-like 1x1 net") {
  Mlp m = Mlp::zeros({1, 1, 1});
  m.layers()[0].weight(0, 0) = 1.0;
  m.layers()[1].weight(0, 0) = 1.0;
  const CriticNet net(m);
  const Matrix in{{2.0}, {-1.0}};
  const auto out = forward(net, in);
  CHECK(out.scores[0] == 2.0);
  CHECK(out.scores[1] == 0.0);
}

TEST_CASE("forward: dimension mismatch and non-finite rows are reported") {
  const CriticNet net(4, 8, 1);
  CHECK_THROWS_AS(forward(net, Matrix(3, 5)), DimensionError);
  Matrix bad = random_matrix(3, 4, 2);
  bad(1, 2) = std::numeric_limits<double>::infinity();
  try {
    forward(net, bad);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("forward is pure: repeated calls are bit-identical") {
  const CriticNet net(6, 16, 5);
  const Matrix in = random_matrix(7, 6, 9);
  CHECK(forward(net, in).scores == forward(net, in).scores);
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
  const CriticNet net(4, 8, 3);
  const auto fwd = forward(net, random_matrix(5, 4, 4));
  const auto g = backward(net, fwd.cache, Vector(5, 0.0));
  for (std::size_t k = 0; k < net.mlp().param_count(); ++k) {
    CHECK(grad_entry(g, k) == 0.0);
  }
}

TEST_CASE("backward: w2 gradient equals the hidden activation for one sample") {
  const CriticNet net(3, 6, 8);
  const Matrix in = random_matrix(1, 3, 10);
  const auto fwd = forward(net, in);
  const auto g = backward(net, fwd.cache, Vector{1.0});
  const Matrix& hidden = fwd.cache.inputs[1];
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(g.layers[1].weight(k, 0) == doctest::Approx(hidden(0, k)).epsilon(1e-14));
  }
  CHECK(g.layers[1].bias[0] == 1.0);
}

TEST_CASE("backward: stale cache is rejected") {
  const CriticNet net(3, 4, 1);
  const auto fwd = forward(net, random_matrix(4, 3, 2));
  CHECK_THROWS_AS(backward(net, fwd.cache, Vector(3, 1.0)), DimensionError);
}

TEST_CASE("backward matches central finite differences on every parameter") {
  CriticNet net(5, 12, 21);
  const Matrix in = random_matrix(6, 5, 22);
  const Vector w = random_vector(6, 23);
  const auto fwd = forward(net, in);
  const auto g = backward(net, fwd.cache, w);
  const double h = 1e-5;
  for (std::size_t k = 0; k < net.mlp().param_count(); ++k) {
    double& p = net.mlp().param(k);
    const double keep = p;
    p = keep + h;
    const double up = weighted_score_sum(net, in, w);
    p = keep - h;
    const double down = weighted_score_sum(net, in, w);
    p = keep;
    const double fd = (up - down) / (2.0 * h);
    CHECK(std::abs(grad_entry(g, k) - fd) / (std::abs(fd) + 1e-8) <= 1e-4);
  }
}

TEST_CASE("deep MLP backward matches finite differences") {
  Mlp net({4, 7, 6, 3}, 31);
  const Matrix in = random_matrix(5, 4, 32);
  const Matrix gout = random_matrix(5, 3, 33);
  auto loss = [&] {
    const auto c = forward(net, in);
    double s = 0.0;
    for (std::size_t k = 0; k < gout.size(); ++k) {
      s += gout.values()[k] * c.output.values()[k];
    }
    return s;
  };
  const auto g = backward(net, forward(net, in), gout);
  for (std::size_t k = 0; k < net.param_count(); ++k) {
    double& p = net.param(k);
    const double keep = p;
    p = keep + 1e-5;
    const double up = loss();
    p = keep - 1e-5;
    const double down = loss();
    p = keep;
    const double fd = (up - down) / 2e-5;
    CHECK(std::abs(grad_entry(g, k) - fd) / (std::abs(fd) + 1e-8) <= 1e-4);
  }
}

TEST_CASE("score_all_pairs equals the generic forward on concatenated pairs") {
  const std::size_t b = 6;
  const std::size_t d = 3;
  const CriticNet net(2 * d, 10, 41);
  const Matrix x = random_matrix(b, d, 42);
  const Matrix y = random_matrix(b, d, 43);
  const Matrix table = score_all_pairs(net, x, y);
  Matrix pairs(b * b, 2 * d);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        pairs(i * b + j, k) = x(i, k);
        pairs(i * b + j, d + k) = y(j, k);
      }
    }
  }
  const auto fwd = forward(net, pairs);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      CHECK(table(i, j) == doctest::Approx(fwd.scores[i * b + j]).epsilon(1e-12));
    }
  }
  const Matrix gs = random_matrix(b, b, 44);
  const auto fast = backward_all_pairs(net, x, y, gs);
  const auto slow = backward(net, fwd.cache, Vector(gs.values().begin(), gs.values().end()));
  for (std::size_t k = 0; k < net.mlp().param_count(); ++k) {
    CHECK(grad_entry(fast, k) == doctest::Approx(grad_entry(slow, k)).epsilon(1e-10));
  }
}

TEST_CASE("adam: zero gradient leaves parameters and advances the step") {
  CriticNet net(3, 4, 5);
  const Mlp before = net.mlp();
  adam_step(net, net.mlp().zero_gradients(), AdamConfig{});
  CHECK(net.mlp().adam().step == 1);
  for (std::size_t k = 0; k < before.param_count(); ++k) {
    CHECK(net.mlp().param(k) == before.param(k));
  }
}

TEST_CASE("adam: first step moves each parameter by about lr against the gradient sign") {
  Mlp net = Mlp::zeros({1, 1});
  net.param(0) = 0.5;
  auto g = net.zero_gradients();
  grad_entry(g, 0) = -3.7;
  AdamConfig cfg;
  adam_step(net, g, cfg);
  CHECK(net.param(0) - 0.5 == doctest::Approx(cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam: non-finite gradient throws and leaves the network untouched") {
  CriticNet net(2, 3, 9);
  const Mlp before = net.mlp();
  auto g = net.mlp().zero_gradients();
  grad_entry(g, 2) = std::nan("");
  CHECK_THROWS_AS(adam_step(net, g, AdamConfig{}), NumericError);
  CHECK(net.mlp().adam().step == 0);
  for (std::size_t k = 0; k < before.param_count(); ++k) {
    CHECK(net.mlp().param(k) == before.param(k));
  }
}

TEST_CASE("adam: quadratic (p-3)^2 from 0 follows the scalar recurrence and converges") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  Mlp net = Mlp::zeros({1, 1});
  // Independent scalar recurrence.
  double p = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    auto g = net.zero_gradients();
    grad_entry(g, 0) = 2.0 * (net.param(0) - 3.0);
    adam_step(net, g, cfg);

    const double gs = 2.0 * (p - 3.0);
    m = 0.9 * m + 0.1 * gs;
    v = 0.999 * v + 0.001 * gs * gs;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    p -= 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  }
  CHECK(net.param(0) == doctest::Approx(p).epsilon(1e-12));
  CHECK(std::abs(net.param(0) - 3.0) < 0.05);
}

TEST_CASE("adam config validation") {
  AdamConfig bad;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AdamConfig{};
  bad.beta2 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(AdamConfig{}.validate());
}

TEST_CASE("glorot init stays within its limit and biases start at zero") {
  const CriticNet net(40, 256, 3);
  const double limit = std::sqrt(6.0 / (40.0 + 256.0));
  for (double w : net.w1().values()) {
    CHECK(std::abs(w) <= limit);
  }
  for (double b : net.b1()) {
    CHECK(b == 0.0);
  }
  CHECK(net.hidden() == 256);
}
