#include <cmath>
#include <functional>
#include <sstream>

#include "divlab/error.hpp"
#include "divlab/experiment.hpp"
#include "divlab/gaussian.hpp"
#include "divlab/mi_recovery.hpp"
#include "divlab/mlp.hpp"
#include "divlab/quadrature.hpp"
#include "divlab/rng.hpp"
#include "divlab/ssl.hpp"
#include "divlab/variance_lab.hpp"

namespace divlab {

namespace {

std::string show(double got, double want) {
  std::ostringstream s;
  s.precision(10);
  s << "got " << got << ", want " << want;
  return s.str();
}

SelftestResult near(std::string module, std::string name, double got, double want, double tol) {
  const bool ok = std::isfinite(got) && std::abs(got - want) <= tol;
  return {std::move(module), std::move(name), ok, ok ? "" : show(got, want)};
}

template <class E>
SelftestResult throws(std::string module, std::string name, const std::function<void()>& body) {
  try {
    body();
  } catch (const E&) {
    return {std::move(module), std::move(name), true, ""};
  } catch (const std::exception& e) {
    return {std::move(module), std::move(name), false, std::string("wrong exception: ") + e.what()};
  }
  return {std::move(module), std::move(name), false, "no exception"};
}

ScoreTable two_by_two() { return extract_pos_neg(Matrix{{2.0, 0.0}, {0.0, 2.0}}); }

}  // namespace

std::vector<SelftestResult> run_selftest() {
  std::vector<SelftestResult> out;
  auto guarded = [&](const std::string& module, const std::string& name,
                     const std::function<SelftestResult()>& check) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({module, name, false, e.what()});
    }
  };

  guarded("numcore", "matmul 2x2", [] {
    const Matrix c = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{5, 6}, {7, 8}});
    const bool ok = c == Matrix{{19, 22}, {43, 50}};
    return SelftestResult{"numcore", "matmul 2x2", ok, ok ? "" : "product mismatch"};
  });
  out.push_back(throws<DimensionError>("numcore", "shape mismatch raises",
                                       [] { matmul(Matrix(2, 3), Matrix(2, 3)); }));
  guarded("numcore", "seeded streams repeat", [] {
    Rng a(derive_seed(7, {1, 2}));
    Rng b(derive_seed(7, {1, 2}));
    bool ok = true;
    for (int i = 0; i < 16; ++i) {
      ok = ok && a.normal() == b.normal();
    }
    return SelftestResult{"numcore", "seeded streams repeat", ok, ok ? "" : "streams differ"};
  });

  guarded("distributions", "MI of rho=0.5, d=1", [] {
    GaussianPairSpec s{1, 0.5};
    return near("distributions", "MI of rho=0.5, d=1", analytic_mi(s), -0.5 * std::log(0.75), 1e-12);
  });
  guarded("distributions", "rho for MI 2 at d=20", [] {
    const double rho = rho_for_mi(20, 2.0);
    return near("distributions", "rho for MI 2 at d=20", analytic_mi({20, rho}), 2.0, 1e-10);
  });
  guarded("distributions", "Renyi order near 1 approaches KL", [] {
    GaussianPairSpec s{3, 0.6};
    return near("distributions", "Renyi order near 1 approaches KL", analytic_renyi(s, 1.0 + 1e-7),
                analytic_mi(s), 1e-5);
  });

  guarded("objectives", "DV on 2x2 table", [] {
    const double want = 2.0 - std::log(1.0);
    return near("objectives", "DV on 2x2 table", dv_value(two_by_two()), want, 1e-12);
  });
  guarded("objectives", "CPC at alpha=1/2 on 2x2", [] {
    const double want = 2.0 - std::log(0.5 * std::exp(2.0) + 0.5);
    return near("objectives", "CPC at alpha=1/2 on 2x2", cpc_value(two_by_two(), 0.5), want, 1e-12);
  });
  guarded("objectives", "MLCPC at alpha=0 equals DV", [] {
    return near("objectives", "MLCPC at alpha=0 equals DV", mlcpc_value(two_by_two(), 0.0),
                dv_value(two_by_two()), 1e-12);
  });
  guarded("objectives", "RMLCPC at alpha=1/2, gamma=2", [] {
    return near("objectives", "RMLCPC at alpha=1/2, gamma=2", rmlcpc_value(two_by_two(), 0.5, 2.0),
                2.0 - 0.5 * std::log((std::exp(4.0) + 1.0) / 2.0), 1e-12);
  });
  out.push_back(throws<ConfigError>("objectives", "alpha = 0.6 rejected", [] {
    ObjectiveSpec s;
    s.kind = ObjectiveKind::MLCPC;
    s.alpha = 0.6;
    s.validate();
  }));

  guarded("mi_recovery", "oracle critic recovers r", [] {
    const double alpha = 1.0 / 128.0;
    const double log_r = 1.3;
    const double f = skew_oracle_critic(log_r, alpha);
    const double q = std::exp(f);
    return near("mi_recovery", "oracle critic recovers r", std::log(unskew_ratio(q, alpha)), log_r, 1e-12);
  });
  guarded("mi_recovery", "alpha=0 estimate is DV", [] {
    const ScoreTable t = two_by_two();
    return near("mi_recovery", "alpha=0 estimate is DV", estimate_mi(t, 0.0).mi_hat, dv_value(t), 1e-12);
  });

  guarded("quadrature", "KL(N(0,1) || N(1,1)) = 1/2", [] {
    return near("quadrature", "KL(N(0,1) || N(1,1)) = 1/2", gaussian_kl_quadrature(0, 1, 1, 1).value, 0.5,
                1e-8);
  });
  guarded("quadrature", "skew KL at alpha=0 is MI", [] {
    GaussianPairSpec s{1, 0.8};
    return near("quadrature", "skew KL at alpha=0 is MI", skew_kl_quadrature(s, 0.0), analytic_mi(s), 1e-6);
  });

  guarded("variance_lab", "bound at KL=0 vanishes", [] {
    return near("variance_lab", "bound at KL=0 vanishes", renyi_lower_bound(2.0, 0.0, 0.0), 0.0, 1e-15);
  });
  guarded("variance_lab", "skew shrinks the divergence", [] {
    const BiasCheck b = bias_check(1.0 / 16.0, 2.0);
    return SelftestResult{"variance_lab", "skew shrinks the divergence", b.holds,
                          b.holds ? "" : show(b.skew_kl, b.skew_bound)};
  });

  guarded("trainer", "Adam reduces a quadratic", [] {
    Mlp net({1, 1}, 3);
    AdamConfig cfg;
    cfg.lr = 0.05;
    const Matrix x{{1.0}};
    auto loss = [&] {
      const double y = forward(net, x).output(0, 0) - 2.0;
      return y * y;
    };
    const double before = loss();
    for (int i = 0; i < 100; ++i) {
      const MlpCache c = forward(net, x);
      Matrix g(1, 1, 2.0 * (c.output(0, 0) - 2.0));
      adam_step(net, backward(net, c, g), cfg);
    }
    const bool ok = loss() < 0.01 * before + 1e-12;
    return SelftestResult{"trainer", "Adam reduces a quadratic", ok, ok ? "" : show(loss(), 0.0)};
  });

  guarded("ssl_harness", "EMA with m=0 copies the base", [] {
    EncoderPair p = make_encoder_pair({4, 3, 2}, 0.0, 5);
    Rng rng(9);
    for (std::size_t k = 0; k < p.base.param_count(); ++k) {
      p.base.param(k) += rng.normal();
    }
    ema_update(p);
    bool ok = true;
    for (std::size_t k = 0; k < p.base.param_count(); ++k) {
      ok = ok && p.base.param(k) == p.momentum.param(k);
    }
    return SelftestResult{"ssl_harness", "EMA with m=0 copies the base", ok, ok ? "" : "weights differ"};
  });
  guarded("ssl_harness", "cosine of identical rows", [] {
    const Matrix z{{3.0, 4.0}, {1.0, 0.0}};
    return near("ssl_harness", "cosine of identical rows", cosine_scores(z, z, 0.5)(0, 0), 2.0, 1e-12);
  });

  guarded("experiment_cli", "config round trip", [] {
    std::map<std::string, std::string> kv{{"command", "mi-bench"}, {"alpha", "1/128"}, {"out", "x"}};
    const ExperimentConfig c = config_from_map(kv);
    std::map<std::string, std::string> again;
    for (const auto& [k, v] : serialize(c)) {
      again[k] = v;
    }
    const bool ok = serialize(config_from_map(again)) == serialize(c) && c.alphas.size() == 1 &&
                    c.alphas[0] == 1.0 / 128.0;
    return SelftestResult{"experiment_cli", "config round trip", ok, ok ? "" : "serialization drifted"};
  });
  return out;
}

}  // namespace divlab
