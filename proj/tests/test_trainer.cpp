#include <cmath>
#include <vector>

#include "doctest.h"
#include "divlab/error.hpp"
#include "divlab/quadrature.hpp"
#include "divlab/trainer.hpp"

using namespace divlab;

namespace {

TrainConfig tiny_config(ObjectiveKind kind, double alpha) {
  TrainConfig c;
  c.objective.kind = kind;
  c.objective.alpha = alpha;
  c.hidden = 16;
  c.batch = 16;
  c.dim = 3;
  c.schedule.initial_mi = 0.5;
  c.schedule.steps_per_level = 30;
  c.schedule.num_levels = 2;
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c = tiny_config(ObjectiveKind::MLCPC, 0.01);
  c.batch = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(ObjectiveKind::MLCPC, 0.01);
  c.schedule.num_levels = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config(ObjectiveKind::MLCPC, 0.01);
  c.objective.alpha = 0.6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(tiny_config(ObjectiveKind::RMLCPC, 0.0).validate());
}

TEST_CASE("records follow the schedule and runs replay bit for bit") {
  const TrainConfig c = tiny_config(ObjectiveKind::RMLCPC, 1.0 / 16.0);
  std::size_t streamed = 0;
  const TrainResult a = train(c, [&](const RunRecord&) { ++streamed; });
  const TrainResult b = train(c);
  REQUIRE(a.records.size() == 60);
  CHECK(streamed == 60);
  CHECK(a.aborts.empty());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const RunRecord& r = a.records[i];
    CHECK(r.step == i);
    CHECK(r.level == i / 30);
    CHECK(r.level_true_mi == (i < 30 ? 0.5 : 1.0));
    CHECK(r.objective_value == b.records[i].objective_value);
    CHECK(std::isfinite(r.mi_hat_per_anchor));
    if (r.mi_valid) {
      CHECK(r.mi_hat == b.records[i].mi_hat);
    } else {
      CHECK(std::isnan(r.mi_hat));
    }
  }
  for (std::size_t k = 0; k < a.critic.mlp().param_count(); ++k) {
    CHECK(a.critic.mlp().param(k) == b.critic.mlp().param(k));
  }
  TrainConfig other = c;
  other.seed = 43;
  CHECK(train(other).records[5].objective_value != a.records[5].objective_value);
}

TEST_CASE("a diverging run records abort events and keeps going level by level") {
  TrainConfig c = tiny_config(ObjectiveKind::RMLCPC, 0.0);
  c.objective.gamma = 3.0;
  c.objective.tau = 1e-306;
  c.schedule.num_levels = 3;
  const TrainResult r = train(c);
  REQUIRE_FALSE(r.aborts.empty());
  CHECK(r.aborts.size() <= 3);
  for (const AbortEvent& e : r.aborts) {
    CHECK_FALSE(e.statistic.empty());
    CHECK_FALSE(e.message.empty());
  }
  for (std::size_t i = 1; i < r.aborts.size(); ++i) {
    CHECK(r.aborts[i].level > r.aborts[i - 1].level);
  }
  CHECK(r.records.size() < c.schedule.total_steps());
}

TEST_CASE("frozen traces: constant critic, determinism, no mutation") {
  const TrainConfig c = tiny_config(ObjectiveKind::MLCPC, 0.01);
  for (double v : eval_objective_trace(c, constant_scorer(0.0), 20, 1)) {
    CHECK(v == 0.0);
  }
  const TrainResult trained = train(c);
  const CriticNet before = trained.critic;
  const auto t1 = eval_objective_trace(c, neural_scorer(trained.critic), 25, 0);
  const auto t2 = eval_objective_trace(c, neural_scorer(trained.critic), 25, 0);
  CHECK(t1 == t2);
  for (std::size_t k = 0; k < before.mlp().param_count(); ++k) {
    CHECK(trained.critic.mlp().param(k) == before.mlp().param(k));
  }
  CHECK_THROWS_AS(eval_objective_trace(c, constant_scorer(0.0), 1, 2), ConfigError);
}

TEST_CASE("oracle DV trace at MI = 2, d = 1 averages to the quadrature KL") {
  TrainConfig c;
  c.objective.kind = ObjectiveKind::DV;
  c.dim = 1;
  c.schedule.initial_mi = 2.0;
  c.schedule.num_levels = 1;
  c.seed = 7;
  const GaussianPairSpec pair{1, rho_for_mi(1, 2.0)};
  const auto trace = eval_objective_trace(c, oracle_scorer(pair, c.objective), 1000, 0);
  double m = 0.0;
  for (double v : trace) {
    m += v;
  }
  m /= trace.size();
  double s2 = 0.0;
  for (double v : trace) {
    s2 += (v - m) * (v - m);
  }
  const double se = std::sqrt(s2 / (trace.size() - 1) / trace.size());
  const double kl = skew_kl_quadrature(pair, 0.0);
  CHECK(std::abs(m - kl) <= 3.0 * se);
}

TEST_CASE("level window statistics") {
  StaircaseSchedule s;
  s.steps_per_level = 10;
  s.num_levels = 2;
  std::vector<RunRecord> recs;
  for (std::size_t i = 0; i < 20; ++i) {
    RunRecord r;
    r.step = i;
    r.level = i / 10;
    r.objective_value = static_cast<double>(i);
    r.mi_valid = i % 2 == 0;
    r.mi_hat = r.mi_valid ? static_cast<double>(i) : std::nan("");
    r.mi_hat_per_anchor = 1.0;
    recs.push_back(r);
  }
  const WindowStats w = level_window(recs, s, 1, 4);
  CHECK(w.records == 4);
  CHECK(w.valid_mi == 2);
  CHECK(w.mean_mi_hat == doctest::Approx(17.0));
  CHECK(w.mean_objective == doctest::Approx(17.5));
  CHECK(w.mean_mi_per_anchor == 1.0);
  CHECK(w.objective_variance == doctest::Approx(5.0 / 3.0));
}
