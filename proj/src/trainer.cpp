#include "divlab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "divlab/error.hpp"
#include "divlab/mi_recovery.hpp"
#include "divlab/rng.hpp"
#include "divlab/variance_lab.hpp"

namespace divlab {

void TrainConfig::validate() const {
  objective.validate();
  adam.validate();
  if (hidden == 0 || dim == 0) {
    throw ConfigError("train: hidden width and dimension must be positive");
  }
  if (batch < 2) {
    throw ConfigError("train: batch size must be at least 2, got " + std::to_string(batch));
  }
  if (schedule.steps_per_level == 0 || schedule.num_levels == 0) {
    throw ConfigError("train: steps per level and number of levels must be positive");
  }
  if (!(schedule.initial_mi >= 0.0) || !std::isfinite(schedule.initial_mi)) {
    throw ConfigError("train: initial MI must be finite and non-negative");
  }
}

namespace {

GaussianPairSpec level_spec(const TrainConfig& config, std::size_t level) {
  return GaussianPairSpec{config.dim, rho_for_mi(config.dim, config.schedule.mi_at_level(level))};
}

bool finite_output(const ObjectiveOutput& out) {
  if (!std::isfinite(out.value)) {
    return false;
  }
  for (double g : out.grad_pos) {
    if (!std::isfinite(g)) {
      return false;
    }
  }
  return out.grad_neg.all_finite();
}

}  // namespace

TrainResult train(const TrainConfig& config, const RecordSink& sink) {
  config.validate();
  const ObjectiveSpec& spec = config.objective;
  const double alpha = spec.effective_alpha();
  TrainResult result{{}, {}, CriticNet(2 * config.dim, config.hidden, derive_seed(config.seed, {0}))};
  CriticNet& critic = result.critic;
  result.records.reserve(config.schedule.total_steps());
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t level = 0; level < config.schedule.num_levels; ++level) {
    const GaussianPairSpec pair = level_spec(config, level);
    const double true_mi = config.schedule.mi_at_level(level);
    const std::size_t first = level * config.schedule.steps_per_level;
    for (std::size_t step = first; step < first + config.schedule.steps_per_level; ++step) {
      const PairBatch batch = sample_pair_batch(pair, config.batch, derive_seed(config.seed, {1, step}));
      AbortEvent abort{step, level, "", ""};
      try {
        const ScoreTable table = extract_pos_neg(score_all_pairs(critic, batch.x, batch.y));
        const ObjectiveOutput out = evaluate(table, spec);
        if (!finite_output(out)) {
          abort.statistic = std::isfinite(out.value) ? "gradient" : "objective";
          abort.message = "non-finite " + abort.statistic + " (objective value " +
                          std::to_string(out.value) + ")";
          result.aborts.push_back(abort);
          break;
        }
        RunRecord rec;
        rec.step = step;
        rec.level = level;
        rec.level_true_mi = true_mi;
        rec.objective_value = out.value;
        const ScoreTable unscaled = scaled(table, 1.0 / spec.tau);
        rec.mi_hat_per_anchor = estimate_mi_per_anchor(unscaled, alpha).mi_hat;
        try {
          rec.mi_hat = estimate_mi(unscaled, alpha).mi_hat;
          rec.mi_valid = true;
        } catch (const NumericError&) {
          rec.mi_hat = std::numeric_limits<double>::quiet_NaN();
          rec.mi_valid = false;
        }
        const Matrix grad_scores = scatter_to_square(out.grad_pos, out.grad_neg);
        adam_step(critic, backward_all_pairs(critic, batch.x, batch.y, grad_scores), config.adam);
        rec.wallclock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        result.records.push_back(rec);
        if (sink) {
          sink(rec);
        }
      } catch (const NumericError& e) {
        abort.statistic = "critic";
        abort.message = e.what();
        result.aborts.push_back(abort);
        break;
      }
    }
  }
  return result;
}

PairScorer neural_scorer(CriticNet critic) {
  return [net = std::move(critic)](const Matrix& x, const Matrix& y) {
    return score_all_pairs(net, x, y);
  };
}

PairScorer oracle_scorer(const GaussianPairSpec& pair, const ObjectiveSpec& objective) {
  pair.validate();
  objective.validate();
  return [pair, objective](const Matrix& x, const Matrix& y) {
    Matrix table = log_density_ratio_table(pair, x, y);
    for (double& v : table.values()) {
      v = oracle_score(objective, v);
    }
    return table;
  };
}

PairScorer constant_scorer(double value) {
  return [value](const Matrix& x, const Matrix&) { return Matrix(x.rows(), x.rows(), value); };
}

std::vector<double> eval_objective_trace(const TrainConfig& config, const PairScorer& scorer,
                                         std::size_t batches, std::size_t level) {
  config.validate();
  if (level >= config.schedule.num_levels) {
    throw ConfigError("eval_objective_trace: level " + std::to_string(level) +
                      " is beyond the schedule");
  }
  const GaussianPairSpec pair = level_spec(config, level);
  std::vector<double> values;
  values.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const PairBatch batch =
        sample_pair_batch(pair, config.batch, derive_seed(config.seed, {2, level, b}));
    values.push_back(objective_value(extract_pos_neg(scorer(batch.x, batch.y)), config.objective));
  }
  return values;
}

WindowStats level_window(const std::vector<RunRecord>& records, const StaircaseSchedule& schedule,
                         std::size_t level, std::size_t window) {
  const std::size_t end = (level + 1) * schedule.steps_per_level;
  const std::size_t begin = end - std::min(window, schedule.steps_per_level);
  WindowStats s;
  double mi_sum = 0.0;
  double anchor_sum = 0.0;
  double obj_mean = 0.0;
  double obj_m2 = 0.0;
  for (const RunRecord& r : records) {
    if (r.level != level || r.step < begin || r.step >= end) {
      continue;
    }
    ++s.records;
    anchor_sum += r.mi_hat_per_anchor;
    const double delta = r.objective_value - obj_mean;
    obj_mean += delta / static_cast<double>(s.records);
    obj_m2 += delta * (r.objective_value - obj_mean);
    if (r.mi_valid) {
      ++s.valid_mi;
      mi_sum += r.mi_hat;
    }
  }
  s.mean_mi_per_anchor =
      s.records > 0 ? anchor_sum / static_cast<double>(s.records) : std::numeric_limits<double>::quiet_NaN();
  s.mean_objective = s.records > 0 ? obj_mean : std::numeric_limits<double>::quiet_NaN();
  s.objective_variance =
      s.records > 1 ? obj_m2 / static_cast<double>(s.records - 1) : std::numeric_limits<double>::quiet_NaN();
  s.mean_mi_hat = s.valid_mi > 0 ? mi_sum / static_cast<double>(s.valid_mi)
                                 : std::numeric_limits<double>::quiet_NaN();
  return s;
}

}  // namespace divlab
