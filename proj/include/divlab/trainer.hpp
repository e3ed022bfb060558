#pragma once

// Neural critic training on the correlated-Gaussian staircase: the true MI
// doubles every steps_per_level steps while the critic keeps its weights.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "divlab/gaussian.hpp"
#include "divlab/mlp.hpp"
#include "divlab/objectives.hpp"

namespace divlab {

struct TrainConfig {
  ObjectiveSpec objective;
  std::size_t hidden = CriticNet::kDefaultHidden;
  std::size_t batch = 128;
  AdamConfig adam;
  StaircaseSchedule schedule;
  std::size_t dim = 20;
  std::uint64_t seed = 0;

  /// Throws ConfigError on zero counts, batch < 2, negative initial MI or an
  /// invalid objective / optimizer setting.
  void validate() const;
};

struct RunRecord {
  std::size_t step = 0;
  std::size_t level = 0;
  double level_true_mi = 0.0;
  double objective_value = 0.0;
  double mi_hat = 0.0;        // NaN when mi_valid is false
  bool mi_valid = false;      // false when the Ẑ − α·e^{f} pathology hit this batch
  double mi_hat_per_anchor = 0.0;  // estimate_mi_per_anchor on the same batch
  double wallclock_ms = 0.0;  // since the start of the run
};

/// A level cut short by a non-finite loss, gradient or critic output.
struct AbortEvent {
  std::size_t step = 0;
  std::size_t level = 0;
  std::string statistic;  // "objective", "gradient" or "critic"
  std::string message;
};

struct TrainResult {
  std::vector<RunRecord> records;
  std::vector<AbortEvent> aborts;
  CriticNet critic;
};

using RecordSink = std::function<void(const RunRecord&)>;

/// Seeds: critic init from derive_seed(seed, {0}); batch at global step s
/// from derive_seed(seed, {1, s}). After an abort the remaining steps of that
/// level are skipped and the next level starts from the last good weights.
TrainResult train(const TrainConfig& config, const RecordSink& sink = {});

/// Scores every (x_i, y_j) pair of a batch into a B × B table.
using PairScorer = std::function<Matrix(const Matrix& x, const Matrix& y)>;

PairScorer neural_scorer(CriticNet critic);
/// The optimal critic for objective on pair (see oracle_score).
PairScorer oracle_scorer(const GaussianPairSpec& pair, const ObjectiveSpec& objective);
PairScorer constant_scorer(double value);

/// Objective values on `batches` fresh batches at the given staircase level,
/// without any parameter update. Batch b uses derive_seed(config.seed,
/// {2, level, b}).
std::vector<double> eval_objective_trace(const TrainConfig& config, const PairScorer& scorer,
                                         std::size_t batches, std::size_t level);

/// Mean of the valid mi_hat values and the count they came from, over the
/// records of `level` whose step lies in the last `window` steps of it.
struct WindowStats {
  double mean_mi_hat = 0.0;
  double mean_mi_per_anchor = 0.0;
  double mean_objective = 0.0;
  double objective_variance = 0.0;
  std::size_t records = 0;
  std::size_t valid_mi = 0;
};
WindowStats level_window(const std::vector<RunRecord>& records, const StaircaseSchedule& schedule,
                         std::size_t level, std::size_t window);

}  // namespace divlab
