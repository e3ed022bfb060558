#pragma once

// Variational divergence estimators evaluated on a table of critic scores.
//
// Every *_value function returns the bound itself (larger is tighter);
// gradients in ObjectiveOutput are those of the minimized loss, −value.
// All exponentials go through max-shifted log-sum-exp.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "divlab/matrix.hpp"

namespace divlab {

/// Positive scores and their negatives. pos has n entries; neg is n × K
/// (row i holds the negatives scored against anchor i).
struct ScoreTable {
  Vector pos;
  Matrix neg;

  std::size_t anchors() const noexcept { return pos.size(); }
  std::size_t negatives() const noexcept { return neg.cols(); }
};

/// Diagonal → pos; off-diagonal row i, ascending j with j == i removed → neg.
/// Same layout as taking flatten()[1:].view(B−1, B+1)[:, :−1] of the matrix.
ScoreTable extract_pos_neg(const Matrix& scores);

/// Explicit-negatives entry point: any K >= 1, pos.size() == neg.rows().
ScoreTable make_table(Vector pos, Matrix neg);

/// Inverse layout of extract_pos_neg: a B × B grid with grad_pos on the
/// diagonal and grad_neg off the diagonal.
Matrix scatter_to_square(const Vector& pos, const Matrix& neg);

/// Concatenates several tables with matching K end to end (all positives,
/// then all negative rows), so one objective sees every pair at once.
ScoreTable concat_tables(const std::vector<ScoreTable>& tables);

ScoreTable scaled(const ScoreTable& table, double factor);

enum class ObjectiveKind { DV, MINE, CPC, MLCPC, RMLCPC, NWJ, SkewNWJ };

std::string_view to_string(ObjectiveKind kind);
/// Case-insensitive; accepts dv, mine, cpc, mlcpc, rmlcpc, nwj, skewnwj
/// (also "skew-nwj"). Throws ConfigError otherwise.
ObjectiveKind parse_objective_kind(std::string_view name);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::MLCPC;
  double alpha = 0.0;   // skew, [0, 1/2); ignored by DV, MINE, NWJ
  double gamma = 2.0;   // Rényi order, RMLCPC only
  double tau = 1.0;     // scores are divided by tau before the objective

  /// Throws ConfigError on alpha outside [0, 1/2), tau <= 0, or an RMLCPC
  /// order that is not positive or equals 1.
  void validate() const;
  /// alpha as the objective actually uses it (0 for the unskewed kinds).
  double effective_alpha() const;
};

struct ObjectiveOutput {
  double value = 0.0;
  Vector grad_pos;
  Matrix grad_neg;
};

// The *_value functions accept any alpha in [0, 1); ObjectiveSpec, which is
// what training and the CLI go through, restricts it to [0, 1/2).

/// mean_i log( e^{pos_i} / (α·e^{pos_i} + ((1−α)/K)·Σ_j e^{neg_ij}) )
double cpc_value(const ScoreTable& t, double alpha);
/// mean(pos) − log( α·mean(e^{pos}) + (1−α)·mean(e^{neg}) )
double mlcpc_value(const ScoreTable& t, double alpha);
/// (1/(γ−1))·log mean e^{(γ−1)pos} − (1/γ)·log( α·mean e^{γ pos} + (1−α)·mean e^{γ neg} )
double rmlcpc_value(const ScoreTable& t, double alpha, double gamma);
/// mean(pos) − log mean(e^{neg})
double dv_value(const ScoreTable& t);
double mine_value(const ScoreTable& t);
/// rmlcpc_value with α = 0; any order γ ∉ {0, 1}.
double renyi_dv_value(const ScoreTable& t, double gamma);
/// mean(pos) − α·mean e^{pos−1} − (1−α)·mean e^{neg−1}
double nwj_value(const ScoreTable& t, double alpha);

/// Self-normalized importance weights behind the MLCPC (gamma == 1) and
/// RMLCPC gradients. first_pos ∝ e^{(γ−1)pos} sums to 1; second_pos and
/// second_neg ∝ α·e^{γ pos} and (1−α)·e^{γ neg} share one normalizer and sum
/// to 1 together.
struct ImportanceWeights {
  Vector first_pos;
  Vector second_pos;
  Matrix second_neg;
};
ImportanceWeights importance_weights(const ScoreTable& t, double alpha, double gamma);

/// Gradient of −value for MLCPC/RMLCPC built from the stop-gradient
/// importance weights. Scores are used as given (no temperature). Throws
/// ConfigError for any other kind.
ObjectiveOutput surrogate_grads(const ScoreTable& t, const ObjectiveSpec& spec);

/// Value of spec's objective on t / tau.
double objective_value(const ScoreTable& t, const ObjectiveSpec& spec);
/// Value and gradients (w.r.t. the raw, un-scaled scores) for any kind.
ObjectiveOutput evaluate(const ScoreTable& t, const ObjectiveSpec& spec);

}  // namespace divlab
