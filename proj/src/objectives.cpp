#include "divlab/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "divlab/error.hpp"

namespace divlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_table(const ScoreTable& t) {
  if (t.pos.empty()) {
    throw DimensionError("score table has no anchors");
  }
  if (t.neg.rows() != t.pos.size() || t.neg.cols() == 0) {
    throw DimensionError("score table: neg must be " + std::to_string(t.pos.size()) +
                         " x K with K >= 1");
  }
  for (double v : t.pos) {
    if (std::isnan(v)) {
      throw NumericError("score table contains NaN");
    }
  }
  for (double v : t.neg.values()) {
    if (std::isnan(v)) {
      throw NumericError("score table contains NaN");
    }
  }
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in [0, 1), got " + std::to_string(alpha));
  }
}

double mean(const Vector& v) {
  double s = 0.0;
  for (double x : v) {
    s += x;
  }
  return s / static_cast<double>(v.size());
}

double max_of(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) {
    m = std::max(m, x);
  }
  return m;
}

// log( wp·Σ_i e^{c·pos_i} + wn·Σ_ij e^{c·neg_ij} ) with wp, wn >= 0. The
// returned shift is the max exponent used.
struct LogMix {
  double log_value;
  double shift;
};

LogMix log_mix(const ScoreTable& t, double c, double wp, double wn) {
  double m = kNegInf;
  if (wp > 0.0) {
    for (double v : t.pos) {
      m = std::max(m, c * v);
    }
  }
  if (wn > 0.0) {
    for (double v : t.neg.values()) {
      m = std::max(m, c * v);
    }
  }
  double sp = 0.0;
  double sn = 0.0;
  if (wp > 0.0) {
    for (double v : t.pos) {
      sp += std::exp(c * v - m);
    }
  }
  if (wn > 0.0) {
    for (double v : t.neg.values()) {
      sn += std::exp(c * v - m);
    }
  }
  return {m + std::log(wp * sp + wn * sn), m};
}

// log mean e^{c·v}
double log_mean_exp(std::span<const double> v, double c) {
  double m = kNegInf;
  for (double x : v) {
    m = std::max(m, c * x);
  }
  double s = 0.0;
  for (double x : v) {
    s += std::exp(c * x - m);
  }
  return m + std::log(s / static_cast<double>(v.size()));
}

double renyi_form(const ScoreTable& t, double alpha, double gamma) {
  const double n = static_cast<double>(t.anchors());
  const double nk = n * static_cast<double>(t.negatives());
  const double first = log_mean_exp(t.pos, gamma - 1.0) / (gamma - 1.0);
  const LogMix second = log_mix(t, gamma, alpha / n, (1.0 - alpha) / nk);
  return first - second.log_value / gamma;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + ": non-finite value");
  }
}

ObjectiveOutput cpc_output(const ScoreTable& t, double alpha) {
  const std::size_t n = t.anchors();
  const std::size_t k = t.negatives();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double wn = (1.0 - alpha) / static_cast<double>(k);
  ObjectiveOutput out{0.0, Vector(n), Matrix(n, k)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = t.neg.row(i);
    double m = std::max(max_of(row), alpha > 0.0 ? t.pos[i] : kNegInf);
    const double ep = alpha > 0.0 ? alpha * std::exp(t.pos[i] - m) : 0.0;
    double sn = 0.0;
    for (double v : row) {
      sn += std::exp(v - m);
    }
    const double denom = ep + wn * sn;
    out.value += t.pos[i] - (m + std::log(denom));
    out.grad_pos[i] = -inv_n * (1.0 - ep / denom);
    auto g = out.grad_neg.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = inv_n * wn * std::exp(row[j] - m) / denom;
    }
  }
  out.value *= inv_n;
  return out;
}

ObjectiveOutput dv_output(const ScoreTable& t) {
  const std::size_t n = t.anchors();
  const std::size_t k = t.negatives();
  const LogMix lm = log_mix(t, 1.0, 0.0, 1.0);
  ObjectiveOutput out{0.0, Vector(n, -1.0 / static_cast<double>(n)), Matrix(n, k)};
  out.value = mean(t.pos) - (lm.log_value - std::log(static_cast<double>(n * k)));
  for (std::size_t q = 0; q < t.neg.size(); ++q) {
    out.grad_neg.values()[q] = std::exp(t.neg.values()[q] - lm.log_value);
  }
  return out;
}

ObjectiveOutput nwj_output(const ScoreTable& t, double alpha) {
  const std::size_t n = t.anchors();
  const std::size_t k = t.negatives();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_nk = inv_n / static_cast<double>(k);
  ObjectiveOutput out{0.0, Vector(n), Matrix(n, k)};
  double pos_mean = 0.0;
  double pos_exp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(t.pos[i] - 1.0);
    pos_mean += t.pos[i];
    pos_exp += e;
    out.grad_pos[i] = -inv_n + alpha * inv_n * e;
  }
  double neg_exp = 0.0;
  for (std::size_t q = 0; q < t.neg.size(); ++q) {
    const double e = std::exp(t.neg.values()[q] - 1.0);
    neg_exp += e;
    out.grad_neg.values()[q] = (1.0 - alpha) * inv_nk * e;
  }
  out.value = pos_mean * inv_n - alpha * pos_exp * inv_n - (1.0 - alpha) * neg_exp * inv_nk;
  require_finite(out.value, "nwj");
  return out;
}

}  // namespace

ScoreTable extract_pos_neg(const Matrix& scores) {
  if (scores.rows() != scores.cols()) {
    throw DimensionError("extract_pos_neg: score matrix must be square, got " +
                         std::to_string(scores.rows()) + "x" + std::to_string(scores.cols()));
  }
  const std::size_t b = scores.rows();
  if (b < 2) {
    throw DimensionError("extract_pos_neg: need B >= 2");
  }
  ScoreTable t{Vector(b), Matrix(b, b - 1)};
  // Row i of the (B−1)×(B+1) view of flatten()[1:] starts right after the
  // diagonal entry (i, i); dropping its last column leaves the B−1 entries up
  // to (i+1, i+1). Re-chunked into rows of B−1 this is row-wise "delete the
  // diagonal".
  const auto flat = scores.values();
  std::size_t out = 0;
  for (std::size_t r = 0; r + 1 < b; ++r) {
    const std::size_t start = 1 + r * (b + 1);
    for (std::size_t c = 0; c < b; ++c) {
      t.neg.values()[out++] = flat[start + c];
    }
  }
  for (std::size_t i = 0; i < b; ++i) {
    t.pos[i] = scores(i, i);
  }
  return t;
}

ScoreTable make_table(Vector pos, Matrix neg) {
  ScoreTable t{std::move(pos), std::move(neg)};
  check_table(t);
  return t;
}

Matrix scatter_to_square(const Vector& pos, const Matrix& neg) {
  const std::size_t b = pos.size();
  if (neg.rows() != b || neg.cols() + 1 != b) {
    throw DimensionError("scatter_to_square: expected B and B x (B-1) inputs");
  }
  Matrix out(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    out(i, i) = pos[i];
    for (std::size_t j = 0, c = 0; j < b; ++j) {
      if (j != i) {
        out(i, j) = neg(i, c++);
      }
    }
  }
  return out;
}

ScoreTable concat_tables(const std::vector<ScoreTable>& tables) {
  ScoreTable out;
  for (const auto& t : tables) {
    out.pos.insert(out.pos.end(), t.pos.begin(), t.pos.end());
    out.neg = vconcat(out.neg, t.neg);
  }
  return out;
}

ScoreTable scaled(const ScoreTable& table, double factor) {
  ScoreTable out = table;
  for (double& v : out.pos) {
    v *= factor;
  }
  for (double& v : out.neg.values()) {
    v *= factor;
  }
  return out;
}

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::DV:
      return "dv";
    case ObjectiveKind::MINE:
      return "mine";
    case ObjectiveKind::CPC:
      return "cpc";
    case ObjectiveKind::MLCPC:
      return "mlcpc";
    case ObjectiveKind::RMLCPC:
      return "rmlcpc";
    case ObjectiveKind::NWJ:
      return "nwj";
    case ObjectiveKind::SkewNWJ:
      return "skewnwj";
  }
  return "?";
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  std::string s;
  for (char c : name) {
    if (c != '-' && c != '_') {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  for (auto k : {ObjectiveKind::DV, ObjectiveKind::MINE, ObjectiveKind::CPC, ObjectiveKind::MLCPC,
                 ObjectiveKind::RMLCPC, ObjectiveKind::NWJ, ObjectiveKind::SkewNWJ}) {
    if (s == to_string(k)) {
      return k;
    }
  }
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

void ObjectiveSpec::validate() const {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw ConfigError("alpha must lie in [0, 1/2), got " + std::to_string(alpha));
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("temperature tau must be positive");
  }
  if (kind == ObjectiveKind::RMLCPC) {
    if (gamma == 1.0) {
      throw ConfigError("rmlcpc requires gamma != 1; use mlcpc for the gamma -> 1 limit");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw ConfigError("rmlcpc requires gamma > 0");
    }
  }
}

double ObjectiveSpec::effective_alpha() const {
  switch (kind) {
    case ObjectiveKind::DV:
    case ObjectiveKind::MINE:
    case ObjectiveKind::NWJ:
      return 0.0;
    default:
      return alpha;
  }
}

double cpc_value(const ScoreTable& t, double alpha) {
  check_table(t);
  check_alpha(alpha);
  return cpc_output(t, alpha).value;
}

double mlcpc_value(const ScoreTable& t, double alpha) {
  check_table(t);
  check_alpha(alpha);
  const double n = static_cast<double>(t.anchors());
  const double nk = n * static_cast<double>(t.negatives());
  return mean(t.pos) - log_mix(t, 1.0, alpha / n, (1.0 - alpha) / nk).log_value;
}

double rmlcpc_value(const ScoreTable& t, double alpha, double gamma) {
  check_table(t);
  check_alpha(alpha);
  if (gamma == 1.0) {
    throw ConfigError("rmlcpc requires gamma != 1; use mlcpc_value for the gamma -> 1 limit");
  }
  if (!(gamma > 0.0)) {
    throw ConfigError("rmlcpc requires gamma > 0");
  }
  return renyi_form(t, alpha, gamma);
}

double dv_value(const ScoreTable& t) {
  check_table(t);
  return dv_output(t).value;
}

double mine_value(const ScoreTable& t) { return dv_value(t); }

double renyi_dv_value(const ScoreTable& t, double gamma) {
  check_table(t);
  if (gamma == 0.0 || gamma == 1.0) {
    throw ConfigError("renyi_dv requires gamma not in {0, 1}");
  }
  return renyi_form(t, 0.0, gamma);
}

double nwj_value(const ScoreTable& t, double alpha) {
  check_table(t);
  check_alpha(alpha);
  return nwj_output(t, alpha).value;
}

ImportanceWeights importance_weights(const ScoreTable& t, double alpha, double gamma) {
  check_table(t);
  check_alpha(alpha);
  const std::size_t n = t.anchors();
  const std::size_t k = t.negatives();
  const double nd = static_cast<double>(n);
  const double nk = nd * static_cast<double>(k);
  ImportanceWeights w{Vector(n), Vector(n), Matrix(n, k)};

  const double m1 = (gamma - 1.0) * (gamma >= 1.0 ? max_of(t.pos) : *std::min_element(t.pos.begin(), t.pos.end()));
  double s1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w.first_pos[i] = std::exp((gamma - 1.0) * t.pos[i] - m1);
    s1 += w.first_pos[i];
  }
  for (double& v : w.first_pos) {
    v /= s1;
  }

  const LogMix lm = log_mix(t, gamma, alpha / nd, (1.0 - alpha) / nk);
  for (std::size_t i = 0; i < n; ++i) {
    w.second_pos[i] = alpha > 0.0 ? (alpha / nd) * std::exp(gamma * t.pos[i] - lm.log_value) : 0.0;
  }
  for (std::size_t q = 0; q < t.neg.size(); ++q) {
    w.second_neg.values()[q] =
        ((1.0 - alpha) / nk) * std::exp(gamma * t.neg.values()[q] - lm.log_value);
  }
  return w;
}

ObjectiveOutput surrogate_grads(const ScoreTable& t, const ObjectiveSpec& spec) {
  if (spec.kind != ObjectiveKind::MLCPC && spec.kind != ObjectiveKind::RMLCPC) {
    throw ConfigError("surrogate_grads: only mlcpc and rmlcpc have importance-weighted forms");
  }
  spec.validate();
  check_table(t);
  const bool renyi = spec.kind == ObjectiveKind::RMLCPC;
  const double gamma = renyi ? spec.gamma : 1.0;
  const ImportanceWeights w = importance_weights(t, spec.alpha, gamma);
  ObjectiveOutput out;
  out.value = renyi ? renyi_form(t, spec.alpha, gamma) : mlcpc_value(t, spec.alpha);
  out.grad_pos.resize(t.anchors());
  // MLCPC's first term is a plain mean, i.e. uniform first-term weights,
  // which is what first_pos reduces to at gamma == 1.
  for (std::size_t i = 0; i < t.anchors(); ++i) {
    out.grad_pos[i] = -w.first_pos[i] + w.second_pos[i];
  }
  out.grad_neg = w.second_neg;
  return out;
}

double objective_value(const ScoreTable& t, const ObjectiveSpec& spec) {
  return evaluate(t, spec).value;
}

ObjectiveOutput evaluate(const ScoreTable& t, const ObjectiveSpec& spec) {
  spec.validate();
  check_table(t);
  const ScoreTable s = spec.tau == 1.0 ? t : scaled(t, 1.0 / spec.tau);
  ObjectiveOutput out;
  switch (spec.kind) {
    case ObjectiveKind::DV:
    case ObjectiveKind::MINE:
      out = dv_output(s);
      break;
    case ObjectiveKind::CPC:
      out = cpc_output(s, spec.alpha);
      break;
    case ObjectiveKind::MLCPC:
    case ObjectiveKind::RMLCPC:
      out = surrogate_grads(s, spec);
      break;
    case ObjectiveKind::NWJ:
      out = nwj_output(s, 0.0);
      break;
    case ObjectiveKind::SkewNWJ:
      out = nwj_output(s, spec.alpha);
      break;
  }
  require_finite(out.value, "objective");
  if (spec.tau != 1.0) {
    const double inv = 1.0 / spec.tau;
    for (double& g : out.grad_pos) {
      g *= inv;
    }
    for (double& g : out.grad_neg.values()) {
      g *= inv;
    }
  }
  return out;
}

}  // namespace divlab
