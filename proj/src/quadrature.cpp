#include "divlab/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "divlab/error.hpp"

namespace divlab {

namespace {

// 15-point Kronrod nodes on [-1, 1] (non-negative half) with the embedded
// 7-point Gauss weights at the odd-indexed nodes.
constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gauss_kronrod(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double kronrod = fc * kKronrod[7];
  double gauss = fc * kGauss[3];
  for (std::size_t k = 0; k < 7; ++k) {
    const double dx = half * kNodes[k];
    const double pair = f(mid - dx) + f(mid + dx);
    kronrod += kKronrod[k] * pair;
    if (k % 2 == 1) {
      gauss += kGauss[k / 2] * pair;
    }
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts) {
  std::priority_queue<Segment> heap;
  Segment first = gauss_kronrod(f, a, b);
  double total = first.value;
  double err = first.error;
  heap.push(first);
  std::size_t evaluations = 15;
  auto done = [&] { return err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
  while (!done() && heap.size() < opts.max_intervals) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = gauss_kronrod(f, worst.a, mid);
    Segment right = gauss_kronrod(f, mid, worst.b);
    evaluations += 30;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {total, err, evaluations,
          err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total))};
}

QuadratureResult integrate_2d(const std::function<double(double, double)>& f, double ax,
                              double bx, double ay, double by, const QuadratureOptions& opts) {
  std::size_t evaluations = 0;
  double inner_err = 0.0;
  bool inner_ok = true;
  QuadratureOptions inner_opts = opts;
  inner_opts.abs_tol = opts.abs_tol / std::max(1.0, bx - ax);
  auto inner = [&](double x) {
    QuadratureResult r = integrate([&](double y) { return f(x, y); }, ay, by, inner_opts);
    evaluations += r.evaluations;
    inner_err = std::max(inner_err, r.error);
    inner_ok = inner_ok && r.converged;
    return r.value;
  };
  QuadratureResult outer = integrate(inner, ax, bx, opts);
  outer.error += inner_err * (bx - ax);
  outer.evaluations = evaluations;
  outer.converged = outer.converged && inner_ok;
  return outer;
}

QuadratureResult gaussian_kl_quadrature(double mu_p, double sd_p, double mu_q, double sd_q) {
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  auto log_pdf = [&](double x, double mu, double sd) {
    const double z = (x - mu) / sd;
    return -0.5 * z * z - std::log(sd) - log_norm;
  };
  auto integrand = [&](double x) {
    const double lp = log_pdf(x, mu_p, sd_p);
    return std::exp(lp) * (lp - log_pdf(x, mu_q, sd_q));
  };
  return integrate(integrand, mu_p - 14.0 * sd_p, mu_p + 14.0 * sd_p);
}

namespace {

// Log densities of P_XY and P_X P_Y in rotated coordinates u = (x+y)/√2,
// v = (x−y)/√2 (a rotation, unit Jacobian). Under P_XY, u ~ N(0, 1+ρ) and
// v ~ N(0, 1−ρ) independently; under P_X P_Y both are standard normal.
struct RotatedPair {
  double var_u;
  double var_v;
  double log_norm_p;
  double log_norm_q;

  explicit RotatedPair(double rho)
      : var_u(1.0 + rho),
        var_v(1.0 - rho),
        log_norm_p(-std::log(2.0 * std::numbers::pi) - 0.5 * std::log(var_u * var_v)),
        log_norm_q(-std::log(2.0 * std::numbers::pi)) {}

  double log_p(double u, double v) const {
    return log_norm_p - 0.5 * (u * u / var_u + v * v / var_v);
  }
  double log_q(double u, double v) const { return log_norm_q - 0.5 * (u * u + v * v); }
};

double log_mixture(double log_p, double log_q, double alpha) {
  if (alpha == 0.0) {
    return log_q;
  }
  const double a = std::log(alpha) + log_p;
  const double b = std::log1p(-alpha) + log_q;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_d1(const GaussianPairSpec& spec, double alpha) {
  spec.validate();
  if (spec.dim != 1) {
    throw ConfigError("skew divergence quadrature is implemented for dim == 1 only");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ConfigError("skew divergence quadrature: alpha must lie in [0, 1)");
  }
}

// Integrates over ±12 standard deviations of a Gaussian envelope with the
// given per-axis variances (P's by default).
QuadratureResult integrate_over_p(const RotatedPair& g,
                                  const std::function<double(double, double)>& f, double tol,
                                  double var_u = 0.0, double var_v = 0.0) {
  const double lu = 12.0 * std::sqrt(std::max(var_u, g.var_u));
  const double lv = 12.0 * std::sqrt(std::max(var_v, g.var_v));
  QuadratureOptions opts;
  opts.abs_tol = tol * 1e-2;
  opts.rel_tol = 1e-12;
  return integrate_2d(f, -lu, lu, -lv, lv, opts);
}

}  // namespace

double skew_kl_quadrature(const GaussianPairSpec& spec, double alpha, double tol) {
  check_d1(spec, alpha);
  if (spec.rho == 0.0) {
    return 0.0;
  }
  const RotatedPair g(spec.rho);
  auto integrand = [&](double u, double v) {
    const double lp = g.log_p(u, v);
    return std::exp(lp) * (lp - log_mixture(lp, g.log_q(u, v), alpha));
  };
  const QuadratureResult r = integrate_over_p(g, integrand, tol);
  if (!r.converged || r.error > tol) {
    throw NumericError("skew_kl_quadrature: error estimate " + std::to_string(r.error) +
                       " exceeds tolerance " + std::to_string(tol));
  }
  return r.value;
}

double skew_renyi_quadrature(const GaussianPairSpec& spec, double alpha, double gamma,
                             double tol) {
  check_d1(spec, alpha);
  if (gamma == 0.0 || gamma == 1.0) {
    throw ConfigError("skew_renyi_quadrature: order must differ from 0 and 1");
  }
  if (spec.rho == 0.0) {
    return 0.0;
  }
  const RotatedPair g(spec.rho);
  // E_P[(dP/dM)^{γ−1}]
  auto integrand = [&](double u, double v) {
    const double lp = g.log_p(u, v);
    return std::exp(lp + (gamma - 1.0) * (lp - log_mixture(lp, g.log_q(u, v), alpha)));
  };
  // Without skew the integrand is p^γ·q^{1−γ}, a Gaussian with precision
  // γ/var − (γ−1) per axis; it is wider than P when γ > 1.
  double env_u = 0.0;
  double env_v = 0.0;
  if (alpha == 0.0) {
    const double prec_u = gamma / g.var_u - (gamma - 1.0);
    const double prec_v = gamma / g.var_v - (gamma - 1.0);
    if (!(prec_u > 0.0) || !(prec_v > 0.0)) {
      return std::numeric_limits<double>::infinity();
    }
    env_u = 1.0 / prec_u;
    env_v = 1.0 / prec_v;
  }
  const QuadratureResult r = integrate_over_p(g, integrand, tol, env_u, env_v);
  const double rel = r.error / std::max(r.value, 1e-300);
  if (!r.converged || !(r.value > 0.0) || rel > tol) {
    throw NumericError("skew_renyi_quadrature: relative error " + std::to_string(rel) +
                       " exceeds tolerance " + std::to_string(tol));
  }
  return std::log(r.value) / (gamma * (gamma - 1.0));
}

}  // namespace divlab
