#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature in one dimension and its
// iterated extension to rectangles, plus divergences between the bivariate
// Gaussian P_XY (d = 1) and P_X P_Y computed with it.

#include <cstddef>
#include <functional>

#include "divlab/gaussian.hpp"

namespace divlab {

struct QuadratureOptions {
  double abs_tol = 1e-11;
  double rel_tol = 1e-11;
  std::size_t max_intervals = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;         // estimated absolute error
  std::size_t evaluations = 0;
  bool converged = false;
};

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts = {});

/// ∫_{ax}^{bx} ∫_{ay}^{by} f(x, y) dy dx by nesting the 1-D rule.
QuadratureResult integrate_2d(const std::function<double(double, double)>& f, double ax,
                              double bx, double ay, double by, const QuadratureOptions& opts = {});

/// D_KL(N(mu_p, sd_p²) ‖ N(mu_q, sd_q²)) by 1-D quadrature over mu_p ± 14 sd_p.
QuadratureResult gaussian_kl_quadrature(double mu_p, double sd_p, double mu_q, double sd_q);

/// D_KL(P_XY ‖ α·P_XY + (1−α)·P_X P_Y) for a d = 1 spec. α = 0 is plain MI.
/// Throws ConfigError for dim != 1 and NumericError when the rule does not
/// reach `tol` (absolute).
double skew_kl_quadrature(const GaussianPairSpec& spec, double alpha, double tol = 1e-8);

/// R_γ(P_XY ‖ α·P_XY + (1−α)·P_X P_Y) with the 1/(γ(γ−1)) normalization, d = 1.
double skew_renyi_quadrature(const GaussianPairSpec& spec, double alpha, double gamma,
                             double tol = 1e-8);

}  // namespace divlab
