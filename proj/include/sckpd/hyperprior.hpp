#pragma once

// Data-driven centering of the prior: targets taken from a Cholesky factor
// of the sample covariance (or of its inverse), the Gamma shapes for the
// shared diagonals and the variance scale beta of the strictly lower entries.

#include "sckpd/common.hpp"

#include <string>

namespace sckpd {

enum class Centering {
  Covariance,  // factor of the sample covariance itself
  Precision,   // factor of the inverse sample covariance
};

Centering parse_centering(const std::string &name);
std::string to_string(Centering c);

struct PriorTargets {
  double gamma_D = 0.0;  // log det of the factor
  double F_D = 0.0;      // squared Frobenius norm of its diagonal
  double F_L = 0.0;      // squared Frobenius norm of its strict lower part
  double c = 0.0;        // d1(d1-1) / (d2(d2-1))
  double M1 = 0.0;       // d1(d1-1)/2
  Index d1 = 0;
  Index d2 = 0;

  static PriorTargets from_factor_stats(double gamma_D, double F_D, double F_L, Index d1,
                                        Index d2);
  void validate() const;
};

struct ShapeSolution {
  double a = 0.0;
  double residual = 0.0;  // |a^2 + a - c exp(2 psi(a))|
  bool interior = true;   // false when c <= 1 and the infimum sits at a -> 0
  int iterations = 0;
};

struct SolvedHyper {
  double a1 = 0.0, a2 = 0.0;
  double rate1 = 0.0, rate2 = 0.0;
  double c1 = 0.0, c2 = 0.0;
  double beta = 0.0;
  double epsilon_residual = 0.0;  // larger of the two shape residuals
  bool interior = true;
};

inline constexpr double kShapeTol = 1e-10;

// Root of a^2 + a - c exp(2 psi(a)) by bracketed bisection with safeguarded
// Newton steps. The returned point is the best iterate seen, so limiting
// max_iter yields a residual that never increases with the limit.
ShapeSolution solve_a(double c, double tol = kShapeTol, int max_iter = 500);

// Unbiased sample covariance of the rows of obs (n x d), n >= 2.
Matrix sample_covariance(const Matrix &obs);

PriorTargets prior_targets_from_sample(const Matrix &s, Index d1, Index d2,
                                       Centering centering = Centering::Covariance);

// Positive root of (M1^2/c) beta^2 + sqrt(F_D) M1 (1 + 1/c) beta = F_L.
double solve_beta(const PriorTargets &t);

// Gamma rate exp(psi(a) - gamma_D / (2 d1 d2)), so E log X = gamma_D/(2 d1 d2).
double diag_prior_rate(double a, double gamma_D, Index d1, Index d2);

// Shape target for mode i (1 or 2): sqrt(F_D)/d_i * exp(-gamma_D/(d1 d2)).
double diag_shape_target(const PriorTargets &t, int mode);

SolvedHyper solve_hyper(const PriorTargets &t, double tol = kShapeTol);

}  // namespace sckpd
