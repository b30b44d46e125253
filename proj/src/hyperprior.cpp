#include "sckpd/hyperprior.hpp"

#include "sckpd/chol_geometry.hpp"
#include "sckpd/special.hpp"

#include <algorithm>
#include <cmath>

namespace sckpd {

Centering parse_centering(const std::string &name) {
  if (name == "covariance") return Centering::Covariance;
  if (name == "precision") return Centering::Precision;
  throw ConfigError("unknown centering '" + name + "' (expected covariance or precision)");
}

std::string to_string(Centering c) {
  return c == Centering::Covariance ? "covariance" : "precision";
}

PriorTargets PriorTargets::from_factor_stats(double gamma_D, double F_D, double F_L, Index d1,
                                             Index d2) {
  PriorTargets t;
  t.gamma_D = gamma_D;
  t.F_D = F_D;
  t.F_L = F_L;
  t.d1 = d1;
  t.d2 = d2;
  t.c = static_cast<double>(d1 * (d1 - 1)) / static_cast<double>(d2 * (d2 - 1));
  t.M1 = static_cast<double>(d1 * (d1 - 1)) / 2.0;
  t.validate();
  return t;
}

void PriorTargets::validate() const {
  if (d1 < 2 || d2 < 2) throw DomainError("prior centering needs d1 >= 2 and d2 >= 2");
  if (!(F_D > 0.0) || !std::isfinite(F_D)) throw DomainError("F_D must be positive");
  if (!(F_L >= 0.0) || !std::isfinite(F_L)) throw DomainError("F_L must be nonnegative");
  if (!std::isfinite(gamma_D)) throw DomainError("gamma_D must be finite");
  const double c_expect =
      static_cast<double>(d1 * (d1 - 1)) / static_cast<double>(d2 * (d2 - 1));
  if (std::abs(c - c_expect) > 1e-12 * c_expect ||
      std::abs(M1 - static_cast<double>(d1 * (d1 - 1)) / 2.0) > 1e-12) {
    throw DomainError("c and M1 are inconsistent with d1, d2");
  }
}

namespace {

double shape_residual(double a, double c) { return a * a + a - c * std::exp(2.0 * digamma(a)); }

double shape_residual_slope(double a, double c) {
  return 2.0 * a + 1.0 - 2.0 * c * trigamma(a) * std::exp(2.0 * digamma(a));
}

}  // namespace

ShapeSolution solve_a(double c, double tol, int max_iter) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("solve_a requires c > 0");
  if (!(tol > 0.0)) throw DomainError("solve_a requires tol > 0");

  ShapeSolution out;
  if (c <= 1.0) {
    // exp(psi(a)) < a, so the residual is positive for every a and its
    // infimum 0 is approached only as a -> 0.
    out.a = tol / 2.0;
    out.residual = std::abs(shape_residual(out.a, c));
    out.interior = false;
    return out;
  }

  double lo = 1e-8, hi = 10.0;
  double f_lo = shape_residual(lo, c);
  double f_hi = shape_residual(hi, c);
  while (f_hi > 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 10.0;
    if (hi > 1e12) throw ConvergenceError("no bracket for the shape equation within [1e-8, 1e12]");
    f_hi = shape_residual(hi, c);
  }
  if (f_lo < 0.0) throw ConvergenceError("shape equation is negative at the lower bracket");

  double best = std::abs(f_lo) < std::abs(f_hi) ? lo : hi;
  double best_res = std::min(std::abs(f_lo), std::abs(f_hi));
  double x = 0.5 * (lo + hi);
  int it = 0;
  for (; it < max_iter && best_res >= tol; ++it) {
    const double fx = shape_residual(x, c);
    if (std::abs(fx) < best_res) {
      best = x;
      best_res = std::abs(fx);
    }
    if (best_res < tol) break;
    if (fx > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 1e-15 * hi) break;
    const double slope = shape_residual_slope(x, c);
    double next = x - fx / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    x = next;
  }
  out.a = best;
  out.residual = best_res;
  out.iterations = it;
  if (out.residual >= tol && it >= max_iter) return out;
  if (out.residual >= tol) {
    throw ConvergenceError("shape equation stalled at residual " + std::to_string(out.residual));
  }
  return out;
}

Matrix sample_covariance(const Matrix &obs) {
  if (obs.rows() < 2) throw DomainError("sample covariance needs at least two observations");
  const Eigen::RowVectorXd mean = obs.colwise().mean();
  const Matrix centered = obs.rowwise() - mean;
  Matrix s = centered.transpose() * centered / static_cast<double>(obs.rows() - 1);
  return 0.5 * (s + s.transpose());
}

PriorTargets prior_targets_from_sample(const Matrix &s, Index d1, Index d2, Centering centering) {
  if (s.rows() != d1 * d2 || s.cols() != d1 * d2) {
    throw DimensionError("sample covariance must be " + std::to_string(d1 * d2) + " square");
  }
  Matrix source = s;
  if (centering == Centering::Precision) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite(
          "sample covariance is not positive definite; add jitter to the data or use more "
          "observations",
          0);
    }
    source = llt.solve(Matrix::Identity(s.rows(), s.cols()));
    source = 0.5 * (source + source.transpose());
  }
  CholFactor l = [&] {
    try {
      return cholesky(source);
    } catch (const NotPositiveDefinite &e) {
      throw NotPositiveDefinite(std::string(e.what()) +
                                    "; the sample covariance is rank deficient, add jitter to "
                                    "the data or use more observations",
                                e.failing_minor);
    }
  }();
  return PriorTargets::from_factor_stats(l.log_det(), l.diag().squaredNorm(),
                                         l.strict_lower().squaredNorm(), d1, d2);
}

double solve_beta(const PriorTargets &t) {
  t.validate();
  const double a = t.M1 * t.M1 / t.c;
  const double b = std::sqrt(t.F_D) * t.M1 * (1.0 + 1.0 / t.c);
  const double disc = b * b + 4.0 * a * t.F_L;
  if (disc < 0.0) throw DomainError("negative discriminant in the beta equation");
  // 2F / (b + sqrt(disc)) avoids cancellation for small F_L
  return 2.0 * t.F_L / (b + std::sqrt(disc));
}

double diag_prior_rate(double a, double gamma_D, Index d1, Index d2) {
  return std::exp(digamma(a) - gamma_D / (2.0 * static_cast<double>(d1 * d2)));
}

double diag_shape_target(const PriorTargets &t, int mode) {
  const Index di = mode == 1 ? t.d1 : t.d2;
  return std::sqrt(t.F_D) / static_cast<double>(di) *
         std::exp(-t.gamma_D / static_cast<double>(t.d1 * t.d2));
}

SolvedHyper solve_hyper(const PriorTargets &t, double tol) {
  t.validate();
  SolvedHyper h;
  h.c1 = diag_shape_target(t, 1);
  h.c2 = diag_shape_target(t, 2);
  const ShapeSolution s1 = solve_a(h.c1, tol);
  const ShapeSolution s2 = solve_a(h.c2, tol);
  if (s1.interior && s1.residual >= tol) throw ConvergenceError("shape solve for mode 1 failed");
  if (s2.interior && s2.residual >= tol) throw ConvergenceError("shape solve for mode 2 failed");
  h.a1 = s1.a;
  h.a2 = s2.a;
  h.interior = s1.interior && s2.interior;
  h.epsilon_residual = std::max(s1.residual, s2.residual);
  h.rate1 = diag_prior_rate(h.a1, t.gamma_D, t.d1, t.d2);
  h.rate2 = diag_prior_rate(h.a2, t.gamma_D, t.d1, t.d2);
  h.beta = solve_beta(t);
  return h;
}

}  // namespace sckpd
