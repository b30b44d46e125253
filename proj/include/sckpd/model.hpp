#pragma once

// Static model: L-dagger assembly, likelihood through the Kronecker terms of
// the scatter matrix, priors, the unconstrained parameterisation and the
// analytic gradient of the log posterior.

#include "sckpd/chol_geometry.hpp"
#include "sckpd/common.hpp"
#include "sckpd/hyperprior.hpp"
#include "sckpd/kronecker.hpp"
#include "sckpd/params.hpp"

#include <string>
#include <vector>

namespace sckpd {

// Sufficient statistics of zero-mean observations: the count and the
// Kronecker terms of the scatter sum_i y_i y_i^T.
struct DataSummary {
  Index n = 0;
  Index d1 = 0;
  Index d2 = 0;
  PVLDecomp scatter_pvl;
  double trace_scatter = 0.0;

  // obs is n x (d1 d2) with y[d2*i + j] = Y[i, j].
  static DataSummary from_observations(const Matrix &obs, Index d1, Index d2);
  static DataSummary from_scatter(const Matrix &scatter, Index n, Index d1, Index d2);
};

CholFactor assemble_ldagger(const SCKPDParams &p);

// d2 sum log D1 + d1 sum log D2
double log_det_ldagger(const SCKPDParams &p);

// Gradient of a scalar with respect to the factor blocks of SCKPDParams.
struct FactorGrad {
  std::vector<Matrix> lowers1;
  std::vector<Matrix> lowers2;
  Vector D1;
  Vector D2;

  static FactorGrad zeros(Index d1, Index d2, Index K);
};

// tr(L L^T sum_i y_i y_i^T) for L = L-dagger, from the scatter's Kronecker
// terms. Writing L = D1 kron N2 + sum_k floor(L1k) kron M2k with
// N2 = D2 + sum_k floor(L2k) and M2k = D2 + floor(L2k), each scatter term
// A kron B contributes sum_{t,u} tr(P_t P_u^T A) tr(Q_t Q_u^T B).
double trace_quadratic(const SCKPDParams &p, const DataSummary &data);

// Same value; if grad is non-null its entries are overwritten with the
// derivative (strict lower parts and diagonals only).
double trace_quadratic_grad(const SCKPDParams &p, const DataSummary &data, FactorGrad *grad);

double log_likelihood(const SCKPDParams &p, const DataSummary &data);
double log_likelihood_grad(const SCKPDParams &p, const DataSummary &data, FactorGrad *grad);

// Sum of the Gamma, normal, Dirichlet and uniform log densities. A weight of
// zero paired with nonzero lowers gives -infinity.
double log_prior(const SCKPDParams &p, const SolvedHyper &h, const PriorTargets &t);

// Normal(0, var) log density of every strict-lower entry of one component;
// adds derivatives into grad_l1 / grad_l2 / grad_var when non-null.
double lowers_log_prior(const Matrix &l1, const Matrix &l2, double var, Matrix *grad_l1 = nullptr,
                        Matrix *grad_l2 = nullptr, double *grad_var = nullptr);

// Layout of the unconstrained vector:
//   [lowers1 (K blocks of d1(d1-1)/2), lowers2 (K blocks of d2(d2-1)/2),
//    log D1, log D2, stick-breaking (K-1), logit theta]
// Strict lower entries are stored row by row.
struct StaticLayout {
  Index d1 = 0, d2 = 0, K = 0;
  Index m1 = 0, m2 = 0;

  StaticLayout() = default;
  StaticLayout(Index d1, Index d2, Index K);

  Index lowers1(Index k) const { return k * m1; }
  Index lowers2(Index k) const { return K * m1 + k * m2; }
  Index log_d1() const { return K * (m1 + m2); }
  Index log_d2() const { return log_d1() + d1; }
  Index stick() const { return log_d2() + d2; }
  Index logit_theta() const { return stick() + K - 1; }
  Index size() const { return logit_theta() + 1; }

  std::vector<std::string> names() const;
};

void pack_strict_lower(const Matrix &l, double *out);
Matrix unpack_strict_lower(const double *in, Index d);

// Centred stick-breaking: uniform weights map to all-zero coordinates.
Vector simplex_to_stick(const Vector &omega);
Vector stick_to_simplex(const Vector &y);
// log omega(y) without underflow for extreme y.
Vector stick_log_simplex(const Vector &y);
// log |d omega / d y| over the first K-1 weights.
double stick_log_jacobian(const Vector &y);
// Given d target / d omega (length K), returns the gradient in y of
// target(omega(y)) + stick_log_jacobian(y).
Vector stick_backprop(const Vector &y, const Vector &grad_omega);
// Same with the target written as a function of log omega; no division by
// tiny weights.
Vector stick_backprop_log(const Vector &y, const Vector &grad_log_omega);

Vector to_unconstrained(const SCKPDParams &p);
SCKPDParams from_unconstrained(const Vector &u, const StaticLayout &layout);

// Centered: the unconstrained lowers are the factor entries themselves.
// Standardized: they are z with lowers = sqrt(omega_k beta) z, which removes
// the funnel between small weights and their lowers.
enum class LowerParam { Centered, Standardized };

LowerParam parse_lower_param(const std::string &name);
std::string to_string(LowerParam p);

double logistic(double x);
double log_logistic(double x);  // log(logistic(x)), stable for large |x|

class StaticPosterior {
 public:
  StaticPosterior(DataSummary data, SolvedHyper hyper, PriorTargets targets, Index K,
                  LowerParam param = LowerParam::Centered);

  const StaticLayout &layout() const { return layout_; }
  Index dim() const { return layout_.size(); }
  const DataSummary &data() const { return data_; }
  const SolvedHyper &hyper() const { return hyper_; }
  const PriorTargets &targets() const { return targets_; }
  LowerParam lower_param() const { return param_; }

  // Model parameters of an unconstrained point.
  SCKPDParams params(const Vector &u) const;

  // log likelihood + log prior + log Jacobian; fills grad (resized) and
  // returns -infinity / NaN for states the sampler must treat as divergent.
  double log_density_grad(const Vector &u, Vector &grad) const;
  double log_density(const Vector &u) const;

 private:
  DataSummary data_;
  SolvedHyper hyper_;
  PriorTargets targets_;
  StaticLayout layout_;
  LowerParam param_;
};

// Shared pieces of the unconstrained posterior, reused by the dynamic model.
namespace detail {

// Gamma priors on the shared diagonals with the log-transform Jacobian,
// written in terms of log D. Adds d/d log D into the gradient slices.
double diag_prior_logjac(const Vector &log_d1, const Vector &log_d2, const SolvedHyper &h,
                         Eigen::Ref<Vector> grad_log_d1, Eigen::Ref<Vector> grad_log_d2);

// Dirichlet(theta) on omega (given as log omega) and the logit-uniform prior
// on theta with its Jacobian. grad_log_omega receives d/d log omega; returns
// d/d logit theta in grad_logit.
double weights_prior_logjac(const Vector &log_omega, double logit_theta,
                            Vector &grad_log_omega, double &grad_logit);

// Prior term of one component's unconstrained lowers raw1/raw2. On entry
// g1/g2 hold d/d lowers of the rest of the density; on exit d/d raw. Adds
// d/d log omega (of the whole term, likelihood included) into grad_log_omega.
double component_lowers_term(const Matrix &raw1, const Matrix &raw2, double omega, double beta,
                             LowerParam param, Matrix &g1, Matrix &g2, double &grad_log_omega);

double lower_scale(double omega, double beta, LowerParam param);

}  // namespace detail

}  // namespace sckpd
