#include "sckpd/model.hpp"

#include "sckpd/special.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace sckpd {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_matching(const SCKPDParams &p, const DataSummary &data) {
  if (p.d1() != data.d1 || p.d2() != data.d2) {
    throw DimensionError("parameter dimensions (" + std::to_string(p.d1()) + ", " +
                         std::to_string(p.d2()) + ") do not match the data (" +
                         std::to_string(data.d1) + ", " + std::to_string(data.d2) + ")");
  }
}

// P_t / Q_t factors of L = sum_t P_t kron Q_t, t = 0..K.
void kron_factors(const SCKPDParams &p, std::vector<Matrix> &pf, std::vector<Matrix> &qf) {
  const Index K = p.K();
  pf.resize(static_cast<std::size_t>(K + 1));
  qf.resize(static_cast<std::size_t>(K + 1));
  pf[0] = p.D1.asDiagonal();
  qf[0] = p.D2.asDiagonal();
  for (Index k = 0; k < K; ++k) {
    pf[k + 1] = p.lowers1[k];
    qf[k + 1] = p.lowers2[k];
    qf[k + 1].diagonal() = p.D2;
    qf[0] += p.lowers2[k];
  }
}

}  // namespace

DataSummary DataSummary::from_scatter(const Matrix &scatter, Index n, Index d1, Index d2) {
  if (n < 0) throw DomainError("observation count must be nonnegative");
  require_symmetric(scatter, "scatter matrix");
  DataSummary s;
  s.n = n;
  s.d1 = d1;
  s.d2 = d2;
  s.scatter_pvl = pvl_decompose_full(scatter, d1, d2);
  s.trace_scatter = scatter.trace();
  return s;
}

DataSummary DataSummary::from_observations(const Matrix &obs, Index d1, Index d2) {
  if (obs.cols() != d1 * d2) {
    throw DimensionError("observations have " + std::to_string(obs.cols()) +
                         " columns, expected " + std::to_string(d1 * d2));
  }
  Matrix scatter = obs.transpose() * obs;
  scatter = 0.5 * (scatter + scatter.transpose());
  return from_scatter(scatter, obs.rows(), d1, d2);
}

CholFactor assemble_ldagger(const SCKPDParams &p) {
  Matrix l = kron(Matrix(p.D1.asDiagonal()), Matrix(p.D2.asDiagonal()));
  const Matrix dg1 = p.D1.asDiagonal();
  const Matrix dg2 = p.D2.asDiagonal();
  for (Index k = 0; k < p.K(); ++k) {
    l += kron(p.lowers1[k], dg2) + kron(dg1, p.lowers2[k]) + kron(p.lowers1[k], p.lowers2[k]);
  }
  return CholFactor(std::move(l));
}

double log_det_ldagger(const SCKPDParams &p) {
  return static_cast<double>(p.d2()) * p.D1.array().log().sum() +
         static_cast<double>(p.d1()) * p.D2.array().log().sum();
}

FactorGrad FactorGrad::zeros(Index d1, Index d2, Index K) {
  FactorGrad g;
  g.lowers1.assign(static_cast<std::size_t>(K), Matrix::Zero(d1, d1));
  g.lowers2.assign(static_cast<std::size_t>(K), Matrix::Zero(d2, d2));
  g.D1 = Vector::Zero(d1);
  g.D2 = Vector::Zero(d2);
  return g;
}

double trace_quadratic_grad(const SCKPDParams &p, const DataSummary &data, FactorGrad *grad) {
  require_matching(p, data);
  const Index K = p.K();
  const std::size_t T = static_cast<std::size_t>(K + 1);
  std::vector<Matrix> pf, qf;
  kron_factors(p, pf, qf);

  std::vector<Matrix> gp, gq;
  if (grad) {
    gp.assign(T, Matrix::Zero(p.d1(), p.d1()));
    gq.assign(T, Matrix::Zero(p.d2(), p.d2()));
  }

  std::vector<Matrix> ap(T), bq(T);
  Matrix a(T, T), b(T, T);
  double total = 0.0;
  for (const auto &term : data.scatter_pvl.terms) {
    for (std::size_t t = 0; t < T; ++t) {
      ap[t].noalias() = term.A * pf[t];
      bq[t].noalias() = term.B * qf[t];
    }
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t u = 0; u < T; ++u) {
        // tr(P_t P_u^T A) = <P_u, A P_t>
        a(t, u) = pf[u].cwiseProduct(ap[t]).sum();
        b(t, u) = qf[u].cwiseProduct(bq[t]).sum();
      }
    }
    total += a.cwiseProduct(b).sum();
    if (!grad) continue;
    for (std::size_t t = 0; t < T; ++t) {
      Matrix p_first = Matrix::Zero(p.d1(), p.d1());
      Matrix q_first = Matrix::Zero(p.d2(), p.d2());
      for (std::size_t u = 0; u < T; ++u) {
        p_first += b(t, u) * pf[u];
        q_first += a(t, u) * qf[u];
        // second slot: d/dP_u tr(P_t P_u^T A) = A P_t
        gp[u] += b(t, u) * ap[t];
        gq[u] += a(t, u) * bq[t];
      }
      // first slot: d/dP_t tr(P_t P_u^T A) = A^T P_u
      gp[t].noalias() += term.A.transpose() * p_first;
      gq[t].noalias() += term.B.transpose() * q_first;
    }
  }

  if (grad) {
    *grad = FactorGrad::zeros(p.d1(), p.d2(), K);
    grad->D1 = gp[0].diagonal();
    grad->D2 = gq[0].diagonal();
    for (Index k = 0; k < K; ++k) {
      const std::size_t t = static_cast<std::size_t>(k + 1);
      grad->lowers1[k] = strict_lower(gp[t]);
      grad->lowers2[k] = strict_lower(gq[0] + gq[t]);
      grad->D2 += gq[t].diagonal();
    }
  }
  return total;
}

double trace_quadratic(const SCKPDParams &p, const DataSummary &data) {
  return trace_quadratic_grad(p, data, nullptr);
}

double log_likelihood_grad(const SCKPDParams &p, const DataSummary &data, FactorGrad *grad) {
  const double n = static_cast<double>(data.n);
  const double d = static_cast<double>(data.d1 * data.d2);
  const double tr = trace_quadratic_grad(p, data, grad);
  if (grad) {
    for (auto &m : grad->lowers1) m *= -0.5;
    for (auto &m : grad->lowers2) m *= -0.5;
    grad->D1 = -0.5 * grad->D1 + n * static_cast<double>(p.d2()) * p.D1.cwiseInverse();
    grad->D2 = -0.5 * grad->D2 + n * static_cast<double>(p.d1()) * p.D2.cwiseInverse();
  }
  return n * log_det_ldagger(p) - 0.5 * tr - 0.5 * n * d * kLog2Pi;
}

double log_likelihood(const SCKPDParams &p, const DataSummary &data) {
  return log_likelihood_grad(p, data, nullptr);
}

double lowers_log_prior(const Matrix &l1, const Matrix &l2, double var, Matrix *grad_l1,
                        Matrix *grad_l2, double *grad_var) {
  const Matrix s1 = strict_lower(l1);
  const Matrix s2 = strict_lower(l2);
  const double count =
      static_cast<double>(l1.rows() * (l1.rows() - 1) / 2 + l2.rows() * (l2.rows() - 1) / 2);
  const double sq = s1.squaredNorm() + s2.squaredNorm();
  if (!(var > 0.0)) {
    if (sq > 0.0) return -std::numeric_limits<double>::infinity();
    // degenerate point mass at zero
    return 0.0;
  }
  if (grad_l1) *grad_l1 -= s1 / var;
  if (grad_l2) *grad_l2 -= s2 / var;
  if (grad_var) *grad_var += -0.5 * count / var + 0.5 * sq / (var * var);
  return -0.5 * count * (kLog2Pi + std::log(var)) - 0.5 * sq / var;
}

double log_prior(const SCKPDParams &p, const SolvedHyper &h, const PriorTargets &t) {
  (void)t;
  p.validate();
  double lp = 0.0;
  auto gamma_logpdf = [](double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
  };
  for (Index j = 0; j < p.d1(); ++j) lp += gamma_logpdf(p.D1[j], h.a1, h.rate1);
  for (Index j = 0; j < p.d2(); ++j) lp += gamma_logpdf(p.D2[j], h.a2, h.rate2);
  for (Index k = 0; k < p.K(); ++k) {
    lp += lowers_log_prior(p.lowers1[k], p.lowers2[k], p.omega[k] * h.beta);
  }
  if (lp == -std::numeric_limits<double>::infinity()) return lp;
  const double K = static_cast<double>(p.K());
  lp += std::lgamma(K * p.theta) - K * std::lgamma(p.theta);
  for (Index k = 0; k < p.K(); ++k) {
    if (p.theta != 1.0) lp += (p.theta - 1.0) * std::log(p.omega[k]);
  }
  // theta ~ U(0, 1) has log density 0 on its support
  return lp;
}

StaticLayout::StaticLayout(Index d1_, Index d2_, Index K_)
    : d1(d1_), d2(d2_), K(K_), m1(d1_ * (d1_ - 1) / 2), m2(d2_ * (d2_ - 1) / 2) {
  if (d1 <= 0 || d2 <= 0 || K <= 0) throw DimensionError("dimensions and K must be positive");
}

std::vector<std::string> StaticLayout::names() const {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Index k = 0; k < K; ++k) {
    for (Index i = 1; i < d1; ++i) {
      for (Index j = 0; j < i; ++j) {
        out.push_back("L1_" + std::to_string(k) + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
      }
    }
  }
  for (Index k = 0; k < K; ++k) {
    for (Index i = 1; i < d2; ++i) {
      for (Index j = 0; j < i; ++j) {
        out.push_back("L2_" + std::to_string(k) + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
      }
    }
  }
  for (Index j = 0; j < d1; ++j) out.push_back("logD1_" + std::to_string(j));
  for (Index j = 0; j < d2; ++j) out.push_back("logD2_" + std::to_string(j));
  for (Index k = 0; k + 1 < K; ++k) out.push_back("stick_" + std::to_string(k));
  out.push_back("logit_theta");
  return out;
}

void pack_strict_lower(const Matrix &l, double *out) {
  Index pos = 0;
  for (Index i = 1; i < l.rows(); ++i) {
    for (Index j = 0; j < i; ++j) out[pos++] = l(i, j);
  }
}

Matrix unpack_strict_lower(const double *in, Index d) {
  Matrix l = Matrix::Zero(d, d);
  Index pos = 0;
  for (Index i = 1; i < d; ++i) {
    for (Index j = 0; j < i; ++j) l(i, j) = in[pos++];
  }
  return l;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Vector simplex_to_stick(const Vector &omega) {
  const Index K = omega.size();
  if (K == 0) throw DimensionError("empty simplex vector");
  Vector y(K - 1);
  double rem = 1.0;
  for (Index k = 0; k + 1 < K; ++k) {
    const double z = omega[k] / rem;
    if (!(z > 0.0 && z < 1.0)) throw DomainError("weights must lie in the open simplex");
    y[k] = std::log(z) - std::log1p(-z) + std::log(static_cast<double>(K - 1 - k));
    rem -= omega[k];
  }
  return y;
}

Vector stick_to_simplex(const Vector &y) {
  const Index K = y.size() + 1;
  Vector omega(K);
  double rem = 1.0;
  for (Index k = 0; k + 1 < K; ++k) {
    const double x = y[k] - std::log(static_cast<double>(K - 1 - k));
    omega[k] = rem * logistic(x);
    rem *= logistic(-x);
  }
  omega[K - 1] = rem;
  return omega;
}

Vector stick_log_simplex(const Vector &y) {
  const Index K = y.size() + 1;
  Vector lw(K);
  double lrem = 0.0;
  for (Index k = 0; k + 1 < K; ++k) {
    const double x = y[k] - std::log(static_cast<double>(K - 1 - k));
    lw[k] = lrem + log_logistic(x);
    lrem += log_logistic(-x);
  }
  lw[K - 1] = lrem;
  return lw;
}

double stick_log_jacobian(const Vector &y) {
  const Index K = y.size() + 1;
  double lj = 0.0;
  for (Index k = 0; k + 1 < K; ++k) {
    const double x = y[k] - std::log(static_cast<double>(K - 1 - k));
    // log z + (K-1-k) log(1-z), which folds in the log of each remainder
    lj += log_logistic(x) + static_cast<double>(K - 1 - k) * log_logistic(-x);
  }
  return lj;
}

Vector stick_backprop(const Vector &y, const Vector &grad_omega) {
  const Index K = y.size() + 1;
  if (grad_omega.size() != K) throw DimensionError("gradient length does not match the simplex");
  Vector z(K - 1), rem(K);
  rem[0] = 1.0;
  Vector zc(K - 1);
  for (Index k = 0; k + 1 < K; ++k) {
    const double x = y[k] - std::log(static_cast<double>(K - 1 - k));
    z[k] = logistic(x);
    zc[k] = logistic(-x);
    rem[k + 1] = rem[k] * zc[k];
  }
  Vector gy(K - 1);
  double adj_rem = grad_omega[K - 1];
  for (Index k = K - 2; k >= 0; --k) {
    const double adj_z = rem[k] * (grad_omega[k] - adj_rem);
    const double jac = zc[k] - static_cast<double>(K - 1 - k) * z[k];
    gy[k] = adj_z * z[k] * zc[k] + jac;
    adj_rem = grad_omega[k] * z[k] + adj_rem * zc[k];
  }
  return gy;
}

Vector stick_backprop_log(const Vector &y, const Vector &grad_log_omega) {
  const Index K = y.size() + 1;
  if (grad_log_omega.size() != K) {
    throw DimensionError("gradient length does not match the simplex");
  }
  // log w_k = log z_k + sum_{j<k} log(1 - z_j); the last weight has no z term.
  // The log Jacobian is sum_k log w_k, so it enters as one more unit per weight.
  Vector gy(K - 1);
  double tail = grad_log_omega[K - 1] + 1.0;
  for (Index k = K - 2; k >= 0; --k) {
    const double x = y[k] - std::log(static_cast<double>(K - 1 - k));
    gy[k] = (grad_log_omega[k] + 1.0) * logistic(-x) - tail * logistic(x);
    tail += grad_log_omega[k] + 1.0;
  }
  return gy;
}

Vector to_unconstrained(const SCKPDParams &p) {
  p.validate();
  const StaticLayout layout(p.d1(), p.d2(), p.K());
  Vector u(layout.size());
  for (Index k = 0; k < p.K(); ++k) {
    pack_strict_lower(p.lowers1[k], u.data() + layout.lowers1(k));
    pack_strict_lower(p.lowers2[k], u.data() + layout.lowers2(k));
  }
  u.segment(layout.log_d1(), p.d1()) = p.D1.array().log();
  u.segment(layout.log_d2(), p.d2()) = p.D2.array().log();
  u.segment(layout.stick(), p.K() - 1) = simplex_to_stick(p.omega);
  u[layout.logit_theta()] = std::log(p.theta) - std::log1p(-p.theta);
  return u;
}

SCKPDParams from_unconstrained(const Vector &u, const StaticLayout &layout) {
  if (u.size() != layout.size()) {
    throw DimensionError("unconstrained vector has length " + std::to_string(u.size()) +
                         ", expected " + std::to_string(layout.size()));
  }
  SCKPDParams p;
  for (Index k = 0; k < layout.K; ++k) {
    p.lowers1.push_back(unpack_strict_lower(u.data() + layout.lowers1(k), layout.d1));
    p.lowers2.push_back(unpack_strict_lower(u.data() + layout.lowers2(k), layout.d2));
  }
  p.D1 = u.segment(layout.log_d1(), layout.d1).array().exp();
  p.D2 = u.segment(layout.log_d2(), layout.d2).array().exp();
  p.omega = stick_to_simplex(u.segment(layout.stick(), layout.K - 1));
  p.theta = logistic(u[layout.logit_theta()]);
  return p;
}

namespace detail {

double diag_prior_logjac(const Vector &log_d1, const Vector &log_d2, const SolvedHyper &h,
                         Eigen::Ref<Vector> grad_log_d1, Eigen::Ref<Vector> grad_log_d2) {
  double lp = 0.0;
  auto add = [&](const Vector &ld, double shape, double rate, Eigen::Ref<Vector> g) {
    const double norm = shape * std::log(rate) - std::lgamma(shape);
    for (Index j = 0; j < ld.size(); ++j) {
      const double x = std::exp(ld[j]);
      // Gamma density times the Jacobian x of the log transform
      lp += norm + shape * ld[j] - rate * x;
      g[j] += shape - rate * x;
    }
  };
  add(log_d1, h.a1, h.rate1, grad_log_d1);
  add(log_d2, h.a2, h.rate2, grad_log_d2);
  return lp;
}

double weights_prior_logjac(const Vector &log_omega, double logit_theta,
                            Vector &grad_log_omega, double &grad_logit) {
  const Index K = log_omega.size();
  const double Kd = static_cast<double>(K);
  const double theta = logistic(logit_theta);
  double lp = std::lgamma(Kd * theta) - Kd * std::lgamma(theta);
  double sum_log = 0.0;
  for (Index k = 0; k < K; ++k) {
    const double lw = log_omega[k];
    sum_log += lw;
    lp += (theta - 1.0) * lw;
    grad_log_omega[k] += theta - 1.0;
  }
  double dtheta = 0.0;
  if (K > 1) dtheta = Kd * digamma(Kd * theta) - Kd * digamma(theta) + sum_log;
  // logit Jacobian theta (1 - theta)
  lp += log_logistic(logit_theta) + log_logistic(-logit_theta);
  grad_logit = dtheta * theta * (1.0 - theta) + (1.0 - 2.0 * theta);
  return lp;
}

double lower_scale(double omega, double beta, LowerParam param) {
  return param == LowerParam::Centered ? 1.0 : std::sqrt(omega * beta);
}

double component_lowers_term(const Matrix &raw1, const Matrix &raw2, double omega, double beta,
                             LowerParam param, Matrix &g1, Matrix &g2, double &grad_log_omega) {
  if (param == LowerParam::Centered) {
    const double var = omega * beta;
    double g_var = 0.0;
    const double lp = lowers_log_prior(raw1, raw2, var, &g1, &g2, &g_var);
    if (var > 0.0) grad_log_omega += g_var * var;
    return lp;
  }
  const double s = std::sqrt(omega * beta);
  const double gz = g1.cwiseProduct(strict_lower(raw1)).sum() +
                    g2.cwiseProduct(strict_lower(raw2)).sum();
  grad_log_omega += 0.5 * s * gz;
  g1 *= s;
  g2 *= s;
  return lowers_log_prior(raw1, raw2, 1.0, &g1, &g2, nullptr);
}

}  // namespace detail

LowerParam parse_lower_param(const std::string &name) {
  if (name == "centered") return LowerParam::Centered;
  if (name == "standardized") return LowerParam::Standardized;
  throw ConfigError("lower_param must be 'centered' or 'standardized', got '" + name + "'");
}

std::string to_string(LowerParam p) {
  return p == LowerParam::Centered ? "centered" : "standardized";
}

StaticPosterior::StaticPosterior(DataSummary data, SolvedHyper hyper, PriorTargets targets,
                                 Index K, LowerParam param)
    : data_(std::move(data)),
      hyper_(hyper),
      targets_(targets),
      layout_(data_.d1, data_.d2, K),
      param_(param) {
  if (!(hyper_.beta > 0.0)) {
    throw DomainError("beta must be positive; the strict lower target F_L is zero");
  }
  if (!(hyper_.a1 > 0.0 && hyper_.a2 > 0.0 && hyper_.rate1 > 0.0 && hyper_.rate2 > 0.0)) {
    throw DomainError("Gamma hyperparameters must be positive");
  }
}

SCKPDParams StaticPosterior::params(const Vector &u) const {
  SCKPDParams p = from_unconstrained(u, layout_);
  if (param_ == LowerParam::Centered) return p;
  for (Index k = 0; k < layout_.K; ++k) {
    const double s = detail::lower_scale(p.omega[k], hyper_.beta, param_);
    p.lowers1[k] *= s;
    p.lowers2[k] *= s;
  }
  return p;
}

double StaticPosterior::log_density_grad(const Vector &u, Vector &grad) const {
  const StaticLayout &L = layout_;
  const SCKPDParams raw = from_unconstrained(u, L);
  const SCKPDParams p = params(u);
  grad = Vector::Zero(L.size());

  FactorGrad fg;
  double lp = log_likelihood_grad(p, data_, &fg);

  Vector grad_log_omega = Vector::Zero(L.K);
  for (Index k = 0; k < L.K; ++k) {
    Matrix g1 = fg.lowers1[k];
    Matrix g2 = fg.lowers2[k];
    lp += detail::component_lowers_term(raw.lowers1[k], raw.lowers2[k], p.omega[k], hyper_.beta,
                                        param_, g1, g2, grad_log_omega[k]);
    pack_strict_lower(g1, grad.data() + L.lowers1(k));
    pack_strict_lower(g2, grad.data() + L.lowers2(k));
  }

  auto g_ld1 = grad.segment(L.log_d1(), L.d1);
  auto g_ld2 = grad.segment(L.log_d2(), L.d2);
  g_ld1 = fg.D1.cwiseProduct(p.D1);
  g_ld2 = fg.D2.cwiseProduct(p.D2);
  lp += detail::diag_prior_logjac(u.segment(L.log_d1(), L.d1), u.segment(L.log_d2(), L.d2),
                                  hyper_, g_ld1, g_ld2);

  const Vector y = u.segment(L.stick(), L.K - 1);
  double g_logit = 0.0;
  lp += detail::weights_prior_logjac(stick_log_simplex(y), u[L.logit_theta()], grad_log_omega,
                                     g_logit);
  grad[L.logit_theta()] = g_logit;
  lp += stick_log_jacobian(y);
  grad.segment(L.stick(), L.K - 1) = stick_backprop_log(y, grad_log_omega);
  return lp;
}

double StaticPosterior::log_density(const Vector &u) const {
  Vector g;
  return log_density_grad(u, g);
}

}  // namespace sckpd
