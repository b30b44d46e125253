#include "sckpd/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sckpd {

void require_column_stochastic(const Matrix &a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError("transition matrix must be square and nonempty");
  }
  if (a.minCoeff() < 0.0) throw DomainError("transition matrix has negative entries");
  for (Index j = 0; j < a.cols(); ++j) {
    if (std::abs(a.col(j).sum() - 1.0) > 1e-12) {
      throw DomainError("column " + std::to_string(j) + " of the transition matrix sums to " +
                        std::to_string(a.col(j).sum()));
    }
  }
}

StochasticMatrix stochastic_from_gammas(const Matrix &g) {
  if (g.rows() != g.cols() || g.rows() == 0) {
    throw DimensionError("generating matrix must be square and nonempty");
  }
  if (!(g.minCoeff() > 0.0) || !g.allFinite()) {
    throw DomainError("generating matrix entries must be finite and positive");
  }
  StochasticMatrix s;
  s.G = g;
  s.A = g.array().rowwise() / g.colwise().sum().array();
  return s;
}

Vector propagate_omega(const Matrix &a, const Vector &omega, Index steps) {
  require_column_stochastic(a);
  if (omega.size() != a.cols()) throw DimensionError("weights and matrix disagree in size");
  if (steps < 0) throw DomainError("steps must be nonnegative");
  if (omega.minCoeff() < 0.0 || std::abs(omega.sum() - 1.0) > 1e-12) {
    throw DomainError("weights must lie on the unit simplex");
  }
  Vector w = omega;
  for (Index i = 0; i < steps; ++i) w = a * w;
  return w;
}

OmegaIndexing parse_omega_indexing(const std::string &name) {
  if (name == "sequential") return OmegaIndexing::Sequential;
  if (name == "cycle_plus_season") return OmegaIndexing::CyclePlusSeason;
  throw ConfigError("unknown omega indexing '" + name +
                    "' (expected sequential or cycle_plus_season)");
}

std::string to_string(OmegaIndexing x) {
  return x == OmegaIndexing::Sequential ? "sequential" : "cycle_plus_season";
}

Index SeasonSchedule::steps_for_block(Index b) const {
  const Index c = b / n_seasons, s = b % n_seasons;
  return indexing == OmegaIndexing::Sequential ? n_seasons * c + s : c + s;
}

Index SeasonSchedule::max_steps() const {
  Index m = 0;
  for (Index b = 0; b < n_blocks(); ++b) m = std::max(m, steps_for_block(b));
  return m;
}

Index SeasonSchedule::matrix_for_step(Index j) const {
  if (activation.empty()) return 0;
  return activation[static_cast<std::size_t>(j % n_seasons)];
}

Index SeasonSchedule::n_matrices() const {
  if (max_steps() == 0) return 0;
  if (activation.empty()) return 1;
  return *std::max_element(activation.begin(), activation.end()) + 1;
}

void SeasonSchedule::validate() const {
  if (n_seasons <= 0 || n_cycles <= 0) throw DomainError("seasons and cycles must be positive");
  if (static_cast<Index>(blocks.size()) != n_blocks()) {
    throw DimensionError("schedule has " + std::to_string(blocks.size()) + " blocks, expected " +
                         std::to_string(n_blocks()));
  }
  if (!activation.empty()) {
    if (static_cast<Index>(activation.size()) != n_seasons) {
      throw DimensionError("activation map needs one entry per season");
    }
    for (Index m : activation) {
      if (m < 0) throw DomainError("activation entries must be nonnegative");
    }
  }
  for (const auto &blk : blocks) {
    if (blk.d1 != blocks.front().d1 || blk.d2 != blocks.front().d2) {
      throw DimensionError("all blocks must share (d1, d2)");
    }
  }
}

std::vector<Vector> omega_path(const std::vector<Matrix> &mats, const SeasonSchedule &sched,
                               const Vector &omega1) {
  std::vector<Vector> path{omega1};
  const Index steps = sched.max_steps();
  for (Index j = 1; j <= steps; ++j) {
    const Matrix &a = mats.at(static_cast<std::size_t>(sched.matrix_for_step(j)));
    path.push_back(a * path.back());
  }
  return path;
}

SCKPDParams SDParams::block_params(Index b, const std::vector<Vector> &path,
                                   const SeasonSchedule &sched) const {
  SCKPDParams p;
  p.lowers1 = lowers1.at(static_cast<std::size_t>(b));
  p.lowers2 = lowers2.at(static_cast<std::size_t>(b));
  p.D1 = D1;
  p.D2 = D2;
  p.omega = path.at(static_cast<std::size_t>(sched.steps_for_block(b)));
  p.theta = theta;
  return p;
}

SDLayout::SDLayout(Index d1_, Index d2_, Index K_, Index n_blocks_, Index n_matrices_)
    : d1(d1_),
      d2(d2_),
      K(K_),
      n_blocks(n_blocks_),
      n_matrices(n_matrices_),
      m1(d1_ * (d1_ - 1) / 2),
      m2(d2_ * (d2_ - 1) / 2) {
  if (d1 <= 0 || d2 <= 0 || K <= 0 || n_blocks <= 0 || n_matrices < 0) {
    throw DimensionError("invalid dynamic layout sizes");
  }
}

std::vector<std::string> SDLayout::names() const {
  std::vector<std::string> out;
  const StaticLayout st(d1, d2, K);
  const auto base = st.names();
  for (Index b = 0; b < n_blocks; ++b) {
    for (Index i = 0; i < st.log_d1(); ++i) {
      out.push_back("b" + std::to_string(b) + "_" + base[static_cast<std::size_t>(i)]);
    }
  }
  for (Index i = st.log_d1(); i < st.size(); ++i) out.push_back(base[static_cast<std::size_t>(i)]);
  for (Index m = 0; m < n_matrices; ++m) {
    for (Index j = 0; j < K; ++j) {
      for (Index i = 0; i < K; ++i) {
        out.push_back("logG" + std::to_string(m) + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
      }
    }
  }
  return out;
}

Vector sd_to_unconstrained(const SDParams &p, const SDLayout &L) {
  Vector u(L.size());
  for (Index b = 0; b < L.n_blocks; ++b) {
    for (Index k = 0; k < L.K; ++k) {
      pack_strict_lower(p.lowers1.at(b).at(k), u.data() + L.lowers1(b, k));
      pack_strict_lower(p.lowers2.at(b).at(k), u.data() + L.lowers2(b, k));
    }
  }
  if (!(p.D1.minCoeff() > 0.0) || !(p.D2.minCoeff() > 0.0)) {
    throw DomainError("diagonals must be strictly positive");
  }
  u.segment(L.log_d1(), L.d1) = p.D1.array().log();
  u.segment(L.log_d2(), L.d2) = p.D2.array().log();
  u.segment(L.stick(), L.K - 1) = simplex_to_stick(p.omega1);
  if (!(p.theta > 0.0 && p.theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  u[L.logit_theta()] = std::log(p.theta) - std::log1p(-p.theta);
  if (static_cast<Index>(p.gammas.size()) != L.n_matrices) {
    throw DimensionError("wrong number of generating matrices");
  }
  for (Index m = 0; m < L.n_matrices; ++m) {
    const Matrix &g = p.gammas[static_cast<std::size_t>(m)];
    if (!(g.minCoeff() > 0.0)) throw DomainError("generating entries must be positive");
    u.segment(L.log_gamma(m), L.K * L.K) = Eigen::Map<const Vector>(g.data(), g.size()).array().log();
  }
  return u;
}

SDParams sd_from_unconstrained(const Vector &u, const SDLayout &L) {
  if (u.size() != L.size()) throw DimensionError("unconstrained vector has the wrong length");
  SDParams p;
  p.lowers1.resize(static_cast<std::size_t>(L.n_blocks));
  p.lowers2.resize(static_cast<std::size_t>(L.n_blocks));
  for (Index b = 0; b < L.n_blocks; ++b) {
    for (Index k = 0; k < L.K; ++k) {
      p.lowers1[b].push_back(unpack_strict_lower(u.data() + L.lowers1(b, k), L.d1));
      p.lowers2[b].push_back(unpack_strict_lower(u.data() + L.lowers2(b, k), L.d2));
    }
  }
  p.D1 = u.segment(L.log_d1(), L.d1).array().exp();
  p.D2 = u.segment(L.log_d2(), L.d2).array().exp();
  p.omega1 = stick_to_simplex(u.segment(L.stick(), L.K - 1));
  p.theta = logistic(u[L.logit_theta()]);
  for (Index m = 0; m < L.n_matrices; ++m) {
    Vector g = u.segment(L.log_gamma(m), L.K * L.K).array().exp();
    p.gammas.push_back(Eigen::Map<const Matrix>(g.data(), L.K, L.K));
  }
  return p;
}

SDPosterior::SDPosterior(SeasonSchedule schedule, SolvedHyper hyper, PriorTargets targets,
                         Index K, double gamma_shape, LowerParam param)
    : sched_(std::move(schedule)),
      hyper_(hyper),
      targets_(targets),
      gamma_shape_(gamma_shape),
      param_(param) {
  sched_.validate();
  const auto &first = sched_.blocks.front();
  layout_ = SDLayout(first.d1, first.d2, K, sched_.n_blocks(), sched_.n_matrices());
  if (!(hyper_.beta > 0.0)) throw DomainError("beta must be positive");
  if (!(gamma_shape_ > 0.0)) throw DomainError("transition Gamma shape must be positive");
}

namespace {

// Column-normalised exp(log G), shifted per column so extreme entries neither
// overflow nor leave an all-zero column.
Matrix stochastic_from_log(const Eigen::Ref<const Vector> &log_g, Index K) {
  Matrix a = Eigen::Map<const Matrix>(log_g.data(), K, K);
  for (Index j = 0; j < K; ++j) {
    a.col(j) = (a.col(j).array() - a.col(j).maxCoeff()).exp();
    a.col(j) /= a.col(j).sum();
  }
  return a;
}

std::vector<Matrix> transition_matrices(const Vector &u, const SDLayout &L) {
  std::vector<Matrix> mats;
  for (Index m = 0; m < L.n_matrices; ++m) {
    mats.push_back(stochastic_from_log(u.segment(L.log_gamma(m), L.K * L.K), L.K));
  }
  return mats;
}

}  // namespace

SDParams SDPosterior::params(const Vector &u, std::vector<Vector> *path_out) const {
  SDParams p = sd_from_unconstrained(u, layout_);
  const std::vector<Matrix> mats = transition_matrices(u, layout_);
  const std::vector<Vector> path = omega_path(mats, sched_, p.omega1);
  if (param_ == LowerParam::Standardized) {
    for (Index b = 0; b < layout_.n_blocks; ++b) {
      const Vector &w = path[static_cast<std::size_t>(sched_.steps_for_block(b))];
      for (Index k = 0; k < layout_.K; ++k) {
        const double s = detail::lower_scale(w[k], hyper_.beta, param_);
        p.lowers1[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] *= s;
        p.lowers2[static_cast<std::size_t>(b)][static_cast<std::size_t>(k)] *= s;
      }
    }
  }
  if (path_out) *path_out = path;
  return p;
}

double SDPosterior::log_density_grad(const Vector &u, Vector &grad) const {
  const SDLayout &L = layout_;
  const SDParams raw = sd_from_unconstrained(u, L);
  std::vector<Vector> path;
  const SDParams p = params(u, &path);
  grad = Vector::Zero(L.size());

  if (!u.allFinite()) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<Matrix> mats = transition_matrices(u, L);
  std::vector<Vector> grad_path(path.size(), Vector::Zero(L.K));
  // blocks on the first weights contribute in log space directly
  Vector grad_log_omega1 = Vector::Zero(L.K);

  double lp = 0.0;
  Vector grad_d1 = Vector::Zero(L.d1), grad_d2 = Vector::Zero(L.d2);
  for (Index b = 0; b < L.n_blocks; ++b) {
    const SCKPDParams bp = p.block_params(b, path, sched_);
    FactorGrad fg;
    lp += log_likelihood_grad(bp, sched_.blocks[static_cast<std::size_t>(b)], &fg);
    grad_d1 += fg.D1;
    grad_d2 += fg.D2;
    const Index steps = sched_.steps_for_block(b);
    Vector &gw = grad_path[static_cast<std::size_t>(steps)];
    for (Index k = 0; k < L.K; ++k) {
      Matrix g1 = fg.lowers1[k];
      Matrix g2 = fg.lowers2[k];
      const auto bi = static_cast<std::size_t>(b);
      const auto ki = static_cast<std::size_t>(k);
      double g_log = 0.0;
      lp += detail::component_lowers_term(raw.lowers1[bi][ki], raw.lowers2[bi][ki], bp.omega[k],
                                          hyper_.beta, param_, g1, g2, g_log);
      if (steps == 0) {
        grad_log_omega1[k] += g_log;
      } else if (bp.omega[k] > 0.0) {
        // an underflowed weight passes no gradient back
        gw[k] += g_log / bp.omega[k];
      }
      pack_strict_lower(g1, grad.data() + L.lowers1(b, k));
      pack_strict_lower(g2, grad.data() + L.lowers2(b, k));
    }
  }

  auto g_ld1 = grad.segment(L.log_d1(), L.d1);
  auto g_ld2 = grad.segment(L.log_d2(), L.d2);
  g_ld1 = grad_d1.cwiseProduct(p.D1);
  g_ld2 = grad_d2.cwiseProduct(p.D2);
  lp += detail::diag_prior_logjac(u.segment(L.log_d1(), L.d1), u.segment(L.log_d2(), L.d2),
                                  hyper_, g_ld1, g_ld2);

  // reverse pass through the weight propagation
  std::vector<Matrix> grad_a(mats.size(), Matrix::Zero(L.K, L.K));
  for (std::size_t j = path.size() - 1; j >= 1; --j) {
    const std::size_t m = static_cast<std::size_t>(sched_.matrix_for_step(static_cast<Index>(j)));
    grad_a[m].noalias() += grad_path[j] * path[j - 1].transpose();
    grad_path[j - 1].noalias() += mats[m].transpose() * grad_path[j];
  }

  const Vector y = u.segment(L.stick(), L.K - 1);
  grad_log_omega1 += p.omega1.cwiseProduct(grad_path[0]);
  double g_logit = 0.0;
  lp += detail::weights_prior_logjac(stick_log_simplex(y), u[L.logit_theta()], grad_log_omega1,
                                     g_logit);
  grad[L.logit_theta()] = g_logit;
  lp += stick_log_jacobian(y);
  grad.segment(L.stick(), L.K - 1) = stick_backprop_log(y, grad_log_omega1);

  for (Index m = 0; m < L.n_matrices; ++m) {
    const Matrix &g = p.gammas[static_cast<std::size_t>(m)];
    const Matrix &a = mats[static_cast<std::size_t>(m)];
    const Matrix &ga = grad_a[static_cast<std::size_t>(m)];
    // softmax Jacobian of each column of A in log G
    const Eigen::RowVectorXd inner = ga.cwiseProduct(a).colwise().sum();
    const Matrix gg = (ga.rowwise() - inner).cwiseProduct(a);
    const auto lg = u.segment(L.log_gamma(m), L.K * L.K);
    // Gamma(shape, 1) on G with the log Jacobian: shape * log G - G - lgamma(shape)
    lp += gamma_shape_ * lg.sum() - g.sum() -
          static_cast<double>(L.K * L.K) * std::lgamma(gamma_shape_);
    Eigen::Map<Matrix>(grad.data() + L.log_gamma(m), L.K, L.K) =
        gg.array() + gamma_shape_ - g.array();
  }
  return lp;
}

double SDPosterior::log_density(const Vector &u) const {
  Vector g;
  return log_density_grad(u, g);
}

}  // namespace sckpd
