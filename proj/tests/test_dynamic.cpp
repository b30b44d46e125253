#include "catch_amalgamated.hpp"

#include "sckpd/dynamic.hpp"
#include "support.hpp"

#include <cmath>
#include <limits>

using namespace sckpd;
using namespace testing_support;

namespace {

Matrix random_stochastic(Index K, Rng &rng) {
  Matrix a(K, K);
  for (Index j = 0; j < K; ++j) a.col(j) = random_simplex(K, rng);
  return a;
}

Matrix random_gammas(Index K, Rng &rng) {
  Matrix g(K, K);
  for (Index i = 0; i < K; ++i)
    for (Index j = 0; j < K; ++j) g(i, j) = std::exp(0.7 * normal(rng));
  return g;
}

SDParams random_sd_params(Index d1, Index d2, Index K, Index n_blocks, Index n_mats, Rng &rng) {
  SDParams p;
  for (Index b = 0; b < n_blocks; ++b) {
    const SCKPDParams s = random_params(d1, d2, K, rng, 0.3);
    p.lowers1.push_back(s.lowers1);
    p.lowers2.push_back(s.lowers2);
    if (b == 0) {
      p.D1 = s.D1;
      p.D2 = s.D2;
      p.omega1 = s.omega;
      p.theta = s.theta;
    }
  }
  for (Index m = 0; m < n_mats; ++m) p.gammas.push_back(random_gammas(K, rng));
  return p;
}

SeasonSchedule random_schedule(Index d1, Index d2, Index S, Index C, Rng &rng,
                               std::vector<Index> activation = {}) {
  SeasonSchedule s;
  s.n_seasons = S;
  s.n_cycles = C;
  s.activation = std::move(activation);
  for (Index b = 0; b < S * C; ++b) {
    s.blocks.push_back(
        DataSummary::from_observations(random_observations(8 + b, d1 * d2, rng), d1, d2));
  }
  return s;
}

struct Setup {
  PriorTargets targets;
  SolvedHyper hyper;
};

Setup setup(Index d1, Index d2) {
  Setup s;
  s.targets =
      PriorTargets::from_factor_stats(0.2, 3.0 * static_cast<double>(d1 * d2), 5.0, d1, d2);
  s.hyper = solve_hyper(s.targets);
  return s;
}

double gamma_logpdf(double x, double a, double rate) {
  return a * std::log(rate) - std::lgamma(a) + (a - 1.0) * std::log(x) - rate * x;
}

// Posterior value rebuilt from the static module, block by block, with the
// weight path computed by explicit matrix products.
double blockwise_oracle(const SDParams &p, const SeasonSchedule &sched, const Setup &su,
                        double alpha) {
  const Index K = p.omega1.size();
  std::vector<Matrix> mats;
  for (const auto &g : p.gammas) {
    Matrix a = g;
    for (Index j = 0; j < K; ++j) a.col(j) /= g.col(j).sum();
    mats.push_back(a);
  }
  double lp = 0.0;
  for (Index b = 0; b < sched.n_blocks(); ++b) {
    const Index c = b / sched.n_seasons, s = b % sched.n_seasons;
    const Index steps =
        sched.indexing == OmegaIndexing::Sequential ? sched.n_seasons * c + s : c + s;
    Vector w = p.omega1;
    for (Index j = 1; j <= steps; ++j) {
      const Index m = sched.activation.empty() ? 0 : sched.activation[j % sched.n_seasons];
      w = mats[m] * w;
    }
    SCKPDParams bp;
    bp.lowers1 = p.lowers1[b];
    bp.lowers2 = p.lowers2[b];
    bp.D1 = p.D1;
    bp.D2 = p.D2;
    bp.omega = w;
    bp.theta = p.theta;
    lp += log_likelihood(bp, sched.blocks[b]);
    for (Index k = 0; k < K; ++k) {
      const double var = w[k] * su.hyper.beta;
      for (const Matrix *m : {&bp.lowers1[k], &bp.lowers2[k]})
        for (Index i = 0; i < m->rows(); ++i)
          for (Index j = 0; j < i; ++j)
            lp += -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (*m)(i, j) * (*m)(i, j) / var;
    }
  }
  for (Index j = 0; j < p.D1.size(); ++j)
    lp += gamma_logpdf(p.D1[j], su.hyper.a1, su.hyper.rate1) + std::log(p.D1[j]);
  for (Index j = 0; j < p.D2.size(); ++j)
    lp += gamma_logpdf(p.D2[j], su.hyper.a2, su.hyper.rate2) + std::log(p.D2[j]);
  const double kd = static_cast<double>(K);
  lp += std::lgamma(kd * p.theta) - kd * std::lgamma(p.theta);
  for (Index k = 0; k < K; ++k) lp += (p.theta - 1.0) * std::log(p.omega1[k]);
  lp += std::log(p.theta) + std::log1p(-p.theta);
  lp += stick_log_jacobian(simplex_to_stick(p.omega1));
  for (const auto &g : p.gammas)
    for (Index i = 0; i < K; ++i)
      for (Index j = 0; j < K; ++j)
        lp += gamma_logpdf(g(i, j), alpha, 1.0) + std::log(g(i, j));
  return lp;
}

}  // namespace

TEST_CASE("weight propagation") {
  Rng rng = make_rng(71, 0);
  const Vector w = random_simplex(4, rng);
  for (Index steps : {0, 1, 5, 17}) {
    CHECK((propagate_omega(Matrix::Identity(4, 4), w, steps) - w).norm() == 0.0);
  }
  const Vector avg = propagate_omega(Matrix::Constant(4, 4, 0.25), w, 1);
  CHECK((avg - Vector::Constant(4, 0.25)).cwiseAbs().maxCoeff() < 1e-15);

  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_stochastic(5, rng);
    const Vector w0 = random_simplex(5, rng);
    const Vector out = propagate_omega(a, w0, 3);
    Vector expect(5);
    Vector cur = w0;
    for (int s = 0; s < 3; ++s) {
      for (Index i = 0; i < 5; ++i) {
        double acc = 0.0;
        for (Index j = 0; j < 5; ++j) acc += a(i, j) * cur[j];
        expect[i] = acc;
      }
      cur = expect;
    }
    CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(out.sum() - 1.0) < 1e-12);
    const Vector far = propagate_omega(a, w0, 50);
    CHECK(std::abs(far.sum() - 1.0) < 1e-10);
    CHECK(far.minCoeff() >= 0.0);
  }

  Matrix rowwise = random_stochastic(3, rng).transpose();
  rowwise(0, 0) += 0.3;
  CHECK_THROWS_AS(propagate_omega(rowwise, random_simplex(3, rng), 1), DomainError);
  CHECK_THROWS_AS(propagate_omega(Matrix::Identity(3, 3), random_simplex(4, rng), 1),
                  DimensionError);
}

TEST_CASE("transition matrices from positive generating values") {
  const StochasticMatrix flat = stochastic_from_gammas(Matrix::Constant(3, 3, 2.5));
  CHECK((flat.A - Matrix::Constant(3, 3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-15);

  Matrix dom = Matrix::Constant(3, 3, 1e-9);
  dom(1, 0) = dom(2, 1) = dom(0, 2) = 1.0;
  const StochasticMatrix perm = stochastic_from_gammas(dom);
  CHECK(perm.A(1, 0) > 1.0 - 1e-8);
  CHECK_NOTHROW(require_column_stochastic(perm.A));

  Matrix bad = Matrix::Ones(3, 3);
  bad(2, 2) = 0.0;
  CHECK_THROWS_AS(stochastic_from_gammas(bad), DomainError);
}

TEST_CASE("normalised Gamma columns have Dirichlet moments") {
  Rng rng = make_rng(72, 0);
  const Index K = 4;
  for (double alpha : {0.5, 1.0, 3.0}) {
    std::gamma_distribution<double> g(alpha, 1.0);
    const int n = 100000;
    Vector sum = Vector::Zero(K), sum2 = Vector::Zero(K);
    for (int i = 0; i < n; ++i) {
      Matrix gm(K, K);
      for (Index r = 0; r < K; ++r)
        for (Index c = 0; c < K; ++c) gm(r, c) = g(rng);
      const Vector col = stochastic_from_gammas(gm).A.col(1);
      sum += col;
      sum2 += col.cwiseAbs2();
    }
    const double kd = static_cast<double>(K);
    const double var = (1.0 / kd) * (1.0 - 1.0 / kd) / (kd * alpha + 1.0);
    for (Index i = 0; i < K; ++i) {
      const double mean = sum[i] / n;
      CHECK(std::abs(mean - 1.0 / kd) < 3.0 * std::sqrt(var / n));
      CHECK(rel_err(sum2[i] / n - mean * mean, var) < 0.05);
    }
  }
}

TEST_CASE("schedule indexing") {
  SeasonSchedule s;
  s.n_seasons = 3;
  s.n_cycles = 2;
  CHECK(s.steps_for_block(0) == 0);
  CHECK(s.steps_for_block(2) == 2);
  CHECK(s.steps_for_block(3) == 3);
  CHECK(s.steps_for_block(5) == 5);
  CHECK(s.n_matrices() == 1);
  s.indexing = OmegaIndexing::CyclePlusSeason;
  CHECK(s.steps_for_block(3) == 1);
  CHECK(s.steps_for_block(5) == 3);
  CHECK(s.max_steps() == 3);
  s.activation = {0, 1, 1};
  CHECK(s.matrix_for_step(1) == 1);
  CHECK(s.matrix_for_step(3) == 0);
  CHECK(s.n_matrices() == 2);
  CHECK_THROWS_AS(s.validate(), DimensionError);

  SeasonSchedule one;
  CHECK(one.n_matrices() == 0);
  CHECK(parse_omega_indexing("cycle_plus_season") == OmegaIndexing::CyclePlusSeason);
  CHECK_THROWS_AS(parse_omega_indexing("bogus"), ConfigError);
}

TEST_CASE("identity transitions keep every block's weights") {
  Rng rng = make_rng(73, 0);
  SeasonSchedule s = random_schedule(2, 2, 3, 2, rng);
  const Vector w = random_simplex(3, rng);
  for (const auto &v : omega_path({Matrix::Identity(3, 3)}, s, w)) CHECK((v - w).norm() == 0.0);
}

TEST_CASE("one block reduces to the static posterior") {
  Rng rng = make_rng(74, 0);
  const Setup su = setup(3, 2);
  for (Index K : {1, 2, 4}) {
    const SeasonSchedule s = random_schedule(3, 2, 1, 1, rng);
    const SDPosterior sd(s, su.hyper, su.targets, K);
    const StaticPosterior st(s.blocks[0], su.hyper, su.targets, K);
    REQUIRE(sd.dim() == st.dim());
    const auto sn = sd.layout().names(), tn = st.layout().names();
    for (std::size_t i = 0; i < sn.size(); ++i) {
      CHECK((sn[i] == tn[i] || sn[i] == "b0_" + tn[i]));
    }
    for (int rep = 0; rep < 5; ++rep) {
      const Vector u = to_unconstrained(random_params(3, 2, K, rng, 0.3));
      Vector g1, g2;
      const double a = sd.log_density_grad(u, g1);
      const double b = st.log_density_grad(u, g2);
      CHECK(std::abs(a - b) < 1e-12 * std::abs(b));
      CHECK((g1 - g2).norm() < 1e-12 * std::max(1.0, g2.norm()));
    }
  }
}

TEST_CASE("seasonal posterior equals the sum of independently assembled blocks") {
  Rng rng = make_rng(75, 0);
  const Setup su = setup(2, 3);
  struct Case {
    Index S, C;
    std::vector<Index> activation;
    OmegaIndexing indexing;
  };
  const std::vector<Case> cases{{2, 1, {}, OmegaIndexing::Sequential},
                                {3, 2, {}, OmegaIndexing::Sequential},
                                {3, 2, {0, 1, 1}, OmegaIndexing::Sequential},
                                {3, 2, {}, OmegaIndexing::CyclePlusSeason}};
  for (const auto &c : cases) {
    SeasonSchedule s = random_schedule(2, 3, c.S, c.C, rng, c.activation);
    s.indexing = c.indexing;
    for (double alpha : {1.0, 0.7}) {
      const SDPosterior post(s, su.hyper, su.targets, 3, alpha);
      const SDParams p = random_sd_params(2, 3, 3, s.n_blocks(), s.n_matrices(), rng);
      const Vector u = sd_to_unconstrained(p, post.layout());
      const double expect = blockwise_oracle(p, s, su, alpha);
      CHECK(rel_err(post.log_density(u), expect) < 1e-11);
    }
  }
}

TEST_CASE("seasonal posterior gradient matches central differences") {
  Rng rng = make_rng(76, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d1 = 2 + rep % 2, d2 = 2 + (rep / 2) % 2, K = 2 + rep % 3;
    const Setup su = setup(d1, d2);
    std::vector<Index> act;
    if (rep % 3 == 2) act = {1, 0};
    SeasonSchedule s = random_schedule(d1, d2, 2, 1 + rep % 2, rng, act);
    if (rep % 4 == 3) s.indexing = OmegaIndexing::CyclePlusSeason;
    const SDPosterior post(s, su.hyper, su.targets, K);
    const SDParams p = random_sd_params(d1, d2, K, s.n_blocks(), s.n_matrices(), rng);
    const Vector u = sd_to_unconstrained(p, post.layout());
    Vector grad;
    const double value = post.log_density_grad(u, grad);
    CHECK(std::isfinite(value));
    const Vector fd = finite_gradient([&](const Vector &x) { return post.log_density(x); }, u);
    CHECK(gradient_mismatch(grad, fd) < 1e-5);
  }
}

TEST_CASE("seasonal standardized lowers: gradient and change of variables") {
  Rng rng = make_rng(78, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d1 = 2 + rep % 2, d2 = 2 + (rep / 2) % 2, K = 2 + rep % 3;
    const Setup su = setup(d1, d2);
    SeasonSchedule s = random_schedule(d1, d2, 2, 1 + rep % 2, rng);
    if (rep % 4 == 3) s.indexing = OmegaIndexing::CyclePlusSeason;
    const double alpha = rep % 2 == 0 ? 1.0 : 0.3;
    const SDPosterior std_post(s, su.hyper, su.targets, K, alpha, LowerParam::Standardized);
    const SDPosterior cen_post(s, su.hyper, su.targets, K, alpha);
    const SDParams raw = random_sd_params(d1, d2, K, s.n_blocks(), s.n_matrices(), rng);
    const Vector u = sd_to_unconstrained(raw, std_post.layout());
    Vector grad;
    const double value = std_post.log_density_grad(u, grad);
    CHECK(std::isfinite(value));
    const Vector fd = finite_gradient([&](const Vector &x) { return std_post.log_density(x); }, u);
    CHECK(gradient_mismatch(grad, fd) < 1e-5);

    std::vector<Vector> path;
    const SDParams p = std_post.params(u, &path);
    const double m = static_cast<double>(d1 * (d1 - 1) / 2 + d2 * (d2 - 1) / 2);
    double log_scale = 0.0;
    for (Index b = 0; b < s.n_blocks(); ++b) {
      const SCKPDParams bp = p.block_params(b, path, s);
      for (Index k = 0; k < K; ++k) {
        const double sc = std::sqrt(bp.omega[k] * su.hyper.beta);
        CHECK((p.lowers1[b][k] - sc * raw.lowers1[b][k]).norm() < 1e-12 * (1.0 + p.lowers1[b][k].norm()));
        log_scale += m * std::log(sc);
      }
    }
    const double expect = cen_post.log_density(sd_to_unconstrained(p, cen_post.layout())) + log_scale;
    CHECK(rel_err(value, expect) < 1e-10);
  }
}

TEST_CASE("extreme generating values keep transitions stochastic") {
  Rng rng = make_rng(79, 0);
  const Setup su = setup(2, 2);
  const SeasonSchedule s = random_schedule(2, 2, 3, 2, rng);
  const SDPosterior post(s, su.hyper, su.targets, 3, 0.05, LowerParam::Standardized);
  SDParams p = random_sd_params(2, 2, 3, s.n_blocks(), 1, rng);
  Vector u = sd_to_unconstrained(p, post.layout());
  const Index g0 = post.layout().log_gamma(0);
  const double extremes[9] = {-800.0, 750.0, 0.0, 720.0, -760.0, -5.0, 30.0, -700.0, 710.0};
  for (int i = 0; i < 9; ++i) u[g0 + i] = extremes[i];
  std::vector<Vector> path;
  const SDParams q = post.params(u, &path);
  for (const auto &w : path) {
    CHECK(w.allFinite());
    CHECK(w.minCoeff() >= 0.0);
    CHECK(std::abs(w.sum() - 1.0) < 1e-12);
  }
  Vector grad;
  CHECK_FALSE(std::isfinite(post.log_density_grad(u, grad)));
  const double moderate[9] = {-600.0, 30.0, 0.0, 25.0, -650.0, -5.0, 30.0, -700.0, 20.0};
  for (int i = 0; i < 9; ++i) u[g0 + i] = moderate[i];
  const double value = post.log_density_grad(u, grad);
  CHECK(std::isfinite(value));
  CHECK(grad.allFinite());
  Vector bad = u;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(std::isfinite(post.log_density(bad)));
  (void)q;
}

TEST_CASE("seasonal unconstrained round trip and names") {
  Rng rng = make_rng(77, 0);
  const SDLayout layout(3, 2, 3, 4, 2);
  const SDParams p = random_sd_params(3, 2, 3, 4, 2, rng);
  const SDParams q = sd_from_unconstrained(sd_to_unconstrained(p, layout), layout);
  for (Index b = 0; b < 4; ++b)
    for (Index k = 0; k < 3; ++k) CHECK((q.lowers1[b][k] - p.lowers1[b][k]).norm() < 1e-14);
  for (Index m = 0; m < 2; ++m) CHECK(rel_fro(q.gammas[m], p.gammas[m]) < 1e-14);
  CHECK((q.omega1 - p.omega1).norm() < 1e-12);
  const auto names = layout.names();
  CHECK(names.size() == static_cast<std::size_t>(layout.size()));
  CHECK(names[0] == "b0_L1_0_1_0");
  CHECK(names.back() == "logG1_2_2");
}

TEST_CASE("seasonal prior: log det and trace of each block's precision") {
  // For fixed propagated weights w_t, Theta_t = L_t L_t^T has
  // E log|Theta_t| = 2 gamma_D and
  // E tr Theta_t = F_D + sqrt(F_D)(M1 + m2) beta + M1 m2 beta^2 sum w_t^2.
  Rng rng = make_rng(78, 0);
  const Index d1 = 3, d2 = 3, K = 3;
  const PriorTargets t = PriorTargets::from_factor_stats(0.6, 25.0, 30.0, d1, d2);
  const SolvedHyper h = solve_hyper(t);
  REQUIRE(h.interior);
  const Matrix a = stochastic_from_gammas(random_gammas(K, rng)).A;
  const Vector w1 = random_simplex(K, rng);
  std::gamma_distribution<double> g1(h.a1, 1.0 / h.rate1), g2(h.a2, 1.0 / h.rate2);
  for (Index step : {0, 1, 4}) {
    const Vector w = propagate_omega(a, w1, step);
    const int n = 100000;
    double s_ld = 0, s_ld2 = 0, s_tr = 0, s_tr2 = 0;
    for (int i = 0; i < n; ++i) {
      SCKPDParams p;
      p.D1.resize(d1);
      p.D2.resize(d2);
      for (Index j = 0; j < d1; ++j) p.D1[j] = g1(rng);
      for (Index j = 0; j < d2; ++j) p.D2[j] = g2(rng);
      for (Index k = 0; k < K; ++k) {
        p.lowers1.push_back(random_strict_lower(d1, rng, std::sqrt(w[k] * h.beta)));
        p.lowers2.push_back(random_strict_lower(d2, rng, std::sqrt(w[k] * h.beta)));
      }
      const Matrix l = dense_ldagger(p);
      const double ld = 2.0 * l.diagonal().array().log().sum();
      const double tr = (l * l.transpose()).trace();
      s_ld += ld;
      s_ld2 += ld * ld;
      s_tr += tr;
      s_tr2 += tr * tr;
    }
    const double m_ld = s_ld / n, se_ld = std::sqrt((s_ld2 / n - m_ld * m_ld) / n);
    const double m_tr = s_tr / n, se_tr = std::sqrt((s_tr2 / n - m_tr * m_tr) / n);
    const double expect_tr = t.F_D + std::sqrt(t.F_D) * (t.M1 + 3.0) * h.beta +
                             t.M1 * 3.0 * h.beta * h.beta * w.squaredNorm();
    CHECK(std::abs(m_ld - 2.0 * t.gamma_D) < 4.0 * se_ld);
    CHECK(std::abs(m_tr - expect_tr) < 4.0 * se_tr);
  }
}
