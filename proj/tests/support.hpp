#pragma once

// Random inputs and dense reference computations shared by the test
// binaries. Everything here is written with plain loops so it does not
// share code paths with the library.

#include "sckpd/common.hpp"
#include "sckpd/params.hpp"
#include "sckpd/rng.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using sckpd::Index;
using sckpd::Matrix;
using sckpd::Vector;

inline double normal(sckpd::Rng &rng) {
  std::normal_distribution<double> n;
  return n(rng);
}

inline double uniform(sckpd::Rng &rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

inline Matrix random_matrix(Index r, Index c, sckpd::Rng &rng) {
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = normal(rng);
  return m;
}

inline Matrix random_strict_lower(Index d, sckpd::Rng &rng, double scale = 1.0) {
  Matrix m = Matrix::Zero(d, d);
  for (Index i = 1; i < d; ++i)
    for (Index j = 0; j < i; ++j) m(i, j) = scale * normal(rng);
  return m;
}

inline Matrix random_lower_factor(Index d, sckpd::Rng &rng) {
  Matrix m = random_strict_lower(d, rng);
  for (Index i = 0; i < d; ++i) m(i, i) = std::exp(0.5 * normal(rng));
  return m;
}

inline Matrix random_spd(Index d, sckpd::Rng &rng) {
  const Matrix a = random_matrix(d, d, rng);
  return a * a.transpose() + static_cast<double>(d) * Matrix::Identity(d, d);
}

inline Matrix random_symmetric(Index d, sckpd::Rng &rng) {
  const Matrix a = random_matrix(d, d, rng);
  return 0.5 * (a + a.transpose());
}

inline Vector random_simplex(Index K, sckpd::Rng &rng) {
  Vector w(K);
  for (Index k = 0; k < K; ++k) w[k] = -std::log(uniform(rng, 1e-3, 1.0));
  return w / w.sum();
}

inline sckpd::SCKPDParams random_params(Index d1, Index d2, Index K, sckpd::Rng &rng,
                                        double lower_scale = 0.5) {
  sckpd::SCKPDParams p;
  for (Index k = 0; k < K; ++k) {
    p.lowers1.push_back(random_strict_lower(d1, rng, lower_scale));
    p.lowers2.push_back(random_strict_lower(d2, rng, lower_scale));
  }
  p.D1.resize(d1);
  p.D2.resize(d2);
  for (Index j = 0; j < d1; ++j) p.D1[j] = std::exp(0.4 * normal(rng));
  for (Index j = 0; j < d2; ++j) p.D2[j] = std::exp(0.4 * normal(rng));
  p.omega = random_simplex(K, rng);
  p.theta = uniform(rng, 0.05, 0.95);
  return p;
}

// (A kron B) by the index definition.
inline Matrix dense_kron(const Matrix &a, const Matrix &b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index r = 0; r < a.rows(); ++r)
    for (Index s = 0; s < a.cols(); ++s)
      for (Index v = 0; v < b.rows(); ++v)
        for (Index w = 0; w < b.cols(); ++w)
          out(b.rows() * r + v, b.cols() * s + w) = a(r, s) * b(v, w);
  return out;
}

// L-dagger entry by entry: strictly lower part of each full Kronecker
// factor (lowers plus shared diagonal) plus the Kronecker diagonal.
inline Matrix dense_ldagger(const sckpd::SCKPDParams &p) {
  const Index d1 = p.D1.size(), d2 = p.D2.size(), d = d1 * d2;
  Matrix l = Matrix::Zero(d, d);
  for (Index k = 0; k < static_cast<Index>(p.lowers1.size()); ++k) {
    Matrix f1 = p.lowers1[k];
    Matrix f2 = p.lowers2[k];
    for (Index i = 0; i < d1; ++i) f1(i, i) = p.D1[i];
    for (Index i = 0; i < d2; ++i) f2(i, i) = p.D2[i];
    for (Index r = 0; r < d1; ++r)
      for (Index s = 0; s < d1; ++s)
        for (Index v = 0; v < d2; ++v)
          for (Index w = 0; w < d2; ++w) {
            const Index row = d2 * r + v, col = d2 * s + w;
            if (row > col) l(row, col) += f1(r, s) * f2(v, w);
          }
  }
  for (Index r = 0; r < d1; ++r)
    for (Index v = 0; v < d2; ++v) l(d2 * r + v, d2 * r + v) = p.D1[r] * p.D2[v];
  return l;
}

// Dirichlet(alpha, ..., alpha) through log Gamma draws, so small alpha
// does not underflow: log G = log Gamma(alpha + 1) + log(U) / alpha.
inline Vector dirichlet_symmetric(Index K, double alpha, sckpd::Rng &rng) {
  std::gamma_distribution<double> g(alpha + 1.0, 1.0);
  Vector lg(K);
  for (Index k = 0; k < K; ++k) lg[k] = std::log(g(rng)) + std::log(uniform(rng, 0.0, 1.0)) / alpha;
  const double mx = lg.maxCoeff();
  Vector w = (lg.array() - mx).exp();
  return w / w.sum();
}

// One draw of the factor parameters from the prior with the given
// Gamma shapes/rates and lower-entry scale beta.
inline sckpd::SCKPDParams draw_prior(Index d1, Index d2, Index K, double a1, double rate1,
                                     double a2, double rate2, double beta, sckpd::Rng &rng) {
  sckpd::SCKPDParams p;
  p.theta = uniform(rng, 0.0, 1.0);
  p.omega = K == 1 ? Vector::Ones(1) : dirichlet_symmetric(K, p.theta, rng);
  std::gamma_distribution<double> g1(a1, 1.0 / rate1), g2(a2, 1.0 / rate2);
  p.D1.resize(d1);
  p.D2.resize(d2);
  for (Index j = 0; j < d1; ++j) p.D1[j] = g1(rng);
  for (Index j = 0; j < d2; ++j) p.D2[j] = g2(rng);
  for (Index k = 0; k < K; ++k) {
    const double sd = std::sqrt(p.omega[k] * beta);
    p.lowers1.push_back(random_strict_lower(d1, rng, sd));
    p.lowers2.push_back(random_strict_lower(d2, rng, sd));
  }
  return p;
}

inline Matrix random_observations(Index n, Index d, sckpd::Rng &rng) {
  return random_matrix(n, d, rng);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b)));
}

inline double rel_fro(const Matrix &a, const Matrix &b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

// Central differences of a scalar function, step h.
template <typename F>
Vector finite_gradient(F &&f, const Vector &x, double h = 1e-5) {
  Vector g(x.size());
  Vector xp = x, xm = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

// Largest componentwise relative error with an absolute floor.
inline double gradient_mismatch(const Vector &analytic, const Vector &numeric,
                                double abs_floor = 1e-7) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    if (diff <= abs_floor) continue;
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

}  // namespace testing_support
