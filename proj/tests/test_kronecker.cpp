#include "catch_amalgamated.hpp"

#include "sckpd/kronecker.hpp"
#include "sckpd/model.hpp"
#include "support.hpp"

#include <cmath>

using namespace sckpd;
using namespace testing_support;

TEST_CASE("kron: identities, scalar case, index convention") {
  CHECK(kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3)).isApprox(Matrix::Identity(6, 6)));
  Rng rng = make_rng(21, 0);
  const Matrix b = random_matrix(3, 3, rng);
  CHECK((kron(Matrix::Constant(1, 1, 2.0), b) - 2.0 * b).norm() == 0.0);

  const Matrix a2 = random_matrix(2, 2, rng), b2 = random_matrix(2, 2, rng);
  CHECK(kron(a2, b2)(2, 3) == a2(1, 1) * b2(0, 1));
  CHECK((kron(a2, b2) - dense_kron(a2, b2)).norm() == 0.0);
}

TEST_CASE("kron: mixed product, trace and Frobenius identities") {
  Rng rng = make_rng(22, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_matrix(3, 3, rng), b = random_matrix(4, 4, rng);
    const Matrix c = random_matrix(3, 3, rng), d = random_matrix(4, 4, rng);
    CHECK(rel_fro(kron(a, b) * kron(c, d), kron(a * c, b * d)) < 1e-12);
    CHECK(std::abs(kron(a, b).trace() - a.trace() * b.trace()) <
          1e-12 * (1.0 + std::abs(a.trace() * b.trace())));
    CHECK(rel_err(kron(a, b).squaredNorm(), a.squaredNorm() * b.squaredNorm()) < 1e-12);
  }
}

TEST_CASE("Van Loan rearrangement") {
  Rng rng = make_rng(23, 0);
  const Matrix a = random_matrix(3, 3, rng), b = random_matrix(2, 2, rng);
  const Matrix c = random_matrix(3, 3, rng), d = random_matrix(2, 2, rng);
  Eigen::JacobiSVD<Matrix> one(vanloan_rearrange(kron(a, b), 3, 2));
  CHECK(one.singularValues()[1] < 1e-12 * one.singularValues()[0]);
  Eigen::JacobiSVD<Matrix> two(vanloan_rearrange(kron(a, b) + kron(c, d), 3, 2));
  CHECK(two.singularValues()[2] < 1e-12 * two.singularValues()[0]);

  const Matrix s = random_matrix(6, 6, rng);
  CHECK((vanloan_inverse(vanloan_rearrange(s, 3, 2), 3, 2) - s).norm() == 0.0);
  CHECK_THROWS_AS(vanloan_rearrange(s, 2, 2), DimensionError);
}

TEST_CASE("PVL of an exact Kronecker product") {
  Rng rng = make_rng(24, 0);
  const Matrix a = random_matrix(3, 3, rng), b = random_matrix(4, 4, rng);
  const Matrix s = kron(a, b);
  const PVLDecomp pvl = pvl_decompose(s, 3, 4, 1);
  REQUIRE(pvl.terms.size() == 1);
  CHECK(pvl.residual_fro < 1e-12 * s.norm());
  CHECK(rel_fro(kron(pvl.terms[0].A, pvl.terms[0].B), s) < 1e-12);
}

TEST_CASE("PVL of random symmetric matrices reconstructs exactly") {
  Rng rng = make_rng(25, 0);
  const Matrix s = random_symmetric(6, rng);
  const PVLDecomp pvl = pvl_decompose(s, 3, 2, 4);
  CHECK(pvl.residual_fro < 1e-10 * s.norm());
  CHECK((pvl.reconstruct() - s).norm() < 1e-10 * s.norm());

  for (int rep = 0; rep < 30; ++rep) {
    const Index d1 = 2 + rep % 4, d2 = 2 + (rep / 4) % 4;
    const Matrix m = random_symmetric(d1 * d2, rng);
    const PVLDecomp full = pvl_decompose_full(m, d1, d2);
    CHECK((full.reconstruct() - m).norm() < 1e-10 * m.norm());
    for (const auto &t : full.terms) {
      // each pair is jointly symmetric or jointly skew, so A kron B is symmetric
      const double sym_a = (t.A - t.A.transpose()).norm();
      const double skew_a = (t.A + t.A.transpose()).norm();
      const double sym_b = (t.B - t.B.transpose()).norm();
      const double skew_b = (t.B + t.B.transpose()).norm();
      const bool both_sym = sym_a < 1e-10 * t.A.norm() && sym_b < 1e-10 * t.B.norm();
      const bool both_skew = skew_a < 1e-10 * t.A.norm() && skew_b < 1e-10 * t.B.norm();
      CHECK((both_sym || both_skew));
      const Matrix k = kron(t.A, t.B);
      CHECK((k - k.transpose()).norm() < 1e-10 * std::max(1.0, k.norm()));
    }
  }
}

TEST_CASE("PVL residual matches the tail energy and is monotone in the term count") {
  Rng rng = make_rng(26, 0);
  for (bool symmetric : {true, false}) {
    const Matrix s = symmetric ? random_symmetric(12, rng) : random_matrix(12, 12, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (Index n = 0; n <= 9; ++n) {
      const PVLDecomp pvl = pvl_decompose(s, 3, 4, n);
      const double actual = (s - pvl.reconstruct()).norm();
      CHECK(std::abs(actual - pvl.residual_fro) < 1e-10 * s.norm());
      CHECK(pvl.residual_fro <= prev + 1e-12);
      prev = pvl.residual_fro;
    }
    CHECK_THROWS_AS(pvl_decompose(s, 3, 4, 10), DomainError);
  }
}

TEST_CASE("PVL is deterministic and sign-normalised") {
  Rng rng = make_rng(27, 0);
  const Matrix s = random_symmetric(12, rng);
  const PVLDecomp a = pvl_decompose_full(s, 4, 3);
  const PVLDecomp b = pvl_decompose_full(s, 4, 3);
  for (std::size_t q = 0; q < a.terms.size(); ++q) {
    CHECK((a.terms[q].A - b.terms[q].A).norm() == 0.0);
    const Matrix &m = a.terms[q].A;
    for (Index k = 0; k < m.size(); ++k) {
      const double x = m(k / m.cols(), k % m.cols());
      if (std::abs(x) > 1e-12 * m.cwiseAbs().maxCoeff()) {
        CHECK(x > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("nearest Kronecker term of a block strictly lower matrix is strictly lower") {
  Rng rng = make_rng(28, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const Index d1 = 3 + rep % 3, d2 = 2 + rep % 4;
    Matrix psi = Matrix::Zero(d1 * d2, d1 * d2);
    for (Index r = 0; r < d1; ++r)
      for (Index s = 0; s < r; ++s)
        for (Index v = 0; v < d2; ++v)
          for (Index w = 0; w < v; ++w) psi(d2 * r + v, d2 * s + w) = normal(rng);
    const PVLDecomp pvl = pvl_decompose(psi, d1, d2, 1);
    const Matrix &a = pvl.terms[0].A;
    const Matrix &b = pvl.terms[0].B;
    CHECK((a - strict_lower(a)).cwiseAbs().maxCoeff() < 1e-10 * a.norm());
    CHECK((b - strict_lower(b)).cwiseAbs().maxCoeff() < 1e-10 * b.norm());
  }
}

TEST_CASE("mode-1 folding") {
  Rng rng = make_rng(29, 0);
  const Vector v = random_matrix(6, 1, rng);
  CHECK(unfold_mode1(fold_mode1(v, 3, 2)) == v);

  const Vector x = random_matrix(3, 1, rng), y = random_matrix(2, 1, rng);
  Vector outer(6);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 2; ++j) outer[2 * i + j] = x[i] * y[j];
  Eigen::JacobiSVD<Matrix> svd(fold_mode1(outer, 3, 2));
  CHECK(svd.singularValues()[1] < 1e-14 * svd.singularValues()[0]);

  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_matrix(3, 3, rng), b = random_matrix(2, 2, rng);
    const Vector u = random_matrix(6, 1, rng);
    const Vector dense = dense_kron(a, b) * u;
    const Vector folded = unfold_mode1(b * fold_mode1(u, 3, 2) * a.transpose());
    CHECK((dense - folded).norm() < 1e-12 * dense.norm());
  }
  CHECK_THROWS_AS(fold_mode1(v, 2, 2), DimensionError);
}

TEST_CASE("Tucker mode products") {
  Rng rng = make_rng(30, 0);
  Tensor t({3, 4, 2}, random_matrix(24, 1, rng));
  for (Index m = 0; m < 3; ++m) {
    const Tensor same = tucker_mode_product(t, Matrix::Identity(t.dims()[m], t.dims()[m]), m);
    CHECK(same.data() == t.data());
  }

  const Matrix tm = random_matrix(3, 4, rng);
  const Matrix b1 = random_matrix(3, 5, rng), b2 = random_matrix(4, 2, rng);
  const Tensor t2({3, 4}, Eigen::Map<const Vector>(tm.data(), tm.size()));
  const Tensor prod = tucker_mode_product(tucker_mode_product(t2, b1, 0), b2, 1);
  const Matrix sandwich = b1.transpose() * tm * b2;
  REQUIRE(prod.dims() == std::vector<Index>{5, 2});
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 2; ++j) CHECK(std::abs(prod({i, j}) - sandwich(i, j)) < 1e-12);

  // vec of T x1 L1 x2 L2 equals (L2^T kron L1^T) vec T with first-index-fastest vec
  const Matrix l1 = random_lower_factor(3, rng), l2 = random_lower_factor(4, rng);
  const Tensor lt = tucker_mode_product(tucker_mode_product(t2, l1, 0), l2, 1);
  const Vector expect = dense_kron(l2.transpose(), l1.transpose()) * t2.data();
  CHECK((lt.data() - expect).norm() < 1e-12 * expect.norm());

  // products along different modes commute
  const Matrix c0 = random_matrix(3, 3, rng), c2 = random_matrix(2, 3, rng);
  const Tensor ab = tucker_mode_product(tucker_mode_product(t, c0, 0), c2, 2);
  const Tensor ba = tucker_mode_product(tucker_mode_product(t, c2, 2), c0, 0);
  CHECK((ab.data() - ba.data()).norm() < 1e-12 * ab.data().norm());

  CHECK_THROWS_AS(tucker_mode_product(t, random_matrix(5, 2, rng), 0), DimensionError);
}

TEST_CASE("structured matvec matches the dense dagger factor") {
  Rng rng = make_rng(31, 0);
  SCKPDParams diag_only = random_params(3, 4, 2, rng);
  for (auto &m : diag_only.lowers1) m.setZero();
  for (auto &m : diag_only.lowers2) m.setZero();
  const Vector x = random_matrix(12, 1, rng);
  const Vector scale = kron(Matrix(diag_only.D1), Matrix(diag_only.D2));
  CHECK((sckpd_matvec(diag_only, x) - scale.cwiseProduct(x)).norm() < 1e-14 * x.norm());

  for (int rep = 0; rep < 50; ++rep) {
    const Index d1 = 1 + rep % 5, d2 = 1 + (rep / 5) % 5, K = 1 + rep % 4;
    const SCKPDParams p = random_params(d1, d2, K, rng);
    const Vector u = random_matrix(d1 * d2, 1, rng), w = random_matrix(d1 * d2, 1, rng);
    const Vector dense = dense_ldagger(p) * u;
    CHECK((sckpd_matvec(p, u) - dense).norm() <= 1e-10 * dense.norm());
    const Vector lin = sckpd_matvec(p, 2.0 * u - 3.0 * w);
    CHECK((lin - (2.0 * sckpd_matvec(p, u) - 3.0 * sckpd_matvec(p, w))).norm() <
          1e-12 * lin.norm() + 1e-14);
  }
  CHECK_THROWS_AS(sckpd_matvec(diag_only, Vector::Zero(5)), DimensionError);
}

namespace {

struct GreedyFit {
  Matrix ldagger;
  double unrepresentable = 0.0;  // entries with r > s and v < w
  double diag_block_misfit = 0.0;
  double off_block_diag_misfit = 0.0;
  double diag_misfit = 0.0;
};

// Fits the dagger structure to an arbitrary factor: rank-one fit of the
// diagonal, exact Kronecker expansion of the block strictly lower pattern,
// and two components that absorb the single-mode cross terms.
GreedyFit greedy_fit(const Matrix &l, Index d1, Index d2) {
  Matrix dgrid(d1, d2);
  for (Index r = 0; r < d1; ++r)
    for (Index v = 0; v < d2; ++v) dgrid(r, v) = l(d2 * r + v, d2 * r + v);
  Eigen::JacobiSVD<Matrix> svd(dgrid, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector D1 = std::sqrt(svd.singularValues()[0]) * svd.matrixU().col(0);
  Vector D2 = std::sqrt(svd.singularValues()[0]) * svd.matrixV().col(0);
  if (D1[0] < 0) {
    D1 = -D1;
    D2 = -D2;
  }

  Matrix psi = Matrix::Zero(d1 * d2, d1 * d2);
  GreedyFit fit;
  for (Index r = 0; r < d1; ++r)
    for (Index s = 0; s < r; ++s)
      for (Index v = 0; v < d2; ++v)
        for (Index w = 0; w < d2; ++w) {
          const double x = l(d2 * r + v, d2 * s + w);
          if (v > w) psi(d2 * r + v, d2 * s + w) = x;
          if (v < w) fit.unrepresentable += x * x;
        }

  SCKPDParams p;
  p.D1 = D1;
  p.D2 = D2;
  Matrix sum_a = Matrix::Zero(d1, d1), sum_b = Matrix::Zero(d2, d2);
  for (const auto &t : pvl_decompose_full(psi, d1, d2).terms) {
    p.lowers1.push_back(strict_lower(t.A));
    p.lowers2.push_back(strict_lower(t.B));
    sum_a += p.lowers1.back();
    sum_b += p.lowers2.back();
  }
  Matrix x = Matrix::Zero(d1, d1), y = Matrix::Zero(d2, d2);
  for (Index r = 0; r < d1; ++r)
    for (Index s = 0; s < r; ++s) {
      double acc = 0.0;
      for (Index v = 0; v < d2; ++v) acc += l(d2 * r + v, d2 * s + v) * D2[v];
      x(r, s) = acc / D2.squaredNorm();
    }
  for (Index v = 0; v < d2; ++v)
    for (Index w = 0; w < v; ++w) {
      double acc = 0.0;
      for (Index r = 0; r < d1; ++r) acc += l(d2 * r + v, d2 * r + w) * D1[r];
      y(v, w) = acc / D1.squaredNorm();
    }
  p.lowers1.push_back(x - sum_a);
  p.lowers2.push_back(Matrix::Zero(d2, d2));
  p.lowers1.push_back(Matrix::Zero(d1, d1));
  p.lowers2.push_back(y - sum_b);
  p.omega = Vector::Constant(p.K(), 1.0 / static_cast<double>(p.K()));
  fit.ldagger = assemble_ldagger(p).matrix();

  for (Index r = 0; r < d1; ++r)
    for (Index v = 0; v < d2; ++v) {
      const double e = l(d2 * r + v, d2 * r + v) - D1[r] * D2[v];
      fit.diag_misfit += e * e;
      for (Index w = 0; w < v; ++w) {
        const double f = l(d2 * r + v, d2 * r + w) - D1[r] * y(v, w);
        fit.diag_block_misfit += f * f;
      }
      for (Index s = 0; s < r; ++s) {
        const double g = l(d2 * r + v, d2 * s + v) - x(r, s) * D2[v];
        fit.off_block_diag_misfit += g * g;
      }
    }
  return fit;
}

}  // namespace

TEST_CASE("greedy dagger fit: error splits into the structurally unreachable parts") {
  Rng rng = make_rng(32, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index d1 = 2 + rep % 3, d2 = 2 + (rep / 3) % 3;
    const Matrix l = random_lower_factor(d1 * d2, rng);
    const GreedyFit fit = greedy_fit(l, d1, d2);
    const double err = (fit.ldagger - l).norm();
    const double parts = fit.unrepresentable + fit.diag_block_misfit +
                         fit.off_block_diag_misfit + fit.diag_misfit;
    CHECK(std::abs(err * err - parts) < 1e-9 * std::max(1.0, parts));
    CHECK(err <= std::sqrt(fit.unrepresentable) + std::sqrt(fit.diag_block_misfit) +
                     std::sqrt(fit.off_block_diag_misfit) + std::sqrt(fit.diag_misfit) + 1e-12);
    // the block strictly lower pattern is reproduced exactly
    for (Index r = 0; r < d1; ++r)
      for (Index s = 0; s < r; ++s)
        for (Index v = 0; v < d2; ++v)
          for (Index w = 0; w < v; ++w)
            CHECK(std::abs(fit.ldagger(d2 * r + v, d2 * s + w) - l(d2 * r + v, d2 * s + w)) <
                  1e-10 * l.norm());
  }
}

TEST_CASE("entries above the block diagonals bound every dagger fit from below") {
  // Unit diagonal, nothing in the block strictly lower pattern, large entries
  // with r > s and v < w: no dagger factor can come within sqrt(sum of the
  // pattern) + second largest diagonal entry = 1 of it.
  const Index d1 = 3, d2 = 3;
  Matrix l = Matrix::Identity(9, 9);
  for (Index r = 0; r < d1; ++r)
    for (Index s = 0; s < r; ++s)
      for (Index v = 0; v < d2; ++v)
        for (Index w = v + 1; w < d2; ++w) l(d2 * r + v, d2 * s + w) = 10.0;
  const GreedyFit fit = greedy_fit(l, d1, d2);
  const double floor_any_fit = std::sqrt(fit.unrepresentable);
  CHECK(floor_any_fit > 0.0 + 1.0);
  CHECK((fit.ldagger - l).norm() >= floor_any_fit - 1e-12);
}
