#include "sckpd/chol_geometry.hpp"

#include <cmath>
#include <string>

namespace sckpd {

namespace {

void require_same_dim(const CholFactor &a, const CholFactor &b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("Cholesky factor dimensions differ: " + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()));
  }
}

}  // namespace

CholFactor::CholFactor(Matrix lower) : l_(std::move(lower)) {
  if (l_.rows() != l_.cols() || l_.rows() == 0) {
    throw DimensionError("Cholesky factor must be a nonempty square matrix");
  }
  for (Index j = 1; j < l_.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      if (l_(i, j) != 0.0) throw DomainError("Cholesky factor has a nonzero upper triangle");
    }
  }
  for (Index i = 0; i < l_.rows(); ++i) {
    if (!(l_(i, i) > 0.0) || !std::isfinite(l_(i, i))) {
      throw DomainError("Cholesky factor diagonal entry " + std::to_string(i) +
                        " is not strictly positive");
    }
  }
}

CholFactor::CholFactor(const Matrix &strict_lower_part, const Vector &diag)
    : CholFactor([&] {
        if (strict_lower_part.rows() != diag.size() || strict_lower_part.cols() != diag.size()) {
          throw DimensionError("strict lower part and diagonal disagree in size");
        }
        Matrix l = sckpd::strict_lower(strict_lower_part);
        l.diagonal() = diag;
        return l;
      }()) {}

CholFactor CholFactor::identity(Index dim) { return CholFactor(Matrix::Identity(dim, dim)); }

void require_symmetric(const Matrix &s, const char *what) {
  if (s.rows() != s.cols()) throw DimensionError(std::string(what) + " is not square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw DomainError(std::string(what) + " is not symmetric");
  }
}

CholFactor cholesky(const Matrix &spd) {
  require_symmetric(spd, "input to cholesky");
  const Index n = spd.rows();
  if (n == 0) throw DimensionError("cholesky of an empty matrix");
  const double floor = kPivotFloor * spd.diagonal().cwiseAbs().maxCoeff();
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = spd(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > floor)) {
      throw NotPositiveDefinite("matrix is not positive definite: leading minor of order " +
                                    std::to_string(j + 1) + " has pivot " +
                                    std::to_string(pivot),
                                j + 1);
    }
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (spd(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return CholFactor(std::move(l));
}

double log_cholesky_distance(const CholFactor &a, const CholFactor &b) {
  require_same_dim(a, b);
  const double lower = (a.strict_lower() - b.strict_lower()).squaredNorm();
  const double diag = (a.log_diag() - b.log_diag()).squaredNorm();
  return std::sqrt(lower + diag);
}

CholFactor geodesic_between(const CholFactor &from, const CholFactor &to, double t) {
  require_same_dim(from, to);
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("geodesic parameter t must lie in [0, 1]");
  const Matrix lower = from.strict_lower() + t * (to.strict_lower() - from.strict_lower());
  const Vector diag = ((1.0 - t) * from.log_diag() + t * to.log_diag()).array().exp();
  return CholFactor(lower, diag);
}

TangentLower geodesic_direction(const CholFactor &from, const CholFactor &to) {
  require_same_dim(from, to);
  return {to.strict_lower() - from.strict_lower(), to.log_diag() - from.log_diag()};
}

CholFactor frechet_mean_log_cholesky(std::span<const CholFactor> factors) {
  if (factors.empty()) throw DomainError("Frechet mean of an empty set");
  const Index d = factors.front().dim();
  Matrix lower = Matrix::Zero(d, d);
  Vector log_diag = Vector::Zero(d);
  for (const auto &f : factors) {
    if (f.dim() != d) throw DimensionError("Frechet mean inputs differ in dimension");
    lower += f.strict_lower();
    log_diag += f.log_diag();
  }
  const double n = static_cast<double>(factors.size());
  return CholFactor(lower / n, (log_diag / n).array().exp().matrix());
}

double frechet_objective(const CholFactor &x, std::span<const CholFactor> factors) {
  double total = 0.0;
  for (const auto &f : factors) {
    const double dist = log_cholesky_distance(x, f);
    total += dist * dist;
  }
  return total;
}

Matrix spd_log(const Matrix &spd) {
  require_symmetric(spd, "argument of matrix log");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
  if (eig.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
  const Vector &lambda = eig.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) {
    throw NotPositiveDefinite("matrix log of a matrix that is not positive definite", 0);
  }
  return eig.eigenvectors() * lambda.array().log().matrix().asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix sym_exp(const Matrix &sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
  return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() *
         eig.eigenvectors().transpose();
}

Matrix frechet_mean_log_euclidean(std::span<const Matrix> spds) {
  if (spds.empty()) throw DomainError("Frechet mean of an empty set");
  const Index d = spds.front().rows();
  Matrix acc = Matrix::Zero(d, d);
  for (const auto &s : spds) {
    if (s.rows() != d || s.cols() != d) {
      throw DimensionError("Frechet mean inputs differ in dimension");
    }
    acc += spd_log(s);
  }
  acc /= static_cast<double>(spds.size());
  // symmetrise against round-off before exponentiating
  return sym_exp(0.5 * (acc + acc.transpose()));
}

double log_det_dagger_general(const std::vector<std::vector<CholFactor>> &factor_sets) {
  if (factor_sets.empty()) throw DomainError("no factor sets");
  const auto &first = factor_sets.front();
  if (first.empty()) throw DomainError("factor set has no modes");
  std::vector<Index> dims;
  for (const auto &f : first) dims.push_back(f.dim());
  double total_dim = 1.0;
  for (Index d : dims) total_dim *= static_cast<double>(d);

  double log_det = 0.0;
  for (const auto &set : factor_sets) {
    if (set.size() != dims.size()) throw DimensionError("factor sets differ in mode count");
    for (std::size_t j = 0; j < set.size(); ++j) {
      if (set[j].dim() != dims[j]) {
        throw DimensionError("mode " + std::to_string(j) + " dimension differs across sets");
      }
      // d_{-j}: product of the other mode dimensions
      const double other = total_dim / static_cast<double>(dims[j]);
      log_det += other * set[j].log_det();
    }
  }
  return log_det;
}

}  // namespace sckpd
