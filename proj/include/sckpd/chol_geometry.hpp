#pragma once

// Cholesky factors and the log-Cholesky manifold.
//
// A factor L is split into its strictly lower part and its (positive)
// diagonal. The log-Cholesky metric is Euclidean on the strict lower part
// and Euclidean on log(diag), which makes distance, geodesics and Frechet
// means closed-form.

#include "sckpd/common.hpp"

#include <span>
#include <vector>

namespace sckpd {

class CholFactor {
 public:
  // Builds from a dense lower-triangular matrix; throws DomainError if the
  // upper triangle is nonzero or a diagonal entry is not strictly positive.
  explicit CholFactor(Matrix lower);
  CholFactor(const Matrix &strict_lower_part, const Vector &diag);

  static CholFactor identity(Index dim);

  Index dim() const { return l_.rows(); }
  const Matrix &matrix() const { return l_; }
  Matrix strict_lower() const { return sckpd::strict_lower(l_); }
  Vector diag() const { return l_.diagonal(); }
  Vector log_diag() const { return l_.diagonal().array().log(); }

  // L L^T
  Matrix reconstruct() const { return l_ * l_.transpose(); }
  double log_det() const { return log_diag().sum(); }

 private:
  Matrix l_;
};

// Tangent vector at a factor: unconstrained diagonal direction (in log
// coordinates) plus a strictly lower direction.
struct TangentLower {
  Matrix strict_lower;
  Vector diag;
};

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPivotFloor = 1e-14;

// Throws DomainError unless |S - S^T|_max <= kSymmetryTol * max(1, |S|_max).
void require_symmetric(const Matrix &s, const char *what = "matrix");

// Lower Cholesky factor of an SPD matrix. A pivot <= kPivotFloor * max|diag|
// raises NotPositiveDefinite naming the failing leading minor.
CholFactor cholesky(const Matrix &spd);

double log_cholesky_distance(const CholFactor &a, const CholFactor &b);

// Endpoint form of the log-Cholesky geodesic:
//   floor(L0) + t (floor(L1) - floor(L0)) + D(L1)^t D(L0)^(1-t)
CholFactor geodesic_between(const CholFactor &from, const CholFactor &to, double t);

// Initial velocity of geodesic_between at t = 0, with the diagonal part in
// log coordinates.
TangentLower geodesic_direction(const CholFactor &from, const CholFactor &to);

CholFactor frechet_mean_log_cholesky(std::span<const CholFactor> factors);

// Objective minimised by the log-Cholesky Frechet mean.
double frechet_objective(const CholFactor &x, std::span<const CholFactor> factors);

// exp(mean(log S_i)) with matrix log/exp via symmetric eigendecomposition.
Matrix frechet_mean_log_euclidean(std::span<const Matrix> spds);

Matrix spd_log(const Matrix &spd);
Matrix sym_exp(const Matrix &sym);

// log det of the dagger factor assembled from K sets of per-mode factors,
//   L = sum_i floor(kron_j L_i^(j)) + exp(sum_i log D(kron_j L_i^(j))),
// evaluated as sum_i sum_j d_{-j} log det L_i^(j) without assembling L.
// factor_sets[i][j] is the mode-j factor of set i; all sets share mode dims.
double log_det_dagger_general(const std::vector<std::vector<CholFactor>> &factor_sets);

}  // namespace sckpd
