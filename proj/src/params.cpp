#include "sckpd/params.hpp"

#include <cmath>
#include <string>

namespace sckpd {

SCKPDParams SCKPDParams::neutral(Index d1, Index d2, Index K) {
  if (d1 <= 0 || d2 <= 0 || K <= 0) throw DimensionError("dimensions and K must be positive");
  SCKPDParams p;
  p.lowers1.assign(static_cast<std::size_t>(K), Matrix::Zero(d1, d1));
  p.lowers2.assign(static_cast<std::size_t>(K), Matrix::Zero(d2, d2));
  p.D1 = Vector::Ones(d1);
  p.D2 = Vector::Ones(d2);
  p.omega = Vector::Constant(K, 1.0 / static_cast<double>(K));
  p.theta = 0.5;
  return p;
}

void SCKPDParams::validate() const {
  const Index k = K();
  if (k <= 0) throw DimensionError("K must be positive");
  if (static_cast<Index>(lowers2.size()) != k || omega.size() != k) {
    throw DimensionError("lowers1, lowers2 and omega must all have K entries");
  }
  for (Index i = 0; i < k; ++i) {
    const Matrix &a = lowers1[i];
    const Matrix &b = lowers2[i];
    if (a.rows() != d1() || a.cols() != d1() || b.rows() != d2() || b.cols() != d2()) {
      throw DimensionError("component " + std::to_string(i) + " has the wrong factor shape");
    }
    if (a.triangularView<Eigen::Upper>().toDenseMatrix().cwiseAbs().maxCoeff() != 0.0 ||
        b.triangularView<Eigen::Upper>().toDenseMatrix().cwiseAbs().maxCoeff() != 0.0) {
      throw DomainError("component " + std::to_string(i) + " lowers are not strictly lower");
    }
  }
  if (d1() == 0 || d2() == 0) throw DimensionError("empty diagonal");
  if (!(D1.minCoeff() > 0.0) || !(D2.minCoeff() > 0.0)) {
    throw DomainError("diagonals must be strictly positive");
  }
  if (!(omega.minCoeff() >= 0.0) || std::abs(omega.sum() - 1.0) > 1e-12) {
    throw DomainError("omega must lie on the unit simplex");
  }
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
}

}  // namespace sckpd
