#include "sckpd/kronecker.hpp"

#include "sckpd/chol_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sckpd {

Matrix kron(const Matrix &a, const Matrix &b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index s = 0; s < a.cols(); ++s) {
      out.block(r * b.rows(), s * b.cols(), b.rows(), b.cols()) = a(r, s) * b;
    }
  }
  return out;
}

namespace {

void require_square_dims(const Matrix &s, Index d1, Index d2) {
  if (d1 <= 0 || d2 <= 0) throw DimensionError("mode dimensions must be positive");
  if (s.rows() != d1 * d2 || s.cols() != d1 * d2) {
    throw DimensionError("matrix is " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + ", expected " + std::to_string(d1 * d2) +
                         " square");
  }
}

Matrix reshape_row_major(const Vector &v, Index d) {
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = v[i * d + j];
  }
  return m;
}

// Orthonormal bases of the symmetric and skew-symmetric subspaces of
// row-major vectorised d x d matrices.
Matrix symmetric_basis(Index d) {
  Matrix u = Matrix::Zero(d * d, d * (d + 1) / 2);
  Index col = 0;
  const double h = 1.0 / std::sqrt(2.0);
  for (Index i = 0; i < d; ++i) {
    u(i * d + i, col++) = 1.0;
    for (Index j = i + 1; j < d; ++j) {
      u(i * d + j, col) = h;
      u(j * d + i, col) = h;
      ++col;
    }
  }
  return u;
}

Matrix skew_basis(Index d) {
  Matrix u = Matrix::Zero(d * d, d * (d - 1) / 2);
  Index col = 0;
  const double h = 1.0 / std::sqrt(2.0);
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      u(i * d + j, col) = h;
      u(j * d + i, col) = -h;
      ++col;
    }
  }
  return u;
}

struct Triplet {
  double sigma;
  Vector a;  // row-major vec of the mode-1 factor
  Vector b;
};

void append_svd(const Matrix &r, const Matrix &left_basis, const Matrix &right_basis,
                std::vector<Triplet> &out) {
  if (r.rows() == 0 || r.cols() == 0) return;
  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw ConvergenceError("SVD of the rearrangement failed");
  const Vector &sv = svd.singularValues();
  for (Index q = 0; q < sv.size(); ++q) {
    out.push_back({sv[q], left_basis * svd.matrixU().col(q), right_basis * svd.matrixV().col(q)});
  }
}

bool is_symmetric(const Matrix &s) {
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  return (s - s.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale;
}

}  // namespace

Matrix PVLDecomp::reconstruct() const {
  Matrix out = Matrix::Zero(d1 * d2, d1 * d2);
  for (const auto &t : terms) out += kron(t.A, t.B);
  return out;
}

Matrix vanloan_rearrange(const Matrix &s, Index d1, Index d2) {
  require_square_dims(s, d1, d2);
  Matrix r(d1 * d1, d2 * d2);
  for (Index i = 0; i < d1; ++i) {
    for (Index j = 0; j < d1; ++j) {
      for (Index v = 0; v < d2; ++v) {
        for (Index w = 0; w < d2; ++w) r(i * d1 + j, v * d2 + w) = s(d2 * i + v, d2 * j + w);
      }
    }
  }
  return r;
}

Matrix vanloan_inverse(const Matrix &r, Index d1, Index d2) {
  if (r.rows() != d1 * d1 || r.cols() != d2 * d2) {
    throw DimensionError("rearranged matrix has the wrong shape");
  }
  Matrix s(d1 * d2, d1 * d2);
  for (Index i = 0; i < d1; ++i) {
    for (Index j = 0; j < d1; ++j) {
      for (Index v = 0; v < d2; ++v) {
        for (Index w = 0; w < d2; ++w) s(d2 * i + v, d2 * j + w) = r(i * d1 + j, v * d2 + w);
      }
    }
  }
  return s;
}

PVLDecomp pvl_decompose(const Matrix &s, Index d1, Index d2, Index n_terms) {
  require_square_dims(s, d1, d2);
  const Index max_terms = std::min(d1, d2) * std::min(d1, d2);
  if (n_terms < 0 || n_terms > max_terms) {
    throw DomainError("n_terms = " + std::to_string(n_terms) + " exceeds the maximum " +
                      std::to_string(max_terms) + " for these dimensions");
  }
  const Matrix r = vanloan_rearrange(s, d1, d2);

  std::vector<Triplet> triplets;
  if (is_symmetric(s)) {
    const Matrix u1 = symmetric_basis(d1), u2 = symmetric_basis(d2);
    const Matrix v1 = skew_basis(d1), v2 = skew_basis(d2);
    append_svd(u1.transpose() * r * u2, u1, u2, triplets);
    append_svd(v1.transpose() * r * v2, v1, v2, triplets);
    std::stable_sort(triplets.begin(), triplets.end(),
                     [](const Triplet &x, const Triplet &y) { return x.sigma > y.sigma; });
  } else {
    const Matrix i1 = Matrix::Identity(d1 * d1, d1 * d1);
    const Matrix i2 = Matrix::Identity(d2 * d2, d2 * d2);
    append_svd(r, i1, i2, triplets);
  }

  PVLDecomp out;
  out.d1 = d1;
  out.d2 = d2;
  out.singular_values.resize(static_cast<Index>(triplets.size()));
  double tail = 0.0;
  for (std::size_t q = 0; q < triplets.size(); ++q) {
    const double sigma = triplets[q].sigma;
    out.singular_values[static_cast<Index>(q)] = sigma;
    if (static_cast<Index>(q) >= n_terms) {
      tail += sigma * sigma;
      continue;
    }
    Vector a = triplets[q].a;
    Vector b = triplets[q].b;
    const double amax = a.cwiseAbs().maxCoeff();
    for (Index k = 0; k < a.size(); ++k) {
      if (std::abs(a[k]) > 1e-12 * amax) {
        if (a[k] < 0.0) {
          a = -a;
          b = -b;
        }
        break;
      }
    }
    const double root = std::sqrt(sigma);
    out.terms.push_back({reshape_row_major(root * a, d1), reshape_row_major(root * b, d2)});
  }
  out.residual_fro = std::sqrt(tail);
  return out;
}

PVLDecomp pvl_decompose_full(const Matrix &s, Index d1, Index d2) {
  return pvl_decompose(s, d1, d2, std::min(d1, d2) * std::min(d1, d2));
}

double nearest_kron_relative_residual(const Matrix &s, Index d1, Index d2) {
  const double norm = s.norm();
  if (norm == 0.0) return 0.0;
  return pvl_decompose(s, d1, d2, 1).residual_fro / norm;
}

Matrix fold_mode1(const Vector &v, Index d1, Index d2) {
  if (v.size() != d1 * d2) {
    throw DimensionError("vector of length " + std::to_string(v.size()) +
                         " cannot be folded to " + std::to_string(d2) + "x" +
                         std::to_string(d1));
  }
  return Eigen::Map<const Matrix>(v.data(), d2, d1);
}

Vector unfold_mode1(const Matrix &x) {
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Tensor::Tensor(std::vector<Index> dims) : dims_(std::move(dims)) {
  Index n = 1;
  for (Index d : dims_) {
    if (d <= 0) throw DimensionError("tensor extents must be positive");
    n *= d;
  }
  data_ = Vector::Zero(n);
}

Tensor::Tensor(std::vector<Index> dims, Vector data) : Tensor(std::move(dims)) {
  if (data.size() != data_.size()) throw DimensionError("tensor data length mismatch");
  data_ = std::move(data);
}

Index Tensor::offset(const std::vector<Index> &idx) const {
  if (idx.size() != dims_.size()) throw DimensionError("tensor index has the wrong order");
  Index off = 0, stride = 1;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    if (idx[m] < 0 || idx[m] >= dims_[m]) throw DimensionError("tensor index out of range");
    off += idx[m] * stride;
    stride *= dims_[m];
  }
  return off;
}

Tensor tucker_mode_product(const Tensor &t, const Matrix &b, Index mode) {
  if (mode < 0 || mode >= t.order()) throw DimensionError("mode out of range");
  const auto &dims = t.dims();
  if (b.rows() != dims[mode]) {
    throw DimensionError("matrix has " + std::to_string(b.rows()) + " rows but mode " +
                         std::to_string(mode) + " has extent " + std::to_string(dims[mode]));
  }
  Index inner = 1, outer = 1;
  for (Index m = 0; m < mode; ++m) inner *= dims[m];
  for (Index m = mode + 1; m < t.order(); ++m) outer *= dims[m];

  std::vector<Index> out_dims = dims;
  out_dims[mode] = b.cols();
  Tensor out(out_dims);
  const Index n_in = dims[mode], n_out = b.cols();
  for (Index o = 0; o < outer; ++o) {
    // slab viewed as inner x n_in, contracted on the right with B
    Eigen::Map<const Matrix> slab(t.data().data() + o * inner * n_in, inner, n_in);
    Eigen::Map<Matrix> dst(out.data().data() + o * inner * n_out, inner, n_out);
    dst.noalias() = slab * b;
  }
  return out;
}

Vector sckpd_matvec(const SCKPDParams &p, const Vector &x) {
  const Index d1 = p.d1(), d2 = p.d2();
  const Matrix xf = fold_mode1(x, d1, d2);
  const auto dg1 = p.D1.asDiagonal();
  const auto dg2 = p.D2.asDiagonal();
  Matrix y = dg2 * xf * dg1;
  for (Index k = 0; k < p.K(); ++k) {
    const Matrix &l1 = p.lowers1[k];
    const Matrix &l2 = p.lowers2[k];
    const Matrix xl1t = xf * l1.transpose();
    y.noalias() += l2 * xf * dg1;
    y.noalias() += dg2 * xl1t;
    y.noalias() += l2 * xl1t;
  }
  return unfold_mode1(y);
}

}  // namespace sckpd
