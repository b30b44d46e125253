#pragma once

#include "sckpd/common.hpp"
#include "sckpd/params.hpp"

#include <vector>

namespace sckpd {

// Index convention throughout: (A kron B)[d2*r + v, d2*s + w] = A[r,s] * B[v,w]
// (0-based), and an observation matrix Y (d1 x d2) is vectorised as
// y[d2*i + j] = Y[i,j].
Matrix kron(const Matrix &a, const Matrix &b);

struct KronPair {
  Matrix A;
  Matrix B;
};

struct PVLDecomp {
  std::vector<KronPair> terms;
  Index d1 = 0;
  Index d2 = 0;
  double residual_fro = 0.0;
  Vector singular_values;  // all of them, descending, not just the kept ones

  Matrix reconstruct() const;
};

// R[i*d1 + j, v*d2 + w] = S[d2*i + v, d2*j + w], so S = sum_q A_q kron B_q
// maps to R = sum_q vec_r(A_q) vec_r(B_q)^T with vec_r the row-major vec.
Matrix vanloan_rearrange(const Matrix &s, Index d1, Index d2);
Matrix vanloan_inverse(const Matrix &r, Index d1, Index d2);

// Leading n_terms Kronecker terms of S from the SVD of its rearrangement.
// Each term carries sqrt(sigma) on both sides and the first nonzero entry of
// A is made positive. For symmetric S the SVD is taken separately on the
// symmetric and skew-symmetric parts of the rearrangement, so every term is
// either a symmetric pair or a skew pair; the two spectra are merged in
// descending order.
PVLDecomp pvl_decompose(const Matrix &s, Index d1, Index d2, Index n_terms);
PVLDecomp pvl_decompose_full(const Matrix &s, Index d1, Index d2);

// ||S - nearest A kron B||_F / ||S||_F
double nearest_kron_relative_residual(const Matrix &s, Index d1, Index d2);

// v (length d1*d2) -> d2 x d1 matrix X with X[w, s] = v[d2*s + w]; then
// (A kron B) v = unfold_mode1(B * X * A^T).
Matrix fold_mode1(const Vector &v, Index d1, Index d2);
Vector unfold_mode1(const Matrix &x);

// Dense D-way array stored with the first index varying fastest.
class Tensor {
 public:
  explicit Tensor(std::vector<Index> dims);
  Tensor(std::vector<Index> dims, Vector data);

  const std::vector<Index> &dims() const { return dims_; }
  Index order() const { return static_cast<Index>(dims_.size()); }
  const Vector &data() const { return data_; }
  Vector &data() { return data_; }

  double &operator()(const std::vector<Index> &idx) { return data_[offset(idx)]; }
  double operator()(const std::vector<Index> &idx) const { return data_[offset(idx)]; }

 private:
  Index offset(const std::vector<Index> &idx) const;

  std::vector<Index> dims_;
  Vector data_;
};

// (T x_mode B)[.., q, ..] = sum_k T[.., k, ..] B[k, q]; mode is 0-based.
Tensor tucker_mode_product(const Tensor &t, const Matrix &b, Index mode);

// L-dagger times x through mode foldings, with X = fold_mode1(x):
//   unfold(D2 X D1 + sum_k [floor(L2k) X D1 + D2 X floor(L1k)^T
//                           + floor(L2k) X floor(L1k)^T])
Vector sckpd_matvec(const SCKPDParams &p, const Vector &x);

}  // namespace sckpd
