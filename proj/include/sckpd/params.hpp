#pragma once

#include "sckpd/common.hpp"

#include <vector>

namespace sckpd {

// Parameters of the static model: K pairs of strictly lower factors sharing
// one diagonal pair, simplex weights over the pairs and the Dirichlet
// concentration.
struct SCKPDParams {
  std::vector<Matrix> lowers1;  // K strictly lower d1 x d1
  std::vector<Matrix> lowers2;  // K strictly lower d2 x d2
  Vector D1;
  Vector D2;
  Vector omega;
  double theta = 0.5;

  Index K() const { return static_cast<Index>(lowers1.size()); }
  Index d1() const { return D1.size(); }
  Index d2() const { return D2.size(); }

  // All-zero lowers, unit diagonals, uniform weights.
  static SCKPDParams neutral(Index d1, Index d2, Index K);

  // Throws DimensionError / DomainError when an invariant is violated.
  void validate() const;
};

}  // namespace sckpd
