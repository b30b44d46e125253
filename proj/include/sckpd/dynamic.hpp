#pragma once

// Seasonally dynamic model: component weights move between observation
// blocks through column-stochastic matrices while the diagonals, beta and
// the first block's weights are shared.

#include "sckpd/model.hpp"

#include <string>
#include <vector>

namespace sckpd {

struct StochasticMatrix {
  Matrix A;  // columns sum to one
  Matrix G;  // positive generating values, A = G / column sums
};

StochasticMatrix stochastic_from_gammas(const Matrix &g);

// Throws DomainError unless A is nonnegative with unit column sums (1e-12).
void require_column_stochastic(const Matrix &a);

// A^steps omega
Vector propagate_omega(const Matrix &a, const Vector &omega, Index steps);

enum class OmegaIndexing {
  Sequential,       // block (c, s) uses A^(S c + s) Omega_1 with 0-based c, s
  CyclePlusSeason,  // block (c, s) uses A^(c + s) Omega_1 with 0-based c, s
};

OmegaIndexing parse_omega_indexing(const std::string &name);
std::string to_string(OmegaIndexing x);

// Observation blocks ordered cycle-major: block b = S c + s.
struct SeasonSchedule {
  Index n_seasons = 1;
  Index n_cycles = 1;
  OmegaIndexing indexing = OmegaIndexing::Sequential;
  // Step j >= 1 (producing the weights of step j from step j-1) uses matrix
  // activation[j mod S]; empty means a single matrix for every step.
  std::vector<Index> activation;
  std::vector<DataSummary> blocks;

  Index n_blocks() const { return n_seasons * n_cycles; }
  Index steps_for_block(Index b) const;
  Index max_steps() const;
  Index matrix_for_step(Index j) const;
  Index n_matrices() const;
  void validate() const;
};

// Weights for each propagation step 0..max_steps.
std::vector<Vector> omega_path(const std::vector<Matrix> &mats, const SeasonSchedule &sched,
                               const Vector &omega1);

// Per-block lowers, shared diagonals, first-block weights, theta and the
// generating matrices of the transitions.
struct SDParams {
  std::vector<std::vector<Matrix>> lowers1;  // [block][k]
  std::vector<std::vector<Matrix>> lowers2;
  Vector D1;
  Vector D2;
  Vector omega1;
  double theta = 0.5;
  std::vector<Matrix> gammas;  // generating matrices, one per transition matrix

  // Static parameters of block b with that block's propagated weights.
  SCKPDParams block_params(Index b, const std::vector<Vector> &path,
                           const SeasonSchedule &sched) const;
};

// Layout: [block 0 static lowers, block 1, ..., log D1, log D2,
//          stick (K-1), logit theta, log G (K*K per matrix, column-major)].
// With one block and no transitions it coincides with StaticLayout.
struct SDLayout {
  Index d1 = 0, d2 = 0, K = 0, n_blocks = 0, n_matrices = 0;
  Index m1 = 0, m2 = 0;

  SDLayout() = default;
  SDLayout(Index d1, Index d2, Index K, Index n_blocks, Index n_matrices);

  Index block_size() const { return K * (m1 + m2); }
  Index lowers1(Index b, Index k) const { return b * block_size() + k * m1; }
  Index lowers2(Index b, Index k) const { return b * block_size() + K * m1 + k * m2; }
  Index log_d1() const { return n_blocks * block_size(); }
  Index log_d2() const { return log_d1() + d1; }
  Index stick() const { return log_d2() + d2; }
  Index logit_theta() const { return stick() + K - 1; }
  Index log_gamma(Index m) const { return logit_theta() + 1 + m * K * K; }
  Index size() const { return log_gamma(n_matrices); }

  std::vector<std::string> names() const;
};

Vector sd_to_unconstrained(const SDParams &p, const SDLayout &layout);
SDParams sd_from_unconstrained(const Vector &u, const SDLayout &layout);

class SDPosterior {
 public:
  // gamma_shape is the shape of the Gamma(shape, 1) prior on each generating
  // entry, so every column of a transition matrix is Dirichlet(shape).
  SDPosterior(SeasonSchedule schedule, SolvedHyper hyper, PriorTargets targets, Index K,
              double gamma_shape = 1.0, LowerParam param = LowerParam::Centered);

  const SDLayout &layout() const { return layout_; }
  const SeasonSchedule &schedule() const { return sched_; }
  Index dim() const { return layout_.size(); }
  LowerParam lower_param() const { return param_; }

  // Model parameters of an unconstrained point and the propagated weights.
  SDParams params(const Vector &u, std::vector<Vector> *path = nullptr) const;

  double log_density_grad(const Vector &u, Vector &grad) const;
  double log_density(const Vector &u) const;

 private:
  SeasonSchedule sched_;
  SolvedHyper hyper_;
  PriorTargets targets_;
  SDLayout layout_;
  double gamma_shape_;
  LowerParam param_;
};

}  // namespace sckpd
