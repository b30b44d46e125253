#pragma once

// Hamiltonian Monte Carlo with a diagonal mass matrix, fixed trajectory
// length and dual-averaging step-size adaptation during warmup.

#include "sckpd/common.hpp"
#include "sckpd/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sckpd {

// Returns log density at q and writes its gradient into grad.
using LogDensityGrad = std::function<double(const Vector &q, Vector &grad)>;

struct HMCConfig {
  double step_size = 0.1;
  int n_leapfrog = 20;
  double target_accept = 0.8;
  int n_warmup = 1000;
  int n_draws = 1000;
  std::uint64_t seed = 1;
  Vector mass;  // diagonal of M; empty means identity
  bool adapt_step = true;
  bool adapt_mass = false;
  double step_jitter = 0.0;  // step drawn uniformly in eps * [1 - j, 1 + j]
  double max_delta_h = 1000.0;

  void validate(Index dim) const;
};

struct LeapfrogResult {
  Vector q;
  Vector p;
  double log_density = 0.0;
  Vector grad;
  bool divergent = false;
  int steps_taken = 0;
};

// Position Verlet: q += eps/2 M^-1 p, p += eps grad, q += eps/2 M^-1 p, per
// step. Stops early and flags divergence on a non-finite density/gradient.
LeapfrogResult leapfrog(const LogDensityGrad &fn, const Vector &q, const Vector &p, double eps,
                        int n_steps, const Vector &inv_mass);

struct Chain {
  std::vector<Vector> draws;
  std::vector<bool> accepted;
  std::vector<double> accept_prob;
  std::vector<double> energy;  // Hamiltonian at the retained state
  std::vector<bool> divergent;
  double step_size = 0.0;
  Vector inv_mass;
  int warmup_divergences = 0;
  std::uint64_t stream = 0;

  double acceptance_rate() const;
  int n_divergent() const;
};

// Runs warmup then n_draws iterations from q0 using the generator for
// (config.seed, stream).
Chain hmc_sample(const LogDensityGrad &fn, const Vector &q0, const HMCConfig &config,
                 std::uint64_t stream = 1);

// Chains c = 0..n-1 use streams c + 1 and run on up to n_threads threads.
std::vector<Chain> run_chains(const LogDensityGrad &fn, const std::vector<Vector> &inits,
                              const HMCConfig &config, int n_threads);

// Thread count from SCKPD_THREADS, defaulting to hardware concurrency.
int default_thread_count();

struct Diagnostics {
  double acceptance_rate = 0.0;
  std::vector<double> chain_acceptance;
  Vector ess;   // per coordinate, summed over chains
  Vector rhat;  // split potential scale reduction per coordinate
  int n_divergent = 0;
  bool duplicate_chains = false;  // some chains are bitwise identical
  std::vector<std::string> warnings;
};

// Effective sample size of one or more equal-length chains of a scalar,
// with Geyer's initial monotone sequence.
double effective_sample_size(const std::vector<std::vector<double>> &chains);
double split_rhat(const std::vector<std::vector<double>> &chains);

Diagnostics diagnostics(const std::vector<Chain> &chains);

}  // namespace sckpd
