#pragma once

// End-to-end inference: prior centering from the data, hyperparameter
// solve, HMC chains and the posterior draw table and summary.

#include "sckpd/config.hpp"
#include "sckpd/dataset.hpp"
#include "sckpd/hmc.hpp"
#include "sckpd/hyperprior.hpp"
#include "sckpd/summary.hpp"

#include <string>
#include <vector>

namespace sckpd {

struct FitResult {
  RunConfig config;
  PriorTargets targets;
  SolvedHyper hyper;
  std::vector<Chain> chains;
  Diagnostics diagnostics;
  DrawTable draws;  // unconstrained coordinates then derived columns
  Json summary;
  Json run;  // config, threads and timing
};

Json to_json(const PriorTargets &t);
Json to_json(const SolvedHyper &h);

// Targets and hyperparameters for the data (the first block when blocked).
// Throws DomainError when a shape target has no interior solution.
std::pair<PriorTargets, SolvedHyper> center_prior(const Matrix &first_block, Index d1, Index d2,
                                                  Centering centering);

FitResult fit(const RunConfig &config, Dataset data);

// Writes draws.csv, summary.json and run.json.
void write_fit(const FitResult &result, const std::string &dir);

}  // namespace sckpd
