#pragma once

// Synthetic data from the static and seasonally dynamic generating
// processes, with a ground-truth record in the posterior summary schema.

#include "sckpd/config.hpp"
#include "sckpd/dataset.hpp"
#include "sckpd/params.hpp"
#include "sckpd/rng.hpp"

#include <vector>

namespace sckpd {

struct Simulation {
  Dataset data;
  std::vector<SCKPDParams> truth;  // one per block
  Matrix transition;               // rank x rank, empty for static runs
  Json truth_json;
};

// Every column Dirichlet(alpha), drawn through log-gamma variables so tiny
// concentrations stay on the simplex.
Matrix dirichlet_columns(Index k, double alpha, Rng &rng);

// Diagonal of a Wishart(df, diag(scale)) draw: scale_j times chi-square(df).
Vector wishart_diagonal(const std::vector<double> &scale, double df, Rng &rng);

// Observations y = L^-T z, z standard normal, for the precision factor of p.
Matrix draw_observations(const SCKPDParams &p, Index n, Rng &rng);

// Uses stream 0 of the config seed; identical configs give identical output.
Simulation simulate(const RunConfig &config);

// Writes data.csv and truth.json into config.output_dir.
void write_simulation(const Simulation &sim, const std::string &dir);

}  // namespace sckpd
