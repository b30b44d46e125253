#pragma once

// Label-invariant summaries shared by ground-truth records and posterior
// summaries: sorted weights, log det and squared norms of L-dagger, and
// quantile tables over draws.

#include "sckpd/config.hpp"
#include "sckpd/hmc.hpp"
#include "sckpd/params.hpp"

#include <string>
#include <vector>

namespace sckpd {

struct DerivedStats {
  double log_det_ldagger = 0.0;
  double diag_fro2 = 0.0;   // squared Frobenius norm of the diagonal of L-dagger
  double lower_fro2 = 0.0;  // squared Frobenius norm of its strict lower part
};

DerivedStats derived_stats(const SCKPDParams &p);
Json to_json(const DerivedStats &s);

Vector sorted_ascending(const Vector &v);

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double prob);

inline constexpr double kQuantileProbs[3] = {0.025, 0.5, 0.975};
inline constexpr const char *kQuantileKeys[3] = {"q2.5", "q50", "q97.5"};

// {"q2.5", "q50", "q97.5", "mean"} of one scalar.
Json quantile_summary(const std::vector<double> &values);

// Posterior draws in long form: one row per (chain, draw).
struct DrawTable {
  std::vector<std::string> columns;
  std::vector<int> chain;
  std::vector<int> draw;
  Matrix values;  // rows x columns

  Index column(const std::string &name) const;  // -1 when absent
  bool has(const std::string &name) const { return column(name) >= 0; }
  std::vector<double> values_of(const std::string &name) const;
  // Per-chain series of a column; chains must have equal length.
  std::vector<std::vector<double>> chains_of(const std::string &name) const;
  int n_chains() const;

  std::string to_csv() const;
  static DrawTable from_csv(const std::string &text);
  static DrawTable read(const std::string &path);
  void write(const std::string &path) const;
};

// Column prefix of block b: "" for single-block fits, "b<b>_" otherwise.
std::string block_prefix(Index b, Index n_blocks);

// Quantile tables of the derived columns, block by block, plus ESS and
// split R-hat of every derived column. Block b is (cycle b / S, season b % S).
Json summarize_draws(const DrawTable &table, Index n_seasons = 1);

Json diagnostics_json(const Diagnostics &d, const std::vector<Chain> &chains);

void write_json(const std::string &path, const Json &j);
Json read_json(const std::string &path);

}  // namespace sckpd
