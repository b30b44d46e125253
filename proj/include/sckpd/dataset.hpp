#pragma once

// Observation sets on disk: one CSV row per matrix observation, vectorised
// row-major as y_i_j (column d2*i + j), with cycle and season columns in
// front for blocked data.

#include "sckpd/common.hpp"

#include <string>
#include <vector>

namespace sckpd {

struct Dataset {
  Index d1 = 0;
  Index d2 = 0;
  Matrix obs;                 // n x (d1 d2)
  std::vector<Index> cycle;   // per row, empty for unblocked data
  std::vector<Index> season;

  Index n() const { return obs.rows(); }
  bool blocked() const { return !cycle.empty(); }

  // Rows belonging to block (c, s).
  Matrix block(Index c, Index s) const;

  // Subtracts the column means of every block (of the whole set if unblocked).
  void center();
};

std::vector<std::string> observation_columns(Index d1, Index d2);

// Reads a dataset. A first line containing any non-numeric field is taken as
// a header; a header with "cycle" and "season" columns marks blocked data.
// Ragged rows, non-numeric fields and widths other than d1*d2 (+2 when
// blocked) raise ParseError carrying the 1-based line number.
Dataset read_dataset_csv(const std::string &path, Index d1, Index d2);
Dataset parse_dataset_csv(const std::string &text, Index d1, Index d2);

// Writes with a header and round-trip precision.
void write_dataset_csv(const std::string &path, const Dataset &data);
std::string format_dataset_csv(const Dataset &data);

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

}  // namespace sckpd
