#include "sckpd/summary.hpp"

#include "sckpd/dataset.hpp"
#include "sckpd/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sckpd {

DerivedStats derived_stats(const SCKPDParams &p) {
  const CholFactor l = assemble_ldagger(p);
  DerivedStats s;
  s.log_det_ldagger = log_det_ldagger(p);
  s.diag_fro2 = p.D1.squaredNorm() * p.D2.squaredNorm();
  s.lower_fro2 = l.strict_lower().squaredNorm();
  return s;
}

Json to_json(const DerivedStats &s) {
  return Json{{"log_det_ldagger", s.log_det_ldagger},
              {"diag_fro2", s.diag_fro2},
              {"lower_fro2", s.lower_fro2}};
}

Vector sorted_ascending(const Vector &v) {
  Vector out = v;
  std::sort(out.data(), out.data() + out.size());
  return out;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Json quantile_summary(const std::vector<double> &values) {
  Json j;
  for (int q = 0; q < 3; ++q) j[kQuantileKeys[q]] = quantile(values, kQuantileProbs[q]);
  double mean = 0.0;
  for (double x : values) mean += x;
  j["mean"] = mean / static_cast<double>(values.size());
  return j;
}

Index DrawTable::column(const std::string &name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  return it == columns.end() ? -1 : static_cast<Index>(it - columns.begin());
}

std::vector<double> DrawTable::values_of(const std::string &name) const {
  const Index c = column(name);
  if (c < 0) throw DimensionError("draw table has no column '" + name + "'");
  std::vector<double> out(static_cast<std::size_t>(values.rows()));
  for (Index r = 0; r < values.rows(); ++r) out[static_cast<std::size_t>(r)] = values(r, c);
  return out;
}

int DrawTable::n_chains() const {
  int n = 0;
  for (int c : chain) n = std::max(n, c + 1);
  return n;
}

std::vector<std::vector<double>> DrawTable::chains_of(const std::string &name) const {
  const Index c = column(name);
  if (c < 0) throw DimensionError("draw table has no column '" + name + "'");
  std::vector<std::vector<double>> out(static_cast<std::size_t>(n_chains()));
  for (Index r = 0; r < values.rows(); ++r) {
    out[static_cast<std::size_t>(chain[static_cast<std::size_t>(r)])].push_back(values(r, c));
  }
  for (const auto &s : out) {
    if (s.size() != out.front().size()) throw DimensionError("chains have unequal lengths");
  }
  return out;
}

std::string DrawTable::to_csv() const {
  std::string out = "chain,draw";
  for (const auto &c : columns) out += "," + c;
  out += '\n';
  for (Index r = 0; r < values.rows(); ++r) {
    out += std::to_string(chain[static_cast<std::size_t>(r)]) + "," +
           std::to_string(draw[static_cast<std::size_t>(r)]);
    for (Index c = 0; c < values.cols(); ++c) out += "," + format_double(values(r, c));
    out += '\n';
  }
  return out;
}

DrawTable DrawTable::from_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  DrawTable t;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0, width = 0;
  auto split = [](const std::string &s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      out.push_back(cur);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (width == 0) {
      if (fields.size() < 2 || fields[0] != "chain" || fields[1] != "draw") {
        throw ParseError("line " + std::to_string(line_no) + ": draws header must start with chain,draw",
                         line_no);
      }
      t.columns.assign(fields.begin() + 2, fields.end());
      width = fields.size();
      continue;
    }
    if (fields.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + ": ragged row, expected " +
                           std::to_string(width) + " fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    std::vector<double> v(width);
    for (std::size_t c = 0; c < width; ++c) {
      const auto &f = fields[c];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[c]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError("line " + std::to_string(line_no) + ", field " + std::to_string(c + 1) +
                             ": non-numeric value '" + f + "'",
                         line_no);
      }
    }
    t.chain.push_back(static_cast<int>(v[0]));
    t.draw.push_back(static_cast<int>(v[1]));
    rows.push_back(std::move(v));
  }
  if (width == 0) throw ParseError("draws file is empty");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width - 2));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 2; c < width; ++c)
      t.values(static_cast<Index>(r), static_cast<Index>(c - 2)) = rows[r][c];
  return t;
}

DrawTable DrawTable::read(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_csv(buf.str());
}

void DrawTable::write(const std::string &path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write '" + path + "'");
  out << to_csv();
  if (!out) throw Error("io_error", "failed writing '" + path + "'");
}

std::string block_prefix(Index b, Index n_blocks) {
  return n_blocks > 1 ? "b" + std::to_string(b) + "_" : "";
}

namespace {

constexpr const char *kStatNames[3] = {"log_det_ldagger", "diag_fro2", "lower_fro2"};

Json weight_table(const DrawTable &t, const std::string &prefix) {
  Json j;
  std::vector<std::vector<double>> cols;
  for (Index k = 0; t.has(prefix + "omega_sorted_" + std::to_string(k)); ++k) {
    cols.push_back(t.values_of(prefix + "omega_sorted_" + std::to_string(k)));
  }
  for (int q = 0; q < 3; ++q) {
    Json row = Json::array();
    for (const auto &c : cols) row.push_back(quantile(c, kQuantileProbs[q]));
    j[kQuantileKeys[q]] = row;
  }
  Json mean = Json::array();
  for (const auto &c : cols) {
    double s = 0.0;
    for (double x : c) s += x;
    mean.push_back(s / static_cast<double>(c.size()));
  }
  j["mean"] = mean;
  return j;
}

}  // namespace

Json summarize_draws(const DrawTable &table, Index n_seasons) {
  if (table.values.rows() == 0) throw DomainError("no draws to summarise");
  if (n_seasons < 1) throw DomainError("n_seasons must be positive");
  Index n_blocks = 0;
  while (table.has("b" + std::to_string(n_blocks) + "_omega_sorted_0")) ++n_blocks;
  const bool prefixed = n_blocks > 0;
  if (!prefixed) {
    if (!table.has("omega_sorted_0")) throw DimensionError("draw table has no weight columns");
    n_blocks = 1;
  }

  Json s;
  s["n_chains"] = table.n_chains();
  s["n_draws"] = table.values.rows();
  if (table.has("theta")) s["theta"] = quantile_summary(table.values_of("theta"));
  Json blocks = Json::array();
  for (Index b = 0; b < n_blocks; ++b) {
    const std::string prefix = prefixed ? "b" + std::to_string(b) + "_" : "";
    Json blk;
    blk["block"] = b;
    blk["cycle"] = b / n_seasons;
    blk["season"] = b % n_seasons;
    blk["omega_sorted"] = weight_table(table, prefix);
    Json stats;
    for (const char *name : kStatNames) {
      if (table.has(prefix + name)) stats[name] = quantile_summary(table.values_of(prefix + name));
    }
    blk["stats"] = stats;
    blocks.push_back(blk);
  }
  s["omega_sorted"] = blocks[0]["omega_sorted"];
  s["stats"] = blocks[0]["stats"];
  s["blocks"] = blocks;

  Json mixing;
  const bool can_mix = table.n_chains() >= 1 && table.values.rows() / table.n_chains() >= 4;
  double worst = 1.0;
  if (can_mix) {
    for (const auto &name : table.columns) {
      const bool derived = name.find("omega_sorted_") != std::string::npos || name == "theta" ||
                           name.find("log_det_ldagger") != std::string::npos ||
                           name.find("_fro2") != std::string::npos;
      if (!derived) continue;
      const auto chains = table.chains_of(name);
      const double r = split_rhat(chains);
      mixing[name] = Json{{"ess", effective_sample_size(chains)}, {"rhat", r}};
      if (std::isfinite(r)) worst = std::max(worst, r);
    }
  }
  s["derived_mixing"] = mixing;
  s["max_derived_rhat"] = worst;
  return s;
}

Json diagnostics_json(const Diagnostics &d, const std::vector<Chain> &chains) {
  Json j;
  j["acceptance_rate"] = d.acceptance_rate;
  j["chain_acceptance"] = d.chain_acceptance;
  j["n_divergent"] = d.n_divergent;
  j["duplicate_chains"] = d.duplicate_chains;
  j["warnings"] = d.warnings;
  if (d.ess.size() > 0) {
    j["min_ess"] = d.ess.minCoeff();
    j["max_rhat"] = d.rhat.maxCoeff();
  }
  Json steps = Json::array(), warm = Json::array();
  for (const auto &c : chains) {
    steps.push_back(c.step_size);
    warm.push_back(c.warmup_divergences);
  }
  j["step_size"] = steps;
  j["warmup_divergences"] = warm;
  return j;
}

void write_json(const std::string &path, const Json &j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("io_error", "failed writing '" + path + "'");
}

Json read_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

}  // namespace sckpd
