#include "sckpd/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sckpd {

namespace {

struct ChainMoments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
};

ChainMoments moments(const std::vector<double> &x) {
  ChainMoments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= std::max(1.0, n - 1.0);
  return m;
}

void require_equal_lengths(const std::vector<std::vector<double>> &chains) {
  if (chains.empty() || chains.front().size() < 4) {
    throw DomainError("diagnostics need at least one chain with four draws");
  }
  for (const auto &c : chains) {
    if (c.size() != chains.front().size()) throw DimensionError("chains differ in length");
  }
}

}  // namespace

double effective_sample_size(const std::vector<std::vector<double>> &chains) {
  require_equal_lengths(chains);
  const std::size_t M = chains.size();
  const std::size_t n = chains.front().size();
  const double nd = static_cast<double>(n);

  std::vector<ChainMoments> mom;
  double w = 0.0, mean_of_means = 0.0;
  for (const auto &c : chains) {
    mom.push_back(moments(c));
    w += mom.back().var;
    mean_of_means += mom.back().mean;
  }
  w /= static_cast<double>(M);
  mean_of_means /= static_cast<double>(M);
  double b_over_n = 0.0;
  if (M > 1) {
    for (const auto &m : mom) b_over_n += (m.mean - mean_of_means) * (m.mean - mean_of_means);
    b_over_n /= static_cast<double>(M - 1);
  }
  const double var_plus = (nd - 1.0) / nd * w + b_over_n;
  const double total = static_cast<double>(M) * nd;
  if (!(var_plus > 0.0)) return 1.0;

  auto rho = [&](std::size_t lag) {
    double acov = 0.0;
    for (std::size_t c = 0; c < M; ++c) {
      const auto &x = chains[c];
      const double mu = mom[c].mean;
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - mu) * (x[t + lag] - mu);
      acov += s / nd;
    }
    acov /= static_cast<double>(M);
    return 1.0 - (w - acov) / var_plus;
  };

  // Geyer's initial monotone sequence over pairs (rho_2k + rho_2k+1)
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double split_rhat(const std::vector<std::vector<double>> &chains) {
  require_equal_lengths(chains);
  const std::size_t half = chains.front().size() / 2;
  std::vector<std::vector<double>> split;
  for (const auto &c : chains) {
    split.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    split.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  const double n = static_cast<double>(half);
  const double M = static_cast<double>(split.size());
  double w = 0.0, grand = 0.0;
  std::vector<ChainMoments> mom;
  for (const auto &c : split) {
    mom.push_back(moments(c));
    w += mom.back().var;
    grand += mom.back().mean;
  }
  w /= M;
  grand /= M;
  double b = 0.0;
  for (const auto &m : mom) b += (m.mean - grand) * (m.mean - grand);
  b *= n / (M - 1.0);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

Diagnostics diagnostics(const std::vector<Chain> &chains) {
  if (chains.empty()) throw DomainError("no chains to diagnose");
  Diagnostics d;
  std::size_t n = chains.front().draws.size();
  for (const auto &c : chains) n = std::min(n, c.draws.size());
  if (n < 4) throw DomainError("chains are too short for diagnostics");
  const Index dim = chains.front().draws.front().size();

  double acc = 0.0;
  for (const auto &c : chains) {
    d.chain_acceptance.push_back(c.acceptance_rate());
    acc += c.acceptance_rate();
    d.n_divergent += c.n_divergent();
  }
  d.acceptance_rate = acc / static_cast<double>(chains.size());

  for (std::size_t i = 0; i < chains.size(); ++i) {
    for (std::size_t j = i + 1; j < chains.size(); ++j) {
      bool same = chains[i].draws.size() == chains[j].draws.size();
      for (std::size_t t = 0; same && t < chains[i].draws.size(); ++t) {
        same = chains[i].draws[t] == chains[j].draws[t];
      }
      if (same) {
        d.duplicate_chains = true;
        d.warnings.push_back("chains " + std::to_string(i) + " and " + std::to_string(j) +
                             " are identical; potential scale reduction is not informative");
      }
    }
  }

  d.ess.resize(dim);
  d.rhat.resize(dim);
  std::vector<std::vector<double>> coord(chains.size(), std::vector<double>(n));
  for (Index k = 0; k < dim; ++k) {
    for (std::size_t c = 0; c < chains.size(); ++c) {
      for (std::size_t t = 0; t < n; ++t) coord[c][t] = chains[c].draws[t][k];
    }
    d.ess[k] = effective_sample_size(coord);
    d.rhat[k] = split_rhat(coord);
  }
  if (d.n_divergent > 0) {
    d.warnings.push_back(std::to_string(d.n_divergent) + " post-warmup divergent transitions");
  }
  return d;
}

}  // namespace sckpd
