#include "sckpd/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <thread>

namespace sckpd {

void HMCConfig::validate(Index dim) const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size must be > 0");
  if (n_leapfrog <= 0) throw ConfigError("n_leapfrog must be positive");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("target_accept must lie in (0, 1)");
  }
  if (n_warmup < 0 || n_draws < 0) throw ConfigError("n_warmup and n_draws must be >= 0");
  if (mass.size() != 0 && mass.size() != dim) throw ConfigError("mass has the wrong length");
  if (mass.size() != 0 && !(mass.minCoeff() > 0.0)) throw ConfigError("mass must be positive");
  if (!(step_jitter >= 0.0 && step_jitter < 1.0)) throw ConfigError("step_jitter must be in [0, 1)");
  if (!(max_delta_h > 0.0)) throw ConfigError("max_delta_h must be positive");
}

LeapfrogResult leapfrog(const LogDensityGrad &fn, const Vector &q, const Vector &p, double eps,
                        int n_steps, const Vector &inv_mass) {
  LeapfrogResult r;
  r.q = q;
  r.p = p;
  r.grad.resize(q.size());
  for (int s = 0; s < n_steps; ++s) {
    r.q.noalias() += 0.5 * eps * inv_mass.cwiseProduct(r.p);
    r.log_density = fn(r.q, r.grad);
    if (!std::isfinite(r.log_density) || !r.grad.allFinite()) {
      r.divergent = true;
      r.steps_taken = s + 1;
      return r;
    }
    r.p.noalias() += eps * r.grad;
    r.q.noalias() += 0.5 * eps * inv_mass.cwiseProduct(r.p);
    r.steps_taken = s + 1;
  }
  if (n_steps > 0) {
    // the density at the final position, after the closing half step
    r.log_density = fn(r.q, r.grad);
    if (!std::isfinite(r.log_density)) r.divergent = true;
  } else {
    r.log_density = fn(r.q, r.grad);
  }
  return r;
}

double Chain::acceptance_rate() const {
  if (accept_prob.empty()) return 0.0;
  double s = 0.0;
  for (double a : accept_prob) s += a;
  return s / static_cast<double>(accept_prob.size());
}

int Chain::n_divergent() const {
  return static_cast<int>(std::count(divergent.begin(), divergent.end(), true));
}

namespace {

double kinetic(const Vector &p, const Vector &inv_mass) {
  return 0.5 * p.cwiseProduct(inv_mass).dot(p);
}

Vector draw_momentum(Rng &rng, const Vector &inv_mass) {
  std::normal_distribution<double> normal;
  Vector p(inv_mass.size());
  for (Index i = 0; i < p.size(); ++i) p[i] = normal(rng) / std::sqrt(inv_mass[i]);
  return p;
}

struct DualAveraging {
  double mu = 0.0, h_bar = 0.0, log_eps_bar = 0.0;
  int m = 0;
  double target = 0.8;
  static constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    h_bar = 0.0;
    log_eps_bar = 0.0;
    m = 0;
  }
  double update(double accept) {
    ++m;
    const double md = static_cast<double>(m);
    h_bar = (1.0 - 1.0 / (md + t0)) * h_bar + (target - accept) / (md + t0);
    const double log_eps = mu - std::sqrt(md) / gamma * h_bar;
    const double eta = std::pow(md, -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
    return std::exp(log_eps);
  }
  double final_step() const { return std::exp(log_eps_bar); }
};

double find_reasonable_step(const LogDensityGrad &fn, const Vector &q, double logp, double eps,
                            const Vector &inv_mass, Rng &rng) {
  auto log_ratio = [&](double e) {
    const Vector p = draw_momentum(rng, inv_mass);
    const LeapfrogResult r = leapfrog(fn, q, p, e, 1, inv_mass);
    if (r.divergent) return -std::numeric_limits<double>::infinity();
    return (r.log_density - kinetic(r.p, inv_mass)) - (logp - kinetic(p, inv_mass));
  };
  double lr = log_ratio(eps);
  const double dir = lr > std::log(0.5) ? 1.0 : -1.0;
  for (int i = 0; i < 60; ++i) {
    if (!(dir * lr > -dir * std::log(2.0))) break;
    const double next = eps * std::pow(2.0, dir);
    if (next < 1e-12 || next > 1e6) break;
    eps = next;
    lr = log_ratio(eps);
  }
  return eps;
}

Vector regularized_variance(const std::vector<Vector> &samples) {
  const Index dim = samples.front().size();
  const double n = static_cast<double>(samples.size());
  Vector mean = Vector::Zero(dim);
  for (const auto &s : samples) mean += s;
  mean /= n;
  Vector var = Vector::Zero(dim);
  for (const auto &s : samples) var += (s - mean).cwiseAbs2();
  var /= std::max(1.0, n - 1.0);
  return (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
}

}  // namespace

Chain hmc_sample(const LogDensityGrad &fn, const Vector &q0, const HMCConfig &config,
                 std::uint64_t stream) {
  const Index dim = q0.size();
  config.validate(dim);
  Rng rng = make_rng(config.seed, stream);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Chain chain;
  chain.stream = stream;
  Vector inv_mass = Vector::Ones(dim);
  if (config.mass.size() != 0) inv_mass = config.mass.cwiseInverse();

  Vector q = q0;
  Vector grad(dim);
  double logp = fn(q, grad);
  if (!std::isfinite(logp) || !grad.allFinite()) {
    throw DomainError("log density is not finite at the initial point");
  }

  double eps = config.step_size;
  DualAveraging da;
  da.target = config.target_accept;
  if (config.adapt_step && config.n_warmup > 0) {
    eps = find_reasonable_step(fn, q, logp, eps, inv_mass, rng);
    da.restart(eps);
  }

  // mass windows: collect over [w_start, w_end), update at w_end
  std::vector<std::pair<int, int>> windows;
  if (config.adapt_mass && config.n_warmup >= 150) {
    const int n = config.n_warmup;
    windows = {{n / 10, (3 * n) / 10}, {(3 * n) / 10, (17 * n) / 20}};
  }
  std::vector<Vector> window_samples;

  const int total = config.n_warmup + config.n_draws;
  int warmup_div = 0;
  for (int it = 0; it < total; ++it) {
    const bool warmup = it < config.n_warmup;
    double step = eps;
    if (config.step_jitter > 0.0) step *= 1.0 + config.step_jitter * (2.0 * unif(rng) - 1.0);

    const Vector p = draw_momentum(rng, inv_mass);
    const double h0 = -logp + kinetic(p, inv_mass);
    LeapfrogResult r = leapfrog(fn, q, p, step, config.n_leapfrog, inv_mass);
    double h1 = std::numeric_limits<double>::infinity();
    bool divergent = r.divergent;
    if (!divergent) {
      h1 = -r.log_density + kinetic(r.p, inv_mass);
      if (!std::isfinite(h1) || std::abs(h1 - h0) > config.max_delta_h) divergent = true;
    }
    const double accept = divergent ? 0.0 : std::min(1.0, std::exp(h0 - h1));
    const bool take = !divergent && unif(rng) < accept;
    double energy = h0;
    if (take) {
      q = std::move(r.q);
      grad = std::move(r.grad);
      logp = r.log_density;
      energy = h1;
    }

    if (warmup) {
      if (divergent) ++warmup_div;
      if (config.adapt_step) eps = da.update(accept);
      for (const auto &w : windows) {
        if (it >= w.first && it < w.second) window_samples.push_back(q);
        if (it + 1 == w.second && window_samples.size() >= 10) {
          inv_mass = regularized_variance(window_samples);
          window_samples.clear();
          if (config.adapt_step) {
            eps = find_reasonable_step(fn, q, logp, eps, inv_mass, rng);
            da.restart(eps);
          }
        }
      }
      if (it + 1 == config.n_warmup) {
        if (warmup_div == config.n_warmup) {
          throw ConvergenceError("every warmup iteration diverged (last step size " +
                                 std::to_string(eps) + "); check the model or the initial point");
        }
        if (config.adapt_step) eps = da.final_step();
      }
      continue;
    }
    chain.draws.push_back(q);
    chain.accepted.push_back(take);
    chain.accept_prob.push_back(accept);
    chain.energy.push_back(energy);
    chain.divergent.push_back(divergent);
  }
  chain.step_size = eps;
  chain.inv_mass = inv_mass;
  chain.warmup_divergences = warmup_div;
  return chain;
}

int default_thread_count() {
  if (const char *env = std::getenv("SCKPD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<Chain> run_chains(const LogDensityGrad &fn, const std::vector<Vector> &inits,
                              const HMCConfig &config, int n_threads) {
  const std::size_t n = inits.size();
  std::vector<Chain> chains(n);
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      std::size_t c;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n) return;
        c = next++;
      }
      try {
        chains[c] = hmc_sample(fn, inits[c], config, static_cast<std::uint64_t>(c + 1));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return chains;
}

}  // namespace sckpd
