#include "sckpd/fit.hpp"

#include "sckpd/dynamic.hpp"
#include "sckpd/model.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>
#include <tuple>

namespace sckpd {

Json to_json(const PriorTargets &t) {
  return Json{{"gamma_D", t.gamma_D}, {"F_D", t.F_D}, {"F_L", t.F_L}, {"c", t.c},
              {"M1", t.M1},           {"d1", t.d1},   {"d2", t.d2}};
}

Json to_json(const SolvedHyper &h) {
  return Json{{"a1", h.a1},         {"a2", h.a2},   {"rate1", h.rate1},
              {"rate2", h.rate2},   {"c1", h.c1},   {"c2", h.c2},
              {"beta", h.beta},     {"epsilon_residual", h.epsilon_residual},
              {"interior", h.interior}};
}

std::pair<PriorTargets, SolvedHyper> center_prior(const Matrix &first_block, Index d1, Index d2,
                                                  Centering centering) {
  if (first_block.rows() < 2) throw DomainError("the first block needs at least two observations");
  const PriorTargets t = prior_targets_from_sample(sample_covariance(first_block), d1, d2, centering);
  const SolvedHyper h = solve_hyper(t);
  if (!h.interior) {
    std::ostringstream msg;
    msg << "shape targets c1 = " << h.c1 << ", c2 = " << h.c2
        << " leave no interior Gamma shape (needs c > 1)";
    throw DomainError(msg.str());
  }
  if (!(h.beta > 0.0)) throw DomainError("lower-entry variance solved to zero");
  return {t, h};
}

namespace {

// Least-squares split of the log diagonal of the data's precision factor
// into log D1 (rows) and log D2 (columns).
void diag_init(const Matrix &block, Index d1, Index d2, Vector &log_d1, Vector &log_d2) {
  log_d1 = Vector::Zero(d1);
  log_d2 = Vector::Zero(d2);
  if (block.rows() < 2) return;
  Matrix prec = sample_covariance(block).inverse();
  prec = 0.5 * (prec + prec.transpose());
  const Eigen::LLT<Matrix> llt(prec);
  if (llt.info() != Eigen::Success || !prec.allFinite()) return;
  const Vector ld = Matrix(llt.matrixL()).diagonal().array().log();
  Matrix m(d1, d2);
  for (Index i = 0; i < d1; ++i)
    for (Index j = 0; j < d2; ++j) m(i, j) = ld[d2 * i + j];
  const double all = m.mean();
  log_d1 = m.rowwise().mean().array() - 0.5 * all;
  log_d2 = m.colwise().mean().transpose().array() - 0.5 * all;
}

double uniform_in(Rng &rng, double half_width) {
  return std::uniform_real_distribution<double>(-half_width, half_width)(rng);
}

template <typename Layout>
Vector draw_init(const Layout &layout, const Vector &log_d1, const Vector &log_d2, Rng &rng) {
  Vector u(layout.size());
  for (Index i = 0; i < layout.log_d1(); ++i) u[i] = uniform_in(rng, 0.1);
  for (Index i = 0; i < layout.d1; ++i) u[layout.log_d1() + i] = log_d1[i] + uniform_in(rng, 0.2);
  for (Index j = 0; j < layout.d2; ++j) u[layout.log_d2() + j] = log_d2[j] + uniform_in(rng, 0.2);
  for (Index i = layout.stick(); i < u.size(); ++i) u[i] = uniform_in(rng, 1.0);
  return u;
}

void add_derived(std::vector<double> &row, const SCKPDParams &p) {
  const Vector w = sorted_ascending(p.omega);
  for (Index k = 0; k < w.size(); ++k) row.push_back(w[k]);
  const DerivedStats s = derived_stats(p);
  row.push_back(s.log_det_ldagger);
  row.push_back(s.diag_fro2);
  row.push_back(s.lower_fro2);
}

void derived_names(std::vector<std::string> &cols, const std::string &prefix, Index K) {
  for (Index k = 0; k < K; ++k) cols.push_back(prefix + "omega_sorted_" + std::to_string(k));
  cols.push_back(prefix + "log_det_ldagger");
  cols.push_back(prefix + "diag_fro2");
  cols.push_back(prefix + "lower_fro2");
}

}  // namespace

FitResult fit(const RunConfig &config, Dataset data) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg = config;
  if (!is_fit(cfg.mode)) cfg.mode = is_dynamic(cfg.mode) ? RunMode::FitDynamic : RunMode::FitStatic;
  if (cfg.input.empty()) cfg.input = "<memory>";
  cfg.validate();
  if (data.d1 != cfg.d1 || data.d2 != cfg.d2) {
    throw DimensionError("dataset is " + std::to_string(data.d1) + "x" + std::to_string(data.d2) +
                         " but the config says " + std::to_string(cfg.d1) + "x" +
                         std::to_string(cfg.d2));
  }
  const bool dynamic = is_dynamic(cfg.mode);
  if (dynamic && !data.blocked()) throw ConfigError("fit-dynamic needs cycle and season columns");
  if (cfg.center_data) data.center();

  const Index n_blocks = dynamic ? cfg.n_cycles * cfg.n_seasons : 1;
  std::vector<Matrix> block_obs;
  for (Index b = 0; b < n_blocks; ++b) {
    block_obs.push_back(dynamic ? data.block(b / cfg.n_seasons, b % cfg.n_seasons) : data.obs);
    if (dynamic && block_obs.back().rows() == 0) {
      throw DimensionError("block (cycle " + std::to_string(b / cfg.n_seasons) + ", season " +
                           std::to_string(b % cfg.n_seasons) + ") has no observations");
    }
  }

  FitResult res;
  res.config = cfg;
  std::tie(res.targets, res.hyper) =
      center_prior(block_obs.front(), cfg.d1, cfg.d2, parse_centering(cfg.centering));

  const LowerParam param = parse_lower_param(cfg.lower_param);
  std::unique_ptr<StaticPosterior> stat;
  std::unique_ptr<SDPosterior> dyn;
  LogDensityGrad fn;
  std::vector<std::string> names;
  Index dim = 0;
  if (dynamic) {
    SeasonSchedule sched;
    sched.n_seasons = cfg.n_seasons;
    sched.n_cycles = cfg.n_cycles;
    sched.indexing = parse_omega_indexing(cfg.omega_indexing);
    sched.activation = cfg.activation;
    for (const auto &obs : block_obs) {
      sched.blocks.push_back(DataSummary::from_observations(obs, cfg.d1, cfg.d2));
    }
    dyn = std::make_unique<SDPosterior>(std::move(sched), res.hyper, res.targets, cfg.K,
                                        cfg.gamma_shape, param);
    const SDPosterior *post = dyn.get();
    fn = [post](const Vector &u, Vector &g) { return post->log_density_grad(u, g); };
    names = post->layout().names();
    dim = post->dim();
  } else {
    stat = std::make_unique<StaticPosterior>(
        DataSummary::from_observations(block_obs.front(), cfg.d1, cfg.d2), res.hyper, res.targets,
        cfg.K, param);
    const StaticPosterior *post = stat.get();
    fn = [post](const Vector &u, Vector &g) { return post->log_density_grad(u, g); };
    names = post->layout().names();
    dim = post->dim();
  }

  Vector log_d1, log_d2;
  diag_init(block_obs.front(), cfg.d1, cfg.d2, log_d1, log_d2);
  Rng init_rng = make_rng(cfg.seed, 0);
  std::vector<Vector> inits;
  for (int c = 0; c < cfg.n_chains; ++c) {
    bool ok = false;
    Vector u, g;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      u = dynamic ? draw_init(dyn->layout(), log_d1, log_d2, init_rng)
                  : draw_init(stat->layout(), log_d1, log_d2, init_rng);
      const double lp = fn(u, g);
      ok = std::isfinite(lp) && g.allFinite();
    }
    if (!ok) {
      throw ConvergenceError("chain " + std::to_string(c) +
                             ": no finite log posterior after 100 initialisations");
    }
    inits.push_back(u);
  }

  HMCConfig hmc = cfg.hmc;
  hmc.seed = cfg.seed;
  hmc.validate(dim);
  const int threads = std::min(default_thread_count(), cfg.n_chains);
  res.chains = run_chains(fn, inits, hmc, threads);
  res.diagnostics = diagnostics(res.chains);

  DrawTable &t = res.draws;
  t.columns = names;
  t.columns.push_back("theta");
  for (Index b = 0; b < n_blocks; ++b) derived_names(t.columns, block_prefix(b, n_blocks), cfg.K);
  Index rows = 0;
  for (const auto &c : res.chains) rows += static_cast<Index>(c.draws.size());
  t.values.resize(rows, static_cast<Index>(t.columns.size()));
  Index r = 0;
  for (std::size_t c = 0; c < res.chains.size(); ++c) {
    for (std::size_t i = 0; i < res.chains[c].draws.size(); ++i, ++r) {
      const Vector &u = res.chains[c].draws[i];
      std::vector<double> row(u.data(), u.data() + u.size());
      if (dynamic) {
        std::vector<Vector> path;
        const SDParams p = dyn->params(u, &path);
        row.push_back(p.theta);
        for (Index b = 0; b < n_blocks; ++b) add_derived(row, p.block_params(b, path, dyn->schedule()));
      } else {
        const SCKPDParams p = stat->params(u);
        row.push_back(p.theta);
        add_derived(row, p);
      }
      t.chain.push_back(static_cast<int>(c));
      t.draw.push_back(static_cast<int>(i));
      t.values.row(r) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Index>(row.size()));
    }
  }

  res.summary = summarize_draws(t, dynamic ? cfg.n_seasons : 1);
  res.summary["kind"] = dynamic ? "dynamic" : "static";
  res.summary["K"] = cfg.K;
  res.summary["diagnostics"] = diagnostics_json(res.diagnostics, res.chains);
  res.summary["targets"] = to_json(res.targets);
  res.summary["hyper"] = to_json(res.hyper);
  res.summary["centering"] = cfg.centering;
  res.summary["lower_param"] = cfg.lower_param;

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  res.run = Json{{"config", cfg.to_json()},
                 {"threads", threads},
                 {"dim", dim},
                 {"n_observations", data.n()},
                 {"elapsed_seconds", secs}};
  return res;
}

void write_fit(const FitResult &result, const std::string &dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  result.draws.write((fs::path(dir) / "draws.csv").string());
  write_json((fs::path(dir) / "summary.json").string(), result.summary);
  write_json((fs::path(dir) / "run.json").string(), result.run);
}

}  // namespace sckpd
