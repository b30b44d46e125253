#include "sckpd/simulate.hpp"

#include "sckpd/dynamic.hpp"
#include "sckpd/model.hpp"
#include "sckpd/summary.hpp"

#include <cmath>
#include <filesystem>

namespace sckpd {

Matrix dirichlet_columns(Index k, double alpha, Rng &rng) {
  if (k < 1 || !(alpha > 0.0)) throw DomainError("Dirichlet needs k >= 1 and alpha > 0");
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix a(k, k);
  for (Index j = 0; j < k; ++j) {
    Vector logg(k);
    for (Index i = 0; i < k; ++i) {
      double u = unif(rng);
      while (u <= 0.0) u = unif(rng);
      logg[i] = std::log(gamma(rng)) + std::log(u) / alpha;
    }
    const double m = logg.maxCoeff();
    const Vector w = (logg.array() - m).exp();
    a.col(j) = w / w.sum();
  }
  return a;
}

Vector wishart_diagonal(const std::vector<double> &scale, double df, Rng &rng) {
  std::chi_squared_distribution<double> chi(df);
  Vector d(static_cast<Index>(scale.size()));
  for (Index j = 0; j < d.size(); ++j) d[j] = scale[static_cast<std::size_t>(j)] * chi(rng);
  return d;
}

Matrix draw_observations(const SCKPDParams &p, Index n, Rng &rng) {
  const Matrix l = assemble_ldagger(p).matrix();
  const Index d = l.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(d, n);
  for (Index i = 0; i < n; ++i)
    for (Index r = 0; r < d; ++r) z(r, i) = normal(rng);
  const Matrix y = l.transpose().triangularView<Eigen::Upper>().solve(z);
  return y.transpose();
}

namespace {

void draw_lowers(SCKPDParams &p, double beta, Rng &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index d1 = p.d1(), d2 = p.d2();
  for (Index k = 0; k < p.K(); ++k) {
    const double sd = std::sqrt(p.omega[k] * beta);
    Matrix l1 = Matrix::Zero(d1, d1), l2 = Matrix::Zero(d2, d2);
    for (Index i = 0; i < d1; ++i)
      for (Index j = 0; j < i; ++j) l1(i, j) = sd * normal(rng);
    for (Index i = 0; i < d2; ++i)
      for (Index j = 0; j < i; ++j) l2(i, j) = sd * normal(rng);
    p.lowers1[static_cast<std::size_t>(k)] = l1;
    p.lowers2[static_cast<std::size_t>(k)] = l2;
  }
}

Json vec_json(const Vector &v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json mat_json(const Matrix &m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.push_back(vec_json(r));
  }
  return rows;
}

}  // namespace

Simulation simulate(const RunConfig &config) {
  RunConfig cfg = config;
  if (is_fit(cfg.mode)) cfg.mode = is_dynamic(cfg.mode) ? RunMode::SimulateDynamic : RunMode::SimulateStatic;
  cfg.validate();
  const bool dynamic = is_dynamic(cfg.mode);
  Rng rng = make_rng(cfg.seed, 0);
  const Index r = cfg.rank;

  SeasonSchedule sched;
  sched.n_seasons = cfg.n_seasons;
  sched.n_cycles = cfg.n_cycles;
  sched.indexing = parse_omega_indexing(cfg.omega_indexing);
  sched.activation = cfg.activation;

  const Vector omega1 = cfg.omega_truth();
  const Vector D1 = wishart_diagonal(cfg.diag_scale1, static_cast<double>(cfg.d1 + 2), rng);
  const Vector D2 = wishart_diagonal(cfg.diag_scale2, static_cast<double>(cfg.d2 + 2), rng);

  std::vector<Matrix> mats;
  if (dynamic) {
    const Index n_mats = std::max<Index>(sched.n_matrices(), 1);
    for (Index m = 0; m < n_mats; ++m) {
      mats.push_back(cfg.identity_transition
                         ? Matrix::Identity(r, r)
                         : dirichlet_columns(r, cfg.transition_concentration, rng));
    }
  }
  const std::vector<Vector> path =
      dynamic ? omega_path(mats, sched, omega1) : std::vector<Vector>{omega1};

  Simulation sim;
  sim.data.d1 = cfg.d1;
  sim.data.d2 = cfg.d2;
  const Index n_blocks = sched.n_blocks();
  sim.data.obs.resize(n_blocks * cfg.n, cfg.d1 * cfg.d2);
  Json blocks = Json::array();
  for (Index b = 0; b < n_blocks; ++b) {
    SCKPDParams p = SCKPDParams::neutral(cfg.d1, cfg.d2, r);
    p.D1 = D1;
    p.D2 = D2;
    p.omega = path[static_cast<std::size_t>(sched.steps_for_block(b))];
    draw_lowers(p, cfg.beta, rng);
    sim.data.obs.middleRows(b * cfg.n, cfg.n) = draw_observations(p, cfg.n, rng);
    if (dynamic) {
      for (Index i = 0; i < cfg.n; ++i) {
        sim.data.cycle.push_back(b / cfg.n_seasons);
        sim.data.season.push_back(b % cfg.n_seasons);
      }
    }
    blocks.push_back(Json{{"block", b},
                          {"cycle", b / cfg.n_seasons},
                          {"season", b % cfg.n_seasons},
                          {"steps", sched.steps_for_block(b)},
                          {"omega", vec_json(p.omega)},
                          {"omega_sorted", vec_json(sorted_ascending(p.omega))},
                          {"stats", to_json(derived_stats(p))}});
    sim.truth.push_back(std::move(p));
  }

  Json t;
  t["kind"] = dynamic ? "dynamic" : "static";
  t["preset"] = cfg.preset;
  t["seed"] = cfg.seed;
  t["d1"] = cfg.d1;
  t["d2"] = cfg.d2;
  t["rank"] = r;
  t["n"] = cfg.n;
  t["n_seasons"] = cfg.n_seasons;
  t["n_cycles"] = cfg.n_cycles;
  t["beta"] = cfg.beta;
  t["omega"] = blocks[0]["omega"];
  t["omega_sorted"] = blocks[0]["omega_sorted"];
  t["D1"] = vec_json(D1);
  t["D2"] = vec_json(D2);
  t["stats"] = blocks[0]["stats"];
  t["blocks"] = blocks;
  if (dynamic) {
    sim.transition = mats.front();
    Json all = Json::array();
    for (const auto &m : mats) all.push_back(mat_json(m));
    t["transition"] = mat_json(mats.front());
    t["transitions"] = all;
    t["omega_indexing"] = cfg.omega_indexing;
    t["identity_transition"] = cfg.identity_transition;
  }
  t["audit"] = Json{
      {"diag_scale1", cfg.diag_scale1},
      {"diag_scale2", cfg.diag_scale2},
      {"diag_df1", cfg.d1 + 2},
      {"diag_df2", cfg.d2 + 2},
      {"scale_assignment",
       "diag_scale1 scales the length-d1 diagonal D1 (mode 1), diag_scale2 the length-d2 "
       "diagonal D2 (mode 2)"}};
  sim.truth_json = t;
  return sim;
}

void write_simulation(const Simulation &sim, const std::string &dir) {
  std::filesystem::create_directories(dir);
  write_dataset_csv((std::filesystem::path(dir) / "data.csv").string(), sim.data);
  write_json((std::filesystem::path(dir) / "truth.json").string(), sim.truth_json);
}

}  // namespace sckpd
