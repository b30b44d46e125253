#include "sckpd/config.hpp"

#include "sckpd/dynamic.hpp"
#include "sckpd/hyperprior.hpp"
#include "sckpd/model.hpp"

#include <cmath>
#include <fstream>

namespace sckpd {

RunMode parse_run_mode(const std::string &name) {
  if (name == "simulate-static") return RunMode::SimulateStatic;
  if (name == "simulate-dynamic") return RunMode::SimulateDynamic;
  if (name == "fit-static") return RunMode::FitStatic;
  if (name == "fit-dynamic") return RunMode::FitDynamic;
  throw ConfigError("mode: unknown value '" + name + "'");
}

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::SimulateStatic: return "simulate-static";
    case RunMode::SimulateDynamic: return "simulate-dynamic";
    case RunMode::FitStatic: return "fit-static";
    case RunMode::FitDynamic: return "fit-dynamic";
  }
  return "";
}

bool is_dynamic(RunMode m) { return m == RunMode::SimulateDynamic || m == RunMode::FitDynamic; }
bool is_fit(RunMode m) { return m == RunMode::FitStatic || m == RunMode::FitDynamic; }

namespace {

RunMode with_kind(RunMode action, bool dynamic) {
  if (is_fit(action)) return dynamic ? RunMode::FitDynamic : RunMode::FitStatic;
  return dynamic ? RunMode::SimulateDynamic : RunMode::SimulateStatic;
}

template <typename T>
T field(const Json &j, const std::string &key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(key + ": " + e.what());
  }
}

Json hmc_json(const HMCConfig &h, int n_chains) {
  return Json{{"step_size", h.step_size},     {"n_leapfrog", h.n_leapfrog},
              {"target_accept", h.target_accept}, {"n_warmup", h.n_warmup},
              {"n_draws", h.n_draws},         {"adapt_step", h.adapt_step},
              {"adapt_mass", h.adapt_mass},   {"step_jitter", h.step_jitter},
              {"max_delta_h", h.max_delta_h}, {"n_chains", n_chains}};
}

void merge_hmc(const Json &j, HMCConfig &h, int &n_chains) {
  if (!j.is_object()) throw ConfigError("hmc: expected an object");
  for (const auto &[key, v] : j.items()) {
    const std::string name = "hmc." + key;
    if (key == "step_size") h.step_size = field<double>(v, name);
    else if (key == "n_leapfrog") h.n_leapfrog = field<int>(v, name);
    else if (key == "target_accept") h.target_accept = field<double>(v, name);
    else if (key == "n_warmup") h.n_warmup = field<int>(v, name);
    else if (key == "n_draws") h.n_draws = field<int>(v, name);
    else if (key == "adapt_step") h.adapt_step = field<bool>(v, name);
    else if (key == "adapt_mass") h.adapt_mass = field<bool>(v, name);
    else if (key == "step_jitter") h.step_jitter = field<double>(v, name);
    else if (key == "max_delta_h") h.max_delta_h = field<double>(v, name);
    else if (key == "n_chains") n_chains = field<int>(v, name);
    else throw ConfigError("unknown key '" + name + "'");
  }
}

}  // namespace

void RunConfig::apply_preset(const std::string &name) {
  const RunMode action = mode;
  *this = RunConfig{};
  preset = name;
  if (name.empty()) {
    mode = with_kind(action, false);
    return;
  }
  hmc.n_warmup = 1000;
  hmc.n_draws = 1000;
  hmc.n_leapfrog = 100;
  hmc.adapt_mass = true;
  n_chains = 4;
  if (name == "paper-static" || name == "paper-separable") {
    mode = with_kind(action, false);
    d1 = 4;
    d2 = 5;
    K = 5;
    n = 500;
    beta = 2.0;
    // the length-4 scale vector fits mode 1 and the length-5 one mode 2
    diag_scale1 = {1.0, 0.4, 0.3, 0.2};
    diag_scale2 = {0.75, 1.0, 0.2, 0.3, 0.1};
    if (name == "paper-static") {
      rank = 5;
      omega_u = {1, 4, 6, 7, 9};
    } else {
      rank = 1;
      omega_u = {1};
    }
  } else if (name == "paper-dynamic") {
    mode = with_kind(action, true);
    d1 = 5;
    d2 = 2;
    K = 5;
    rank = 5;
    n = 500;
    n_seasons = 4;
    n_cycles = 3;
    beta = 2.0;
    omega_u = {1, 4, 6, 7, 9};
    transition_concentration = 0.05;
    gamma_shape = transition_concentration;
    hmc.n_warmup = 2000;
    hmc.n_leapfrog = 500;
    diag_scale1 = {0.75, 1.0, 0.2, 0.3, 0.1};
    diag_scale2 = {1.0, 0.4};
  } else {
    throw ConfigError("preset: unknown value '" + name + "'");
  }
}

void RunConfig::merge(const Json &j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (j.contains("preset")) apply_preset(field<std::string>(j["preset"], "preset"));
  for (const auto &[key, v] : j.items()) {
    if (key == "preset") continue;
    if (key == "mode") {
      const std::string m = field<std::string>(v, key);
      if (m == "static" || m == "dynamic") mode = with_kind(mode, m == "dynamic");
      else mode = parse_run_mode(m);
    } else if (key == "d1") d1 = field<Index>(v, key);
    else if (key == "d2") d2 = field<Index>(v, key);
    else if (key == "K") K = field<Index>(v, key);
    else if (key == "rank") rank = field<Index>(v, key);
    else if (key == "n") n = field<Index>(v, key);
    else if (key == "n_seasons") n_seasons = field<Index>(v, key);
    else if (key == "n_cycles") n_cycles = field<Index>(v, key);
    else if (key == "omega_indexing") omega_indexing = field<std::string>(v, key);
    else if (key == "activation") activation = field<std::vector<Index>>(v, key);
    else if (key == "beta") beta = field<double>(v, key);
    else if (key == "omega_u") omega_u = field<std::vector<double>>(v, key);
    else if (key == "transition_concentration") transition_concentration = field<double>(v, key);
    else if (key == "identity_transition") identity_transition = field<bool>(v, key);
    else if (key == "diag_scale1") diag_scale1 = field<std::vector<double>>(v, key);
    else if (key == "diag_scale2") diag_scale2 = field<std::vector<double>>(v, key);
    else if (key == "centering") centering = field<std::string>(v, key);
    else if (key == "lower_param") lower_param = field<std::string>(v, key);
    else if (key == "center_data") center_data = field<bool>(v, key);
    else if (key == "gamma_shape") gamma_shape = field<double>(v, key);
    else if (key == "hmc") merge_hmc(v, hmc, n_chains);
    else if (key == "seed") seed = field<std::uint64_t>(v, key);
    else if (key == "input") input = field<std::string>(v, key);
    else if (key == "output_dir") output_dir = field<std::string>(v, key);
    else throw ConfigError("unknown key '" + key + "'");
  }
}

RunConfig RunConfig::from_json(const Json &j) {
  RunConfig c;
  c.merge(j);
  return c;
}

RunConfig RunConfig::from_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  return from_json(j);
}

void RunConfig::set_override(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json tree = value;
  std::string path = key;
  for (auto dot = path.rfind('.'); dot != std::string::npos; dot = path.rfind('.')) {
    tree = Json{{path.substr(dot + 1), tree}};
    path = path.substr(0, dot);
  }
  merge(Json{{path, tree}});
}

Json RunConfig::to_json() const {
  Json j;
  j["mode"] = to_string(mode);
  j["preset"] = preset;
  j["d1"] = d1;
  j["d2"] = d2;
  j["K"] = K;
  j["rank"] = rank;
  j["n"] = n;
  j["n_seasons"] = n_seasons;
  j["n_cycles"] = n_cycles;
  j["omega_indexing"] = omega_indexing;
  j["activation"] = activation;
  j["beta"] = beta;
  j["omega_u"] = omega_u;
  j["transition_concentration"] = transition_concentration;
  j["identity_transition"] = identity_transition;
  j["diag_scale1"] = diag_scale1;
  j["diag_scale2"] = diag_scale2;
  j["centering"] = centering;
  j["lower_param"] = lower_param;
  j["center_data"] = center_data;
  j["gamma_shape"] = gamma_shape;
  j["hmc"] = hmc_json(hmc, n_chains);
  j["seed"] = seed;
  j["input"] = input;
  j["output_dir"] = output_dir;
  return j;
}

void RunConfig::validate() const {
  if (d1 < 1 || d2 < 1) throw ConfigError("d1, d2: must be positive");
  if (d1 < 2 && d2 < 2) throw ConfigError("d1, d2: at least one mode needs size >= 2");
  if (K < 1) throw ConfigError("K: must be positive");
  if (n < 0) throw ConfigError("n: must be non-negative");
  if (n_seasons < 1 || n_cycles < 1) throw ConfigError("n_seasons, n_cycles: must be positive");
  if (!is_dynamic(mode) && (n_seasons != 1 || n_cycles != 1)) {
    throw ConfigError("n_seasons, n_cycles: static modes use a single block");
  }
  parse_omega_indexing(omega_indexing);
  parse_centering(centering);
  parse_lower_param(lower_param);
  for (Index a : activation) {
    if (a < 0) throw ConfigError("activation: indices must be non-negative");
  }
  if (!activation.empty() && static_cast<Index>(activation.size()) != n_seasons) {
    throw ConfigError("activation: needs one entry per season");
  }
  if (!(gamma_shape > 0.0)) throw ConfigError("gamma_shape: must be positive");
  if (n_chains < 1) throw ConfigError("hmc.n_chains: must be positive");
  try {
    hmc.validate(hmc.mass.size());
  } catch (const ConfigError &e) {
    throw ConfigError(std::string("hmc: ") + e.what());
  }
  if (is_fit(mode)) {
    if (input.empty()) throw ConfigError("input: required for fit modes");
    if (n_cycles * n_seasons > 1 && !is_dynamic(mode)) {
      throw ConfigError("mode: several blocks need fit-dynamic");
    }
  } else {
    if (rank < 1) throw ConfigError("rank: must be positive");
    if (static_cast<Index>(omega_u.size()) != rank) {
      throw ConfigError("omega_u: needs rank = " + std::to_string(rank) + " entries");
    }
    double total = 0.0;
    for (double w : omega_u) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("omega_u: entries must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("omega_u: entries must not all be zero");
    if (!(beta >= 0.0)) throw ConfigError("beta: must be non-negative");
    if (static_cast<Index>(diag_scale1.size()) != d1) {
      throw ConfigError("diag_scale1: needs d1 = " + std::to_string(d1) + " entries, got " +
                        std::to_string(diag_scale1.size()));
    }
    if (static_cast<Index>(diag_scale2.size()) != d2) {
      throw ConfigError("diag_scale2: needs d2 = " + std::to_string(d2) + " entries, got " +
                        std::to_string(diag_scale2.size()));
    }
    for (double s : diag_scale1)
      if (!(s > 0.0)) throw ConfigError("diag_scale1: entries must be positive");
    for (double s : diag_scale2)
      if (!(s > 0.0)) throw ConfigError("diag_scale2: entries must be positive");
    if (is_dynamic(mode) && !identity_transition && !(transition_concentration > 0.0)) {
      throw ConfigError("transition_concentration: must be positive");
    }
  }
}

Vector RunConfig::omega_truth() const {
  Vector w(static_cast<Index>(omega_u.size()));
  for (Index i = 0; i < w.size(); ++i) w[i] = omega_u[static_cast<std::size_t>(i)];
  return w / w.sum();
}

}  // namespace sckpd
