#pragma once

// Run configuration for the batch harness: a JSON tree with optional preset,
// overlaid by explicit keys and then by command-line overrides.

#include "sckpd/common.hpp"
#include "sckpd/hmc.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sckpd {

using Json = nlohmann::ordered_json;

enum class RunMode { SimulateStatic, SimulateDynamic, FitStatic, FitDynamic };

RunMode parse_run_mode(const std::string &name);
std::string to_string(RunMode m);
bool is_dynamic(RunMode m);
bool is_fit(RunMode m);

struct RunConfig {
  RunMode mode = RunMode::SimulateStatic;
  std::string preset;
  Index d1 = 4;
  Index d2 = 5;
  Index K = 5;     // fitted components
  Index rank = 5;  // simulated components
  Index n = 500;   // observations per block
  Index n_seasons = 1;
  Index n_cycles = 1;
  std::string omega_indexing = "sequential";
  std::vector<Index> activation;
  double beta = 2.0;
  std::vector<double> omega_u{1, 4, 6, 7, 9};  // normalised on use
  double transition_concentration = 0.05;
  bool identity_transition = false;
  std::vector<double> diag_scale1{1.0, 0.4, 0.3, 0.2};
  std::vector<double> diag_scale2{0.75, 1.0, 0.2, 0.3, 0.1};
  std::string centering = "covariance";
  std::string lower_param = "standardized";
  bool center_data = false;
  double gamma_shape = 1.0;
  HMCConfig hmc;
  int n_chains = 4;
  std::uint64_t seed = 1;
  std::string input;
  std::string output_dir = "out";

  // Defaults, then the preset named in j (if any), then every other key of j.
  static RunConfig from_json(const Json &j);
  static RunConfig from_file(const std::string &path);

  // Overlays the keys of j onto this config; a "preset" key resets first.
  void merge(const Json &j);
  // Applies "dotted.key=value" where value parses as JSON or else a string.
  void set_override(const std::string &assignment);
  void apply_preset(const std::string &name);

  Json to_json() const;

  // Throws ConfigError naming the first offending field.
  void validate() const;

  Vector omega_truth() const;
};

}  // namespace sckpd
