#include "sckpd/config.hpp"
#include "sckpd/dataset.hpp"
#include "sckpd/fit.hpp"
#include "sckpd/simulate.hpp"
#include "sckpd/summary.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

using namespace sckpd;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string output_dir;
  std::string input;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App *cmd, CommonOptions &o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration");
  cmd->add_option("-p,--preset", o.preset, "paper-static, paper-separable or paper-dynamic");
  cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
  cmd->add_option("-i,--input", o.input, "observation CSV");
  cmd->add_option("--set", o.overrides, "override a config key, e.g. hmc.n_draws=500");
  cmd->add_option_function<std::uint64_t>(
      "-s,--seed",
      [&o](const std::uint64_t &s) {
        o.seed = s;
        o.seed_set = true;
      },
      "random seed");
}

RunConfig resolve(const CommonOptions &o, bool fit) {
  RunConfig cfg;
  cfg.mode = fit ? RunMode::FitStatic : RunMode::SimulateStatic;
  if (!o.config_path.empty()) {
    cfg.merge(read_json(o.config_path));
  }
  if (!o.preset.empty()) cfg.merge(Json{{"preset", o.preset}});
  for (const auto &s : o.overrides) cfg.set_override(s);
  if (o.seed_set) cfg.seed = o.seed;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.input.empty()) cfg.input = o.input;
  const bool dynamic = is_dynamic(cfg.mode);
  if (fit) cfg.mode = dynamic ? RunMode::FitDynamic : RunMode::FitStatic;
  else cfg.mode = dynamic ? RunMode::SimulateDynamic : RunMode::SimulateStatic;
  cfg.validate();
  return cfg;
}

int emit_error(const std::string &kind, const std::string &message, std::size_t line = 0) {
  Json e{{"error", kind}, {"message", message}};
  if (line > 0) e["line"] = line;
  std::cerr << e.dump() << std::endl;
  return 2;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse Kronecker-structured precision models: simulate, fit and summarise"};
  app.require_subcommand(1);

  CommonOptions sim_opts, fit_opts, hyper_opts;
  CLI::App *sim = app.add_subcommand("simulate", "draw a synthetic dataset and its ground truth");
  add_common(sim, sim_opts);
  CLI::App *fitc = app.add_subcommand("fit", "run HMC on a dataset and summarise the posterior");
  add_common(fitc, fit_opts);

  std::string draws_path, summary_out;
  Index n_seasons = 1;
  CLI::App *summ = app.add_subcommand("summarize", "recompute a summary from a draws CSV");
  summ->add_option("draws", draws_path, "draws.csv written by fit")->required();
  summ->add_option("--n-seasons", n_seasons, "seasons per cycle for blocked draws");
  summ->add_option("-o,--output", summary_out, "write the summary here instead of stdout");

  CLI::App *hyper = app.add_subcommand("check-hyper", "print prior targets and solved hyperparameters");
  add_common(hyper, hyper_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return emit_error("usage_error", e.what());
  }

  try {
    if (*sim) {
      const RunConfig cfg = resolve(sim_opts, false);
      const Simulation s = simulate(cfg);
      write_simulation(s, cfg.output_dir);
      write_json((std::filesystem::path(cfg.output_dir) / "config.json").string(), cfg.to_json());
      std::cout << Json{{"status", "ok"},
                        {"output_dir", cfg.output_dir},
                        {"observations", s.data.n()}}
                       .dump()
                << std::endl;
    } else if (*fitc) {
      const RunConfig cfg = resolve(fit_opts, true);
      Dataset data = read_dataset_csv(cfg.input, cfg.d1, cfg.d2);
      const FitResult r = fit(cfg, std::move(data));
      write_fit(r, cfg.output_dir);
      std::cout << Json{{"status", "ok"},
                        {"output_dir", cfg.output_dir},
                        {"acceptance_rate", r.diagnostics.acceptance_rate},
                        {"n_divergent", r.diagnostics.n_divergent},
                        {"max_derived_rhat", r.summary["max_derived_rhat"]}}
                       .dump()
                << std::endl;
    } else if (*summ) {
      const Json s = summarize_draws(DrawTable::read(draws_path), n_seasons);
      if (summary_out.empty()) std::cout << s.dump(2) << std::endl;
      else write_json(summary_out, s);
    } else if (*hyper) {
      RunConfig cfg = resolve(hyper_opts, true);
      Dataset data = read_dataset_csv(cfg.input, cfg.d1, cfg.d2);
      if (cfg.center_data) data.center();
      const Matrix first = data.blocked() ? data.block(0, 0) : data.obs;
      const auto [t, h] = center_prior(first, cfg.d1, cfg.d2, parse_centering(cfg.centering));
      std::cout << Json{{"targets", to_json(t)}, {"hyper", to_json(h)}, {"centering", cfg.centering}}
                       .dump(2)
                << std::endl;
    }
  } catch (const ParseError &e) {
    return emit_error(e.kind(), e.what(), e.line);
  } catch (const Error &e) {
    return emit_error(e.kind(), e.what());
  } catch (const std::exception &e) {
    return emit_error("internal_error", e.what());
  }
  return 0;
}
