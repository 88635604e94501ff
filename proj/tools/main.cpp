#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "entropy_decay/experiment.hpp"
#include "entropy_decay/version.hpp"

namespace ed = entropy_decay;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double resolution_scale = 1.0;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("-c,--config", opts->config_path, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out-dir", opts->out_dir,
                  "output directory for report.json, series.csv and plots");
  cmd->add_option("--seed", opts->seed, "override the lattice seed")
      ->each([opts](const std::string&) { opts->seed_set = true; });
  cmd->add_option("--resolution-scale", opts->resolution_scale,
                  "divide the grid spacing h by this factor")
      ->check(CLI::PositiveNumber);
}

int run_command(const CommonOpts& opts,
                const std::function<ed::RunReport(const ed::ExperimentConfig&)>& fn) {
  ed::ExperimentConfig cfg = ed::ExperimentConfig::from_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.seed_set) cfg.lattice.seed = opts.seed;
  if (opts.resolution_scale != 1.0) cfg.h /= opts.resolution_scale;
  ed::RunReport rep = fn(cfg);
  std::cout << rep.report.dump(2) << "\n";
  rep.write(cfg.out_dir, cfg.emit_plots);
  return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decay experiments for scalar conservation laws with continuous flux"};
  app.set_version_flag("--version", ed::kVersion);
  app.require_subcommand(1);

  struct Verb {
    const char* name;
    const char* help;
    ed::RunReport (*fn)(const ed::ExperimentConfig&);
  };
  const Verb verbs[] = {
      {"check-gn", "report the genuine-nonlinearity verdict for the flux", ed::cmd_check_gn},
      {"lattice-cert", "draw an avoiding lattice and print its certificate",
       ed::cmd_lattice_cert},
      {"decay", "evolve localized data and track the sliding-window norm", ed::cmd_decay},
      {"periodic-decay", "evolve periodic data on the torus and track decay to the mean",
       ed::cmd_periodic_decay},
      {"counterexample", "exact traveling-wave evolution for a flux with an affine plateau",
       ed::cmd_counterexample},
      {"pipeline", "full chain: certificate, lattice, envelopes, sandwich runs, tail bound",
       ed::cmd_pipeline},
  };

  CommonOpts opts;
  const Verb* selected = nullptr;
  for (const auto& v : verbs) {
    CLI::App* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, &opts);
    cmd->callback([&selected, &v]() { selected = &v; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return run_command(opts, selected->fn);
  } catch (const ed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ed::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
