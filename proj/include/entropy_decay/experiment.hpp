// Experiment orchestration: JSON configuration, the experiment commands
// (decay, periodic-decay, counterexample, pipeline, check-gn, lattice-cert),
// time-series assembly, rate fitting, and report/CSV/SVG emission.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropy_decay/flux.hpp"
#include "entropy_decay/grid.hpp"
#include "entropy_decay/lattice.hpp"
#include "entropy_decay/periodize.hpp"
#include "entropy_decay/solver.hpp"

#include <json.hpp>

namespace entropy_decay {

// Raised on malformed configuration; mapped to exit code 3 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InitialSpec {
  enum class Kind { kBox, kHat, kGaussian, kSine, kConstant, kCsv };
  Kind kind = Kind::kBox;
  double amplitude = 1.0;
  VecN lo = VecN::zero(2);      // box support corner / hat center lower corner
  VecN hi = VecN::zero(2);      // box support corner
  double sigma = 1.0;           // gaussian width
  double cutoff = 4.0;          // gaussian truncation radius in sigmas
  double frequency = 1.0;       // sine periods per unit length
  double mean = 0.0;            // sine offset
  std::string csv_path;
};

struct NormSpec {
  WindowShape window = WindowShape::ball(1.0);
  double stride = 0.0;  // 0 = cell-aligned scan
};

struct LatticeSpec {
  int R = 50;
  double delta = 1e-6;
  std::uint64_t seed = 1;
};

struct TimeSpec {
  double T = 10.0;
  std::vector<double> outputs;   // defaults to a uniform schedule
  bool series_every_step = false;
};

struct ExperimentConfig {
  FluxSpec flux;
  InitialSpec initial;
  SchemeConfig scheme;
  double h = 0.01;
  double domain_margin = 1.0;    // extra box padding beyond support + a*T
  TimeSpec time;
  NormSpec norm;
  LatticeSpec lattice;
  std::vector<double> r_schedule;
  double rate_fit_lo = 0.0, rate_fit_hi = 0.0;  // log-log window; 0,0 = none
  std::vector<double> thresholds_t;   // verdict: value(t) <= threshold
  std::vector<double> thresholds_v;
  std::string out_dir;
  bool emit_plots = true;
  bool emit_states = false;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
};

FluxSpec flux_from_json(const nlohmann::json& j);
nlohmann::json flux_to_json(const FluxSpec& phi);

// Build the initial data as a grid function; the box is auto-sized from the
// support, the flux speed bound, and the horizon.
GridFunction build_initial(const ExperimentConfig& cfg);

struct SeriesRow {
  double t = 0.0;
  std::optional<double> x_norm, l1_cell, mass, dev_plus, dev_minus;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms residual in log space
  int points = 0;
};

RateFit fit_rate_loglog(const std::vector<SeriesRow>& series, double t_lo,
                        double t_hi);

struct RunReport {
  nlohmann::json report;
  std::vector<SeriesRow> series;
  bool all_pass = true;
  int exit_code = 0;

  void write(const std::string& out_dir, bool plots,
             const std::string& name = "series") const;
};

RunReport cmd_decay(const ExperimentConfig& cfg);
RunReport cmd_periodic_decay(const ExperimentConfig& cfg);
RunReport cmd_counterexample(const ExperimentConfig& cfg);
RunReport cmd_pipeline(const ExperimentConfig& cfg);
RunReport cmd_check_gn(const ExperimentConfig& cfg);
RunReport cmd_lattice_cert(const ExperimentConfig& cfg);

// Deterministic CSV encoding: fixed column order t, x_norm, l1_cell, mass,
// dev_plus, dev_minus; absent values empty; %.17g round-trip formatting.
std::string series_to_csv(const std::vector<SeriesRow>& series);

// Minimal single-file SVG line plot (log-log when both ranges are positive).
std::string series_to_svg(const std::vector<SeriesRow>& series,
                          const std::string& title);

}  // namespace entropy_decay
