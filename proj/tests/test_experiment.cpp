#include "entropy_decay/experiment.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace entropy_decay;
using nlohmann::json;

namespace {

json burgers_config(double T = 0.5) {
  return json{
      {"flux",
       {{"dim", 1},
        {"u_range", {-2.0, 2.0}},
        {"components",
         json::array({{{"type", "power"}, {"coeff", 0.5}, {"exponent", 2}, {"parity", "even"}}})}}},
      {"initial", {{"kind", "box"}, {"amplitude", 1.0}, {"lo", {0.0}}, {"hi", {1.0}}}},
      {"scheme", {{"flux", "engquist-osher"}}},
      {"h", 0.05},
      {"time", {{"T", T}}},
  };
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* tag) {
    path = std::filesystem::temp_directory_path() /
           (std::string("ed_test_") + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("config parses, validates and round-trips") {
  ExperimentConfig cfg = ExperimentConfig::from_json(burgers_config());
  CHECK(cfg.flux.dim == 1);
  CHECK(cfg.h == 0.05);
  CHECK(cfg.time.T == 0.5);
  CHECK(cfg.scheme.flux == NumericalFlux::kEngquistOsher);

  json once = cfg.to_json();
  ExperimentConfig cfg2 = ExperimentConfig::from_json(once);
  CHECK(cfg2.to_json() == once);

  SUBCASE("missing flux fails") {
    json j = burgers_config();
    j.erase("flux");
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("asymmetric range fails") {
    json j = burgers_config();
    j["flux"]["u_range"] = {-1.0, 2.0};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("unknown scheme fails") {
    json j = burgers_config();
    j["scheme"]["flux"] = "upwind";
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("bad threshold shape fails") {
    json j = burgers_config();
    j["thresholds"] = {{1.0}};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("negative h fails") {
    json j = burgers_config();
    j["h"] = -0.1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
  }
  SUBCASE("full option surface round-trips") {
    json j = burgers_config();
    j["norm"] = {{"window", {{"kind", "box"}, {"lo", {-1.5}}, {"hi", {1.5}}}}, {"stride", 0.01}};
    j["lattice"] = {{"R", 40}, {"delta", 1e-5}, {"seed", 9}};
    j["r_schedule"] = {2.0, 4.0};
    j["rate_fit"] = {1.0, 5.0};
    j["thresholds"] = {{0.5, 2.0}};
    j["emit_plots"] = false;
    j["emit_states"] = true;
    ExperimentConfig c = ExperimentConfig::from_json(j);
    CHECK(c.norm.window.kind == WindowShape::Kind::kBox);
    CHECK(c.lattice.R == 40);
    CHECK(c.r_schedule.size() == 2);
    json round = c.to_json();
    CHECK(ExperimentConfig::from_json(round).to_json() == round);
  }
}

TEST_CASE("flux json grammar failures raise config errors") {
  CHECK_THROWS_AS(flux_from_json(json{{"dim", 3}}), ConfigError);
  CHECK_THROWS_AS(flux_from_json(json{{"dim", 1}, {"u_range", {-1, 1}}}), ConfigError);
  json bad_parity = burgers_config()["flux"];
  bad_parity["components"][0]["parity"] = "weird";
  CHECK_THROWS_AS(flux_from_json(bad_parity), ConfigError);
  json low_exp = burgers_config()["flux"];
  low_exp["components"][0]["exponent"] = 0.5;
  CHECK_THROWS_AS(flux_from_json(low_exp), ConfigError);

  json dyadic = {{"dim", 1},
                 {"u_range", {-1, 1}},
                 {"components", json::array({{{"type", "dyadic"}, {"k_max", 6}}})}};
  FluxSpec d = flux_from_json(dyadic);
  CHECK(flux_to_json(d)["components"][0]["type"] == "dyadic");
}

TEST_CASE("initial shapes fill the padded domain") {
  json j = burgers_config(1.0);
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  GridFunction g = build_initial(cfg);
  // Padding: tabulated top speed is 1, T=1, margin 1 => at least 2 on each side.
  CHECK(g.origin[0] <= -2.0 + 1e-9);
  CHECK(g.origin[0] + g.extents[0] * g.h >= 3.0 - 1e-9);
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.max_abs() == 1.0);

  SUBCASE("hat") {
    j["initial"]["kind"] = "hat";
    GridFunction hat = build_initial(ExperimentConfig::from_json(j));
    CHECK(hat.mass() == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(hat.max_abs() <= 1.0);
  }
  SUBCASE("gaussian") {
    j["initial"] = {{"kind", "gaussian"}, {"amplitude", 1.0}, {"lo", {-0.5}},
                    {"hi", {0.5}},        {"sigma", 0.25},    {"cutoff", 4.0}};
    GridFunction gau = build_initial(ExperimentConfig::from_json(j));
    CHECK(gau.mass() == doctest::Approx(0.25 * std::sqrt(2.0 * M_PI)).epsilon(1e-3));
  }
  SUBCASE("sine windowed to its box") {
    j["initial"] = {{"kind", "sine"}, {"amplitude", 0.5}, {"lo", {0.0}},
                    {"hi", {1.0}},    {"frequency", 1.0}, {"mean", 0.0}};
    GridFunction s = build_initial(ExperimentConfig::from_json(j));
    CHECK(std::abs(s.mass()) <= 1e-9);
    CHECK(s.max_abs() <= 0.5 + 1e-12);
  }
  SUBCASE("range violation is caught") {
    j["initial"]["amplitude"] = 5.0;
    CHECK_THROWS_AS(build_initial(ExperimentConfig::from_json(j)), ConfigError);
  }
}

TEST_CASE("csv initial data round-trips through a file") {
  TempDir tmp("csv");
  std::filesystem::path p = tmp.path / "init.csv";
  {
    std::ofstream out(p);
    out << "x,value\n";
    for (int i = 0; i < 20; ++i) out << 0.05 * i + 0.025 << "," << (i >= 5 && i < 15 ? 0.5 : 0.0) << "\n";
  }
  json j = burgers_config(0.5);
  j["initial"] = {{"kind", "csv"}, {"csv_path", p.string()}};
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  GridFunction g = build_initial(cfg);
  CHECK(g.h == doctest::Approx(0.05));
  CHECK(g.mass() == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(g.max_abs() == doctest::Approx(0.5));
}

TEST_CASE("rate fit recovers a synthetic power law") {
  std::vector<SeriesRow> series;
  for (int i = 1; i <= 40; ++i) {
    SeriesRow r;
    r.t = 0.5 * i;
    r.x_norm = 3.0 * std::pow(r.t, -0.5);
    series.push_back(r);
  }
  RateFit fit = fit_rate_loglog(series, 1.0, 20.0);
  CHECK(fit.slope == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.residual <= 1e-12);
  CHECK(fit.points == 39);
  RateFit empty = fit_rate_loglog(series, 100.0, 200.0);
  CHECK(empty.points == 0);
}

TEST_CASE("series csv layout") {
  std::vector<SeriesRow> series(2);
  series[0].t = 0.0;
  series[0].x_norm = 1.5;
  series[0].mass = 0.5;
  series[1].t = 0.25;
  series[1].l1_cell = 0.125;
  std::string csv = series_to_csv(series);
  CHECK(csv.find("t,x_norm,l1_cell,mass,dev_plus,dev_minus\n") == 0);
  CHECK(csv.find("\n0,1.5,,0.5,,\n") != std::string::npos);
  CHECK(csv.find("\n0.25,,0.125,,,\n") != std::string::npos);
}

TEST_CASE("command smoke runs") {
  SUBCASE("check-gn verdict on both outcomes") {
    ExperimentConfig cfg = ExperimentConfig::from_json(burgers_config());
    RunReport rep = cmd_check_gn(cfg);
    CHECK(rep.all_pass);
    CHECK(rep.exit_code == 0);
    CHECK(rep.report["gn"]["holds"] == true);

    json affine = burgers_config();
    affine["flux"]["components"] = json::array({{{"type", "affine"}, {"slope", 2.0}}});
    RunReport rep2 = cmd_check_gn(ExperimentConfig::from_json(affine));
    CHECK_FALSE(rep2.all_pass);
    CHECK(rep2.exit_code == 2);
    CHECK(rep2.report["gn"]["witness"]["slope"][0] == 2.0);
  }

  SUBCASE("decay emits a series and passes sane thresholds") {
    json j = burgers_config(1.0);
    j["thresholds"] = {{1.0, 2.0}};
    RunReport rep = cmd_decay(ExperimentConfig::from_json(j));
    CHECK(rep.all_pass);
    REQUIRE(rep.series.size() >= 2);
    CHECK(rep.series.front().t == 0.0);
    CHECK(*rep.series.front().x_norm <= 1.0 + 1e-12);
    CHECK(rep.report["verdicts"]["pass"] == true);

    j["thresholds"] = {{1.0, 1e-6}};
    RunReport fail = cmd_decay(ExperimentConfig::from_json(j));
    CHECK_FALSE(fail.all_pass);
    CHECK(fail.exit_code == 2);
  }

  SUBCASE("decay refuses a degenerate flux with guidance") {
    json j = burgers_config();
    j["flux"]["components"] = json::array({{{"type", "affine"}, {"slope", 1.0}}});
    RunReport rep = cmd_decay(ExperimentConfig::from_json(j));
    CHECK_FALSE(rep.all_pass);
    CHECK(rep.exit_code == 2);
    CHECK(rep.report.contains("error"));
  }

  SUBCASE("counterexample on an affine flux is exact") {
    json j = burgers_config(2.0);
    j["flux"]["components"] = json::array({{{"type", "affine"}, {"slope", 2.0}}});
    j["initial"]["amplitude"] = 0.5;
    j["norm"] = {{"stride", 0.0125}};
    RunReport rep = cmd_counterexample(ExperimentConfig::from_json(j));
    CHECK(rep.all_pass);
    CHECK(rep.report["verdicts"]["x_norm_constant"] == true);
    CHECK(rep.report["verdicts"]["unit_ball_l1_zero_after_t1"] == true);

    // And it refuses genuinely nonlinear fluxes.
    RunReport refuse = cmd_counterexample(ExperimentConfig::from_json(burgers_config()));
    CHECK_FALSE(refuse.all_pass);
    CHECK(refuse.report.contains("error"));
  }

  SUBCASE("periodic decay conserves the mean") {
    json j = burgers_config(0.5);
    j["initial"] = {{"kind", "sine"}, {"amplitude", 1.0}, {"frequency", 1.0}, {"mean", 0.0}};
    j["h"] = 1.0 / 128;
    RunReport rep = cmd_periodic_decay(ExperimentConfig::from_json(j));
    CHECK(rep.all_pass);
    CHECK(rep.report["verdicts"]["mean_conserved"] == true);
    CHECK(rep.report["torus"]["cells_per_axis"] == 128);
    CHECK(rep.report["ndp"]["ok"] == true);
  }

  SUBCASE("pipeline runs the full chain on a tiny instance") {
    json j = burgers_config(1.0);
    j["h"] = 1.0 / 32;
    j["r_schedule"] = {4.0};
    j["time"]["outputs"] = {0.5, 1.0};
    RunReport rep = cmd_pipeline(ExperimentConfig::from_json(j));
    CHECK(rep.all_pass);
    REQUIRE(rep.report["stages"].size() == 1);
    const json& st = rep.report["stages"][0];
    CHECK(st["pass"] == true);
    CHECK(st["sandwich"]["ok"] == true);
    CHECK(st["tail_bound"]["ok"] == true);
    CHECK(st["B_plus"].get<double>() == doctest::Approx(0.25));
  }
}

TEST_CASE("reports and artifacts land in the output directory") {
  TempDir tmp("report");
  json j = burgers_config(0.5);
  j["out_dir"] = (tmp.path / "out").string();
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  RunReport rep = cmd_decay(cfg);
  rep.write(cfg.out_dir, cfg.emit_plots);

  std::ifstream rj(tmp.path / "out" / "report.json");
  REQUIRE(rj.good());
  json parsed;
  rj >> parsed;
  CHECK(parsed["command"] == "decay");
  CHECK(parsed["all_pass"] == true);
  CHECK(parsed["schema_version"] == 1);

  std::ifstream sc(tmp.path / "out" / "series.csv");
  REQUIRE(sc.good());
  std::string header;
  std::getline(sc, header);
  CHECK(header == "t,x_norm,l1_cell,mass,dev_plus,dev_minus");

  CHECK(std::filesystem::exists(tmp.path / "out" / "plots" / "series.svg"));
}
