#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "radnav/dataset_io.hpp"
#include "radnav/evaluation.hpp"
#include "radnav/pipeline.hpp"
#include "radnav/run_config.hpp"
#include "radnav/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEstimation = 3;

int cmd_simulate(const std::string& scenario_path, uint64_t seed,
                 const std::string& output, const std::string& truth_path) {
  radnav::sim::Scenario scenario = radnav::scenario_from_file(scenario_path, seed);
  const radnav::sim::SimOutput sim = radnav::sim::generate(scenario);
  radnav::io::write_dataset(output, sim.imu, sim.radar, sim.gnss);
  if (!truth_path.empty()) {
    radnav::io::write_ground_truth(truth_path, sim.truth, scenario.origin);
  }
  std::cout << "wrote " << sim.imu.size() << " imu, " << sim.radar.size()
            << " radar, " << sim.gnss.size() << " gnss records to " << output
            << "\n";
  return kExitOk;
}

int cmd_fuse(const std::string& input, const std::string& config_path,
             const std::string& output, const std::string& diagnostics_path,
             const std::string& noise_model, bool no_radar, bool verbose) {
  radnav::RunConfig config = config_path.empty()
                                 ? radnav::RunConfig{}
                                 : radnav::RunConfig::from_file(config_path);
  if (!noise_model.empty()) config.backend.use_gmm = (noise_model == "gmm");
  if (no_radar) config.backend.enable_radar = false;
  const radnav::FusionResult result = radnav::run_fusion_file(input, config);
  radnav::io::write_trajectory(output, result.estimates, result.enu_origin);
  const auto& d = result.diagnostics;
  std::cout << "fused " << d.epochs << " epochs (" << result.estimates.size()
            << " states), tdcp " << d.tdcp_accepted << " accepted / "
            << d.tdcp_rejected << " rejected, radar " << d.radar_valid
            << " valid / " << d.radar_invalid << " rejected scans\n";
  if (!diagnostics_path.empty()) {
    std::ofstream out_file(diagnostics_path);
    if (!out_file) {
      throw radnav::io::DataError("cannot open " + diagnostics_path);
    }
    for (const auto& e : d.per_epoch) {
      nlohmann::json j{
          {"t", e.t},
          {"iterations", e.report.iterations},
          {"initial_cost", e.report.initial_cost},
          {"final_cost", e.report.final_cost},
          {"termination", e.report.termination},
          {"factors",
           {{"imu", e.counts.imu},
            {"radar_velocity", e.counts.radar_velocity},
            {"clock", e.counts.clock},
            {"pseudorange", e.counts.pseudorange},
            {"tdcp", e.counts.tdcp},
            {"prior", e.counts.prior}}},
          {"tdcp_accepted", e.tdcp_accepted},
          {"tdcp_rejected", e.tdcp_rejected}};
      if (e.gmm_active) {
        j["gmm"] = {{"weights", e.gmm.weights},
                    {"means", e.gmm.means},
                    {"variances", e.gmm.variances}};
      }
      out_file << j.dump() << "\n";
    }
  }
  if (verbose) {
    for (size_t i = 0; i < d.per_epoch.size(); ++i) {
      const auto& r = d.per_epoch[i].report;
      std::cout << "epoch " << i << ": " << r.iterations << " iters, cost "
                << r.initial_cost << " -> " << r.final_cost << " ("
                << r.termination << ")\n";
    }
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& estimate_path, const std::string& truth_path,
                 double max_dt, const std::string& format) {
  const auto estimate = radnav::io::read_trajectory(estimate_path);
  const auto truth = radnav::io::read_trajectory(truth_path);
  const auto m = radnav::eval::compare_trajectories(estimate, truth, max_dt);
  if (format == "json-lines") {
    const nlohmann::json j{
        {"mae", {m.mae.x(), m.mae.y(), m.mae.z()}},
        {"rmse", {m.rmse.x(), m.rmse.y(), m.rmse.z()}},
        {"rmse_2d", m.rmse_2d},
        {"rmse_3d", m.rmse_3d},
        {"attitude_rmse_deg", m.attitude_rmse_deg},
        {"matched", m.matched},
        {"overlap_fraction", m.overlap_fraction}};
    std::cout << j.dump() << "\n";
  } else {
    std::cout << radnav::eval::metrics_report(m);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radnav: GNSS/IMU/4D-radar sliding-window fusion"};
  app.require_subcommand(1);

  std::string scenario_path, dataset_path, truth_path, config_path, output_path;
  std::string estimate_path, diagnostics_path;
  std::string format = "text";
  std::string noise_model;
  uint64_t seed = 0;
  double max_dt = 0.01;
  bool verbose = false;
  bool no_radar = false;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--scenario", scenario_path, "scenario JSON")->required();
  sim->add_option("--seed", seed, "RNG seed override (0 keeps the scenario seed)");
  sim->add_option("--output", output_path, "dataset output path")->required();
  sim->add_option("--truth", truth_path, "ground-truth output path");

  auto* fuse = app.add_subcommand("fuse", "run the fusion pipeline");
  fuse->add_option("--input", dataset_path, "dataset JSON-lines file")->required();
  fuse->add_option("--config", config_path, "run configuration JSON");
  fuse->add_option("--output", output_path, "trajectory output path")->required();
  fuse->add_option("--diagnostics", diagnostics_path,
                   "per-epoch diagnostics output (JSON lines)");
  fuse->add_option("--noise-model", noise_model,
                   "override pseudorange noise model: gaussian | gmm")
      ->check(CLI::IsMember({"gaussian", "gmm"}));
  fuse->add_flag("--no-radar", no_radar, "disable the radar velocity factor");
  fuse->add_flag("--verbose", verbose, "per-epoch solver report");

  auto* eval = app.add_subcommand("evaluate", "compare a trajectory against truth");
  eval->add_option("--estimate", estimate_path, "estimated trajectory")->required();
  eval->add_option("--truth", truth_path, "ground-truth trajectory")->required();
  eval->add_option("--max-dt", max_dt, "association tolerance, s");
  eval->add_option("--format", format, "output format: text | json-lines")
      ->check(CLI::IsMember({"text", "json-lines"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(scenario_path, seed, output_path, truth_path);
    if (fuse->parsed())
      return cmd_fuse(dataset_path, config_path, output_path, diagnostics_path,
                      noise_model, no_radar, verbose);
    if (eval->parsed()) return cmd_evaluate(estimate_path, truth_path, max_dt, format);
  } catch (const radnav::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const radnav::io::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const radnav::EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitUsage;
}
