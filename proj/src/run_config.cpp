#include "radnav/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace radnav {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

Vec3 vec_from(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

geodesy::GeodeticPoint origin_from(const json& j) {
  check_keys(j, {"lat_deg", "lon_deg", "height"}, "enu_origin");
  return geodesy::GeodeticPoint(double(j.at("lat_deg")) * M_PI / 180.0,
                                double(j.at("lon_deg")) * M_PI / 180.0,
                                j.at("height"));
}

}  // namespace

Mat3 RunConfig::radar_rotation() const {
  const Vec3 rpy = radar_rotation_rpy_deg * M_PI / 180.0;
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig c;
  check_keys(j,
             {"frames", "imu_noise", "thresholds", "sigmas", "window_size",
              "optimizer", "ablation", "doppler_sign", "gmm", "gravity"},
             "config root");

  if (j.contains("frames")) {
    const auto& f = j["frames"];
    check_keys(f, {"lever_arm_gnss", "radar_rotation_rpy_deg", "enu_origin"}, "frames");
    if (f.contains("lever_arm_gnss")) c.lever_arm_gnss = vec_from(f["lever_arm_gnss"]);
    if (f.contains("radar_rotation_rpy_deg"))
      c.radar_rotation_rpy_deg = vec_from(f["radar_rotation_rpy_deg"]);
    if (f.contains("enu_origin")) {
      if (f["enu_origin"].is_string()) {
        if (f["enu_origin"] != "auto")
          throw ConfigError("frames.enu_origin must be \"auto\" or an object");
      } else {
        c.enu_origin = origin_from(f["enu_origin"]);
      }
    }
  }
  if (j.contains("imu_noise")) {
    const auto& n = j["imu_noise"];
    check_keys(n, {"sigma_accel", "sigma_gyro", "sigma_accel_bias", "sigma_gyro_bias"},
               "imu_noise");
    if (n.contains("sigma_accel")) c.imu_noise.sigma_accel = n["sigma_accel"];
    if (n.contains("sigma_gyro")) c.imu_noise.sigma_gyro = n["sigma_gyro"];
    if (n.contains("sigma_accel_bias"))
      c.imu_noise.sigma_accel_bias = n["sigma_accel_bias"];
    if (n.contains("sigma_gyro_bias")) c.imu_noise.sigma_gyro_bias = n["sigma_gyro_bias"];
  }
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    check_keys(t, {"elevation_mask_deg", "cycle_slip_m", "ransac"}, "thresholds");
    if (t.contains("elevation_mask_deg"))
      c.elevation_mask = double(t["elevation_mask_deg"]) * M_PI / 180.0;
    if (t.contains("cycle_slip_m")) c.cycle_slip_threshold = t["cycle_slip_m"];
    if (t.contains("ransac")) {
      const auto& r = t["ransac"];
      check_keys(r,
                 {"min_points", "iterations", "inlier_threshold",
                  "min_consensus_fraction", "seed"},
                 "thresholds.ransac");
      if (r.contains("min_points")) c.ransac.min_points = r["min_points"];
      if (r.contains("iterations")) c.ransac.iterations = r["iterations"];
      if (r.contains("inlier_threshold")) c.ransac.inlier_threshold = r["inlier_threshold"];
      if (r.contains("min_consensus_fraction"))
        c.ransac.min_consensus_fraction = r["min_consensus_fraction"];
      if (r.contains("seed")) c.ransac.seed = r["seed"];
    }
  }
  if (j.contains("sigmas")) {
    const auto& s = j["sigmas"];
    check_keys(s,
               {"tdcp_m", "pseudorange_m", "clock_bias_m", "clock_drift_mps",
                "radar_velocity_mps"},
               "sigmas");
    if (s.contains("tdcp_m")) c.backend.sigma_tdcp = s["tdcp_m"];
    if (s.contains("pseudorange_m")) c.backend.sigma_pseudorange = s["pseudorange_m"];
    if (s.contains("clock_bias_m")) c.backend.sigma_clock_bias = s["clock_bias_m"];
    if (s.contains("clock_drift_mps")) c.backend.sigma_clock_drift = s["clock_drift_mps"];
    if (s.contains("radar_velocity_mps")) c.sigma_radar_velocity = s["radar_velocity_mps"];
  }
  if (j.contains("window_size")) c.backend.window_size = j["window_size"];
  if (j.contains("gravity")) c.backend.gravity = vec_from(j["gravity"]);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, {"max_iterations", "gradient_tol", "step_tol", "initial_lambda"},
               "optimizer");
    if (o.contains("max_iterations"))
      c.backend.optimizer.max_iterations = o["max_iterations"];
    if (o.contains("gradient_tol")) c.backend.optimizer.gradient_tol = o["gradient_tol"];
    if (o.contains("step_tol")) c.backend.optimizer.step_tol = o["step_tol"];
    if (o.contains("initial_lambda"))
      c.backend.optimizer.initial_lambda = o["initial_lambda"];
  }
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    check_keys(a, {"enable_radar", "enable_tdcp", "noise_model"}, "ablation");
    if (a.contains("enable_radar")) c.backend.enable_radar = a["enable_radar"];
    if (a.contains("enable_tdcp")) c.backend.enable_tdcp = a["enable_tdcp"];
    if (a.contains("noise_model")) {
      const std::string m = a["noise_model"];
      if (m == "gaussian") c.backend.use_gmm = false;
      else if (m == "gmm") c.backend.use_gmm = true;
      else throw ConfigError("ablation.noise_model must be 'gaussian' or 'gmm'");
    }
  }
  if (j.contains("doppler_sign")) {
    c.doppler_sign = j["doppler_sign"];
    if (c.doppler_sign != 1.0 && c.doppler_sign != -1.0)
      throw ConfigError("doppler_sign must be +1 or -1");
  }
  if (j.contains("gmm")) {
    const auto& g = j["gmm"];
    check_keys(g, {"window", "min_residuals"}, "gmm");
    if (g.contains("window")) c.gmm_window = g["window"];
    if (g.contains("min_residuals")) c.gmm_min_residuals = g["min_residuals"];
  }
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

sim::Scenario scenario_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario parse error: ") + e.what());
  }
  sim::Scenario s;
  check_keys(j,
             {"trajectory", "duration", "rates", "noise", "faults", "constellation",
              "origin", "clock", "frames", "radar", "seed", "doppler_sign"},
             "scenario root");
  if (j.contains("trajectory")) {
    const auto& t = j["trajectory"];
    check_keys(t,
               {"type", "speed", "radius", "amplitude_east", "amplitude_north",
                "period", "yaw0_deg"},
               "trajectory");
    const std::string type = t.value("type", "figure8");
    if (type == "static") s.trajectory.type = sim::TrajectoryType::kStatic;
    else if (type == "straight") s.trajectory.type = sim::TrajectoryType::kStraight;
    else if (type == "circle") s.trajectory.type = sim::TrajectoryType::kCircle;
    else if (type == "figure8") s.trajectory.type = sim::TrajectoryType::kFigureEight;
    else throw ConfigError("trajectory.type: unknown value '" + type + "'");
    if (t.contains("speed")) s.trajectory.speed = t["speed"];
    if (t.contains("radius")) s.trajectory.radius = t["radius"];
    if (t.contains("amplitude_east")) s.trajectory.amplitude_east = t["amplitude_east"];
    if (t.contains("amplitude_north"))
      s.trajectory.amplitude_north = t["amplitude_north"];
    if (t.contains("period")) s.trajectory.period = t["period"];
    if (t.contains("yaw0_deg")) s.trajectory.yaw0 = double(t["yaw0_deg"]) * M_PI / 180.0;
  }
  if (j.contains("duration")) s.duration = j["duration"];
  if (j.contains("rates")) {
    const auto& r = j["rates"];
    check_keys(r, {"imu_hz", "radar_hz", "gnss_hz"}, "rates");
    if (r.contains("imu_hz")) s.imu_hz = r["imu_hz"];
    if (r.contains("radar_hz")) s.radar_hz = r["radar_hz"];
    if (r.contains("gnss_hz")) s.gnss_hz = r["gnss_hz"];
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    check_keys(n, {"accel", "gyro", "pseudorange", "phase", "doppler", "radar_doppler"},
               "noise");
    if (n.contains("accel")) s.noise.accel = n["accel"];
    if (n.contains("gyro")) s.noise.gyro = n["gyro"];
    if (n.contains("pseudorange")) s.noise.pseudorange = n["pseudorange"];
    if (n.contains("phase")) s.noise.phase = n["phase"];
    if (n.contains("doppler")) s.noise.doppler = n["doppler"];
    if (n.contains("radar_doppler")) s.noise.radar_doppler = n["radar_doppler"];
  }
  if (j.contains("faults")) {
    const auto& f = j["faults"];
    check_keys(f,
               {"multipath", "cycle_slips", "gnss_outages", "radar_outlier_fraction"},
               "faults");
    if (f.contains("multipath")) {
      for (const auto& m : f["multipath"]) {
        check_keys(m, {"sat_id", "t_start", "t_end", "bias"}, "faults.multipath[]");
        s.multipath.push_back({m.at("sat_id"), m.at("t_start"), m.at("t_end"),
                               m.value("bias", 10.0)});
      }
    }
    if (f.contains("cycle_slips")) {
      for (const auto& m : f["cycle_slips"]) {
        check_keys(m, {"sat_id", "t", "cycles"}, "faults.cycle_slips[]");
        s.cycle_slips.push_back({m.at("sat_id"), m.at("t"), m.at("cycles")});
      }
    }
    if (f.contains("gnss_outages")) {
      for (const auto& m : f["gnss_outages"]) {
        check_keys(m, {"t_start", "t_end"}, "faults.gnss_outages[]");
        s.gnss_outages.push_back({m.at("t_start"), m.at("t_end")});
      }
    }
    if (f.contains("radar_outlier_fraction"))
      s.radar_outlier_fraction = f["radar_outlier_fraction"];
  }
  if (j.contains("constellation")) {
    const auto& cst = j["constellation"];
    check_keys(cst, {"count", "orbit_radius"}, "constellation");
    if (cst.contains("count")) s.satellite_count = cst["count"];
    if (cst.contains("orbit_radius")) s.orbit_radius = cst["orbit_radius"];
  }
  if (j.contains("origin")) s.origin = origin_from(j["origin"]);
  if (j.contains("clock")) {
    const auto& cl = j["clock"];
    check_keys(cl, {"bias0", "drift"}, "clock");
    if (cl.contains("bias0")) s.clock_bias0 = cl["bias0"];
    if (cl.contains("drift")) s.clock_drift = cl["drift"];
  }
  if (j.contains("frames")) {
    const auto& f = j["frames"];
    check_keys(f, {"lever_arm_gnss"}, "scenario frames");
    if (f.contains("lever_arm_gnss")) s.lever_arm = vec_from(f["lever_arm_gnss"]);
  }
  if (j.contains("radar")) {
    const auto& r = j["radar"];
    check_keys(r, {"points_per_scan", "outlier_min_offset", "outlier_max_offset"},
               "radar");
    if (r.contains("points_per_scan")) s.radar_points_per_scan = r["points_per_scan"];
    if (r.contains("outlier_min_offset"))
      s.radar_outlier_min_offset = r["outlier_min_offset"];
    if (r.contains("outlier_max_offset"))
      s.radar_outlier_max_offset = r["outlier_max_offset"];
  }
  if (j.contains("doppler_sign")) s.doppler_sign = j["doppler_sign"];
  if (j.contains("seed")) s.seed = j["seed"];
  return s;
}

sim::Scenario scenario_from_file(const std::string& path, uint64_t seed_override) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  sim::Scenario s = scenario_from_json_text(ss.str());
  if (seed_override != 0) s.seed = seed_override;
  return s;
}

}  // namespace radnav
