#pragma once

#include <optional>
#include <string>

#include "radnav/geodesy.hpp"
#include "radnav/graph_backend.hpp"
#include "radnav/imu_preintegration.hpp"
#include "radnav/radar_ego_velocity.hpp"
#include "radnav/simulator.hpp"

namespace radnav {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Full run configuration for the fusion pipeline. The schema is strict:
// unknown keys are rejected.
struct RunConfig {
  // frames
  Vec3 lever_arm_gnss = Vec3(0.3, 0.0, 1.2);
  Vec3 radar_rotation_rpy_deg = Vec3::Zero();  // body <- radar
  std::optional<geodesy::GeodeticPoint> enu_origin;  // nullopt -> first fix

  ImuNoiseParams imu_noise;
  RansacConfig ransac;
  BackendConfig backend;

  double elevation_mask = 15.0 * M_PI / 180.0;  // rad
  double cycle_slip_threshold = 0.05;           // m
  double doppler_sign = 1.0;
  double sigma_radar_velocity = 0.15;  // m/s, per-sample

  int gmm_window = 200;
  int gmm_min_residuals = 30;

  Mat3 radar_rotation() const;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
};

// Scenario spec for the simulator CLI, parsed from JSON (strict schema).
sim::Scenario scenario_from_file(const std::string& path, uint64_t seed_override);
sim::Scenario scenario_from_json_text(const std::string& text);

}  // namespace radnav
