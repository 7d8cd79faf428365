#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radnav/geodesy.hpp"
#include "radnav/gnss_models.hpp"
#include "radnav/imu_preintegration.hpp"
#include "radnav/nav_state.hpp"
#include "radnav/radar_ego_velocity.hpp"

namespace radnav::sim {

enum class TrajectoryType { kStatic, kStraight, kCircle, kFigureEight };

struct TrajectorySpec {
  TrajectoryType type = TrajectoryType::kFigureEight;
  double speed = 5.0;        // straight/circle, m/s
  double radius = 50.0;      // circle, m
  double amplitude_east = 120.0;   // figure-eight
  double amplitude_north = 60.0;
  double period = 60.0;            // figure-eight loop period, s
  double yaw0 = 0.0;               // static/straight heading
};

struct NoiseSpec {
  double accel = 0.0;          // m/s^2 per sample
  double gyro = 0.0;           // rad/s per sample
  double pseudorange = 0.0;    // m
  double phase = 0.0;          // m
  double doppler = 0.0;        // Hz
  double radar_doppler = 0.0;  // m/s
};

struct MultipathFault {
  int sat_id = 0;
  double t_start = 0.0, t_end = 0.0;
  double bias = 10.0;  // m
};

struct CycleSlipFault {
  int sat_id = 0;
  double t = 0.0;
  int cycles = 0;
};

struct OutageWindow {
  double t_start = 0.0, t_end = 0.0;
};

struct Scenario {
  TrajectorySpec trajectory;
  double duration = 120.0;
  double imu_hz = 100.0;
  double radar_hz = 15.0;
  double gnss_hz = 1.0;
  NoiseSpec noise;
  std::vector<MultipathFault> multipath;
  std::vector<CycleSlipFault> cycle_slips;
  std::vector<OutageWindow> gnss_outages;
  double radar_outlier_fraction = 0.0;
  double radar_outlier_min_offset = 2.0;  // m/s
  double radar_outlier_max_offset = 5.0;
  int radar_points_per_scan = 40;
  int satellite_count = 8;
  double orbit_radius = 2.66e7;  // m
  double wavelength = 299792458.0 / 1561.098e6;  // BeiDou B1I
  geodesy::GeodeticPoint origin{0.546, 2.115, 20.0};
  Vec3 lever_arm = Vec3(0.3, 0.0, 1.2);
  Mat3 body_from_radar = Mat3::Identity();
  double clock_bias0 = 120.0;   // m
  double clock_drift = 0.4;     // m/s
  double doppler_sign = 1.0;
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  uint64_t seed = 1;
};

struct TruthRecord {
  double t = 0.0;
  Vec3 position = Vec3::Zero();  // ENU at scenario origin
  Vec3 velocity = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  double clock_bias = 0.0;
  double clock_drift = 0.0;
};

struct SimOutput {
  std::vector<ImuSample> imu;
  std::vector<RadarScan> radar;
  std::vector<GnssEpoch> gnss;
  std::vector<TruthRecord> truth;          // at GNSS epoch times
  std::vector<TruthRecord> truth_dense;    // every integration node
  geodesy::FrameSet frames;
};

SimOutput generate(const Scenario& scenario);

}  // namespace radnav::sim
