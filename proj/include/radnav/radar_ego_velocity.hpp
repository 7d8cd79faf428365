#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "radnav/nav_state.hpp"
#include "radnav/rotation.hpp"

namespace radnav {

struct RadarPoint {
  Vec3 position = Vec3::Zero();  // radar frame, m
  double doppler = 0.0;          // relative radial speed, m/s
};

struct RadarScan {
  double timestamp = 0.0;
  std::vector<RadarPoint> points;
};

struct RansacConfig {
  int min_points = 8;
  int iterations = 100;
  double inlier_threshold = 0.25;     // m/s
  double min_consensus_fraction = 0.4;
  double early_exit_fraction = 0.95;
  uint64_t seed = 42;
};

struct EgoVelocityEstimate {
  Vec2 v2d_radar = Vec2::Zero();      // (v_x^r, v_y^r)
  Vec3 body_velocity = Vec3::Zero();  // longitudinal only: (v_x^b, 0, 0)
  std::vector<int> inlier_indices;
  double residual_rms = 0.0;
  bool valid = false;
};

// RANSAC over 2-point minimal samples of cos(theta_x) v_x + cos(theta_y) v_y = v_r,
// followed by a least-squares refit on the consensus set.
EgoVelocityEstimate estimate_ego_velocity(const std::vector<RadarPoint>& scan,
                                          const RansacConfig& config,
                                          const Mat3& rotation_body_from_radar);

struct PreintegratedRadarVelocity {
  Vec3 eta = Vec3::Zero();  // m, frame of the epoch-start body
  double dt_total = 0.0;
  double covered_dt = 0.0;  // portion backed by a valid velocity estimate
  Mat3 covariance = Mat3::Zero();

  // eta += R(gamma_t) * v_body * dt
  void integrate(const Vec3& v_body, const Quat& gamma_t, double dt,
                 double sigma_velocity);
  // account for a sub-interval with no usable scan
  void add_gap(double dt);
  // inflate covariance by the missing-interval ratio
  void finalize();
};

// r_V = R(q_k)^T (p_{k+1} - p_k) - eta
Vec3 radar_velocity_residual(const PreintegratedRadarVelocity& p,
                             const NavState& x_k, const NavState& x_k1,
                             Eigen::Matrix<double, 3, 17>* jac_k = nullptr,
                             Eigen::Matrix<double, 3, 17>* jac_k1 = nullptr);

}  // namespace radnav
