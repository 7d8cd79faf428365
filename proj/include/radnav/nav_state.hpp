#pragma once

#include "radnav/rotation.hpp"

namespace radnav {

// Local increment layout: (dp 0-2, dv 3-5, dtheta 6-8, dba 9-11,
// dbg 12-14, dclk 15, dclk_drift 16).
constexpr int kStateDim = 17;

struct NavState {
  Vec3 position = Vec3::Zero();      // ENU, m
  Vec3 velocity = Vec3::Zero();      // ENU, m/s
  Quat orientation = Quat::Identity();  // body-to-ENU, Hamilton
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  double clock_bias = 0.0;   // m
  double clock_drift = 0.0;  // m/s
  double timestamp = 0.0;

  NavState boxplus(const Eigen::Matrix<double, kStateDim, 1>& delta) const {
    NavState out = *this;
    out.position += delta.segment<3>(0);
    out.velocity += delta.segment<3>(3);
    out.orientation = (orientation * quat_exp(delta.segment<3>(6))).normalized();
    out.accel_bias += delta.segment<3>(9);
    out.gyro_bias += delta.segment<3>(12);
    out.clock_bias += delta(15);
    out.clock_drift += delta(16);
    return out;
  }

  Eigen::Matrix<double, kStateDim, 1> boxminus(const NavState& other) const {
    Eigen::Matrix<double, kStateDim, 1> d;
    d.segment<3>(0) = position - other.position;
    d.segment<3>(3) = velocity - other.velocity;
    d.segment<3>(6) = quat_log(other.orientation.conjugate() * orientation);
    d.segment<3>(9) = accel_bias - other.accel_bias;
    d.segment<3>(12) = gyro_bias - other.gyro_bias;
    d(15) = clock_bias - other.clock_bias;
    d(16) = clock_drift - other.clock_drift;
    return d;
  }
};

}  // namespace radnav
