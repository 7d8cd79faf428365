#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace radnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Rotation-vector exponential, Hamilton quaternion.
inline Quat quat_exp(const Vec3& theta) {
  const double angle = theta.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * theta.x(), 0.5 * theta.y(), 0.5 * theta.z());
    q.normalize();
    return q;
  }
  const Vec3 axis = theta / angle;
  const double half = 0.5 * angle;
  const double s = std::sin(half);
  return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

// Rotation vector of a unit quaternion (inverse of quat_exp).
inline Vec3 quat_log(const Quat& q_in) {
  Quat q = q_in;
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v(q.x(), q.y(), q.z());
  const double vn = v.norm();
  if (vn < 1e-12) return 2.0 * v;
  return 2.0 * std::atan2(vn, q.w()) * v / vn;
}

inline Mat3 exp_so3(const Vec3& theta) { return quat_exp(theta).toRotationMatrix(); }

// SO(3) right Jacobian: Exp(theta + d) = Exp(theta) Exp(Jr(theta) d).
inline Mat3 right_jacobian(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 w = skew(theta);
  if (angle < 1e-8) return Mat3::Identity() - 0.5 * w + w * w / 6.0;
  const double a2 = angle * angle;
  return Mat3::Identity() - (1.0 - std::cos(angle)) / a2 * w +
         (angle - std::sin(angle)) / (a2 * angle) * w * w;
}

// Inverse of the SO(3) right Jacobian.
inline Mat3 right_jacobian_inv(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 w = skew(theta);
  if (angle < 1e-8) return Mat3::Identity() + 0.5 * w + w * w / 12.0;
  const double half = 0.5 * angle;
  const double cot = half / std::tan(half);
  return Mat3::Identity() + 0.5 * w + (1.0 - cot) / (angle * angle) * w * w;
}

inline Mat3 left_jacobian_inv(const Vec3& theta) {
  return right_jacobian_inv(-theta);
}

}  // namespace radnav
