#include "radnav/imu_preintegration.hpp"

#include <cmath>
#include <stdexcept>

namespace radnav {

void strapdown_midpoint_step(Quat& q, Vec3& v, Vec3& p, const Vec3& f0,
                             const Vec3& f1, const Vec3& w0, const Vec3& w1,
                             double dt, const Vec3& gravity) {
  const Vec3 w_mid = 0.5 * (w0 + w1);
  const Quat q1 = (q * quat_exp(w_mid * dt)).normalized();
  const Vec3 a_mid = 0.5 * (q * f0 + q1 * f1) + gravity;
  p += v * dt + 0.5 * a_mid * dt * dt;
  v += a_mid * dt;
  q = q1;
}

PreintegratedImu::PreintegratedImu(double start_time, const ImuBias& bias,
                                   const ImuNoiseParams& noise)
    : start_time_(start_time), bias_(bias), noise_(noise), last_time_(start_time) {
  checkpoints_.front().timestamp = start_time;
}

void PreintegratedImu::integrate(const ImuSample& s0, const ImuSample& s1) {
  const double dt = s1.timestamp - s0.timestamp;
  if (dt <= 0.0) throw std::invalid_argument("PreintegratedImu: non-monotonic timestamps");
  if (dt > 0.1) sample_gap_ = true;

  const Vec3 w0 = s0.gyro - bias_.gyro_bias;
  const Vec3 w1 = s1.gyro - bias_.gyro_bias;
  const Vec3 f0 = s0.accel - bias_.accel_bias;
  const Vec3 f1 = s1.accel - bias_.accel_bias;
  const Vec3 w_mid = 0.5 * (w0 + w1);

  const Mat3 r0 = gamma_.toRotationMatrix();
  const Quat gamma1 = (gamma_ * quat_exp(w_mid * dt)).normalized();
  const Mat3 r1 = gamma1.toRotationMatrix();
  const Vec3 a_mid = 0.5 * (r0 * f0 + r1 * f1);

  // error-state transition, order (da, db, dth, dba, dbg)
  const Mat3 rw_t = exp_so3(w_mid * dt).transpose();
  const Mat3 da_dth = -0.5 * (r0 * skew(f0) + r1 * skew(f1) * rw_t);
  const Mat3 da_dbg = 0.5 * r1 * skew(f1) * dt;
  const Mat3 da_dba = -0.5 * (r0 + r1);

  Eigen::Matrix<double, 15, 15> F = Eigen::Matrix<double, 15, 15>::Identity();
  F.block<3, 3>(0, 3) = Mat3::Identity() * dt;
  F.block<3, 3>(0, 6) = 0.5 * dt * dt * da_dth;
  F.block<3, 3>(0, 9) = 0.5 * dt * dt * da_dba;
  F.block<3, 3>(0, 12) = 0.5 * dt * dt * da_dbg;
  F.block<3, 3>(3, 6) = dt * da_dth;
  F.block<3, 3>(3, 9) = dt * da_dba;
  F.block<3, 3>(3, 12) = dt * da_dbg;
  F.block<3, 3>(6, 6) = rw_t;
  F.block<3, 3>(6, 12) = -Mat3::Identity() * dt;

  // noise input (na0, ng0, na1, ng1), white noise densities
  Eigen::Matrix<double, 15, 12> G = Eigen::Matrix<double, 15, 12>::Zero();
  G.block<3, 3>(3, 0) = 0.5 * r0 * dt;
  G.block<3, 3>(3, 3) = -0.25 * r1 * skew(f1) * dt * dt;
  G.block<3, 3>(3, 6) = 0.5 * r1 * dt;
  G.block<3, 3>(3, 9) = -0.25 * r1 * skew(f1) * dt * dt;
  G.block<3, 3>(0, 0) = 0.5 * dt * G.block<3, 3>(3, 0);
  G.block<3, 3>(0, 3) = 0.5 * dt * G.block<3, 3>(3, 3);
  G.block<3, 3>(0, 6) = 0.5 * dt * G.block<3, 3>(3, 6);
  G.block<3, 3>(0, 9) = 0.5 * dt * G.block<3, 3>(3, 9);
  G.block<3, 3>(6, 3) = 0.5 * Mat3::Identity() * dt;
  G.block<3, 3>(6, 9) = 0.5 * Mat3::Identity() * dt;

  Eigen::Matrix<double, 12, 12> V = Eigen::Matrix<double, 12, 12>::Zero();
  const double var_a = noise_.sigma_accel * noise_.sigma_accel / dt;
  const double var_g = noise_.sigma_gyro * noise_.sigma_gyro / dt;
  V.diagonal() << var_a, var_a, var_a, var_g, var_g, var_g, var_a, var_a, var_a,
      var_g, var_g, var_g;

  cov_ = F * cov_ * F.transpose() + G * V * G.transpose();
  cov_.block<3, 3>(9, 9) +=
      Mat3::Identity() * noise_.sigma_accel_bias * noise_.sigma_accel_bias * dt;
  cov_.block<3, 3>(12, 12) +=
      Mat3::Identity() * noise_.sigma_gyro_bias * noise_.sigma_gyro_bias * dt;
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  jac_ = F * jac_;

  alpha_ += beta_ * dt + 0.5 * a_mid * dt * dt;
  beta_ += a_mid * dt;
  gamma_ = gamma1;
  dt_total_ += dt;
  last_time_ = s1.timestamp;
  checkpoints_.push_back({s1.timestamp, gamma_});
  has_samples_ = true;
}

Eigen::Matrix<double, 15, 6> PreintegratedImu::jacobian_wrt_bias() const {
  return jac_.block<15, 6>(0, 9);
}

PreintegratedImu PreintegratedImu::correct_for_bias(const ImuBias& new_bias) const {
  const Vec3 dba = new_bias.accel_bias - bias_.accel_bias;
  const Vec3 dbg = new_bias.gyro_bias - bias_.gyro_bias;
  if (dba.cwiseAbs().maxCoeff() > relinearization_threshold ||
      dbg.cwiseAbs().maxCoeff() > relinearization_threshold) {
    throw std::runtime_error(
        "PreintegratedImu: bias change beyond re-linearization threshold; "
        "re-integrate from buffered samples");
  }
  PreintegratedImu out = *this;
  out.alpha_ += jac_.block<3, 3>(0, 9) * dba + jac_.block<3, 3>(0, 12) * dbg;
  out.beta_ += jac_.block<3, 3>(3, 9) * dba + jac_.block<3, 3>(3, 12) * dbg;
  out.gamma_ = (gamma_ * quat_exp(jac_.block<3, 3>(6, 12) * dbg)).normalized();
  out.bias_ = new_bias;
  return out;
}

Quat PreintegratedImu::gamma_at(double t) const {
  if (checkpoints_.empty() || t <= checkpoints_.front().timestamp)
    return checkpoints_.front().gamma;
  for (size_t i = 1; i < checkpoints_.size(); ++i) {
    if (t <= checkpoints_[i].timestamp) {
      const auto& a = checkpoints_[i - 1];
      const auto& b = checkpoints_[i];
      const double span = b.timestamp - a.timestamp;
      if (span <= 0.0) return b.gamma;
      const double u = (t - a.timestamp) / span;
      return a.gamma.slerp(u, b.gamma);
    }
  }
  return checkpoints_.back().gamma;
}

Eigen::Matrix<double, 15, 1> PreintegratedImu::residual(
    const NavState& x_k, const NavState& x_k1, const Vec3& gravity,
    Eigen::Matrix<double, 15, 17>* jac_k,
    Eigen::Matrix<double, 15, 17>* jac_k1) const {
  // evaluate at the current bias of x_k via first-order correction
  ImuBias b{x_k.accel_bias, x_k.gyro_bias};
  Vec3 alpha_c = alpha_ + jac_.block<3, 3>(0, 9) * (b.accel_bias - bias_.accel_bias) +
                 jac_.block<3, 3>(0, 12) * (b.gyro_bias - bias_.gyro_bias);
  Vec3 beta_c = beta_ + jac_.block<3, 3>(3, 9) * (b.accel_bias - bias_.accel_bias) +
                jac_.block<3, 3>(3, 12) * (b.gyro_bias - bias_.gyro_bias);
  const Mat3 j_theta_bg = jac_.block<3, 3>(6, 12);
  Quat gamma_c =
      (gamma_ * quat_exp(j_theta_bg * (b.gyro_bias - bias_.gyro_bias))).normalized();

  const double T = dt_total_;
  const Mat3 rk_t = x_k.orientation.toRotationMatrix().transpose();
  const Vec3 u_p = x_k1.position - x_k.position - x_k.velocity * T - 0.5 * gravity * T * T;
  const Vec3 u_v = x_k1.velocity - x_k.velocity - gravity * T;

  Eigen::Matrix<double, 15, 1> r;
  r.segment<3>(0) = rk_t * u_p - alpha_c;
  r.segment<3>(3) = rk_t * u_v - beta_c;
  const Vec3 r_theta =
      quat_log(gamma_c.conjugate() * (x_k.orientation.conjugate() * x_k1.orientation));
  r.segment<3>(6) = r_theta;
  r.segment<3>(9) = x_k1.accel_bias - x_k.accel_bias;
  r.segment<3>(12) = x_k1.gyro_bias - x_k.gyro_bias;

  if (jac_k) {
    auto& J = *jac_k;
    J.setZero();
    J.block<3, 3>(0, 0) = -rk_t;
    J.block<3, 3>(0, 3) = -rk_t * T;
    J.block<3, 3>(0, 6) = skew(rk_t * u_p);
    J.block<3, 3>(0, 9) = -jac_.block<3, 3>(0, 9);
    J.block<3, 3>(0, 12) = -jac_.block<3, 3>(0, 12);
    J.block<3, 3>(3, 3) = -rk_t;
    J.block<3, 3>(3, 6) = skew(rk_t * u_v);
    J.block<3, 3>(3, 9) = -jac_.block<3, 3>(3, 9);
    J.block<3, 3>(3, 12) = -jac_.block<3, 3>(3, 12);
    const Mat3 jl_inv = left_jacobian_inv(r_theta);
    J.block<3, 3>(6, 6) = -jl_inv * gamma_c.toRotationMatrix().transpose();
    // gamma_c = gamma * Exp(J dbg): chain through the right Jacobian of
    // the correction rotation
    J.block<3, 3>(6, 12) =
        -jl_inv * right_jacobian(j_theta_bg * (b.gyro_bias - bias_.gyro_bias)) *
        j_theta_bg;
    J.block<3, 3>(9, 9) = -Mat3::Identity();
    J.block<3, 3>(12, 12) = -Mat3::Identity();
  }
  if (jac_k1) {
    auto& J = *jac_k1;
    J.setZero();
    J.block<3, 3>(0, 0) = rk_t;
    J.block<3, 3>(3, 3) = rk_t;
    J.block<3, 3>(6, 6) = right_jacobian_inv(r_theta);
    J.block<3, 3>(9, 9) = Mat3::Identity();
    J.block<3, 3>(12, 12) = Mat3::Identity();
  }
  return r;
}

NavState PreintegratedImu::predict(const NavState& x_k, const Vec3& gravity) const {
  const double T = dt_total_;
  const Mat3 rk = x_k.orientation.toRotationMatrix();
  NavState out = x_k;
  out.position = x_k.position + x_k.velocity * T + 0.5 * gravity * T * T + rk * alpha_;
  out.velocity = x_k.velocity + gravity * T + rk * beta_;
  out.orientation = (x_k.orientation * gamma_).normalized();
  out.clock_bias = x_k.clock_bias + x_k.clock_drift * T;
  out.timestamp = x_k.timestamp + T;
  return out;
}

}  // namespace radnav
