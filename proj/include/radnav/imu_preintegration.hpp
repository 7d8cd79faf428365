#pragma once

#include <vector>

#include "radnav/nav_state.hpp"
#include "radnav/rotation.hpp"

namespace radnav {

struct ImuSample {
  double timestamp = 0.0;  // s
  Vec3 accel = Vec3::Zero();  // specific force, body frame, m/s^2
  Vec3 gyro = Vec3::Zero();   // body frame, rad/s
};

struct ImuBias {
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
};

struct ImuNoiseParams {
  double sigma_accel = 2e-2;        // m/s^2/sqrt(Hz)
  double sigma_gyro = 2e-4;         // rad/s/sqrt(Hz)
  double sigma_accel_bias = 1e-4;   // random walk
  double sigma_gyro_bias = 1e-5;
};

// Rotation checkpoint inside an accumulation interval, used to evaluate
// the radar velocity quadrature at scan timestamps.
struct GammaCheckpoint {
  double timestamp = 0.0;
  Quat gamma = Quat::Identity();
};

// Accumulates IMU samples between consecutive GNSS epochs into the
// relative position/velocity/rotation terms alpha, beta, gamma with a
// 15x15 covariance over (d_alpha, d_beta, d_theta, d_ba, d_bg).
class PreintegratedImu {
 public:
  PreintegratedImu() = default;
  PreintegratedImu(double start_time, const ImuBias& linearization_bias,
                   const ImuNoiseParams& noise);

  // Midpoint step over [sample_k.timestamp, sample_k1.timestamp].
  void integrate(const ImuSample& sample_k, const ImuSample& sample_k1);

  // First-order update of alpha/beta/gamma for a small bias change.
  // Throws if the change exceeds the re-linearization threshold.
  PreintegratedImu correct_for_bias(const ImuBias& new_bias) const;

  const Vec3& alpha() const { return alpha_; }
  const Vec3& beta() const { return beta_; }
  const Quat& gamma() const { return gamma_; }
  double dt_total() const { return dt_total_; }
  double start_time() const { return start_time_; }
  const ImuBias& linearization_bias() const { return bias_; }
  const Eigen::Matrix<double, 15, 15>& covariance() const { return cov_; }
  Eigen::Matrix<double, 15, 6> jacobian_wrt_bias() const;
  const std::vector<GammaCheckpoint>& gamma_checkpoints() const { return checkpoints_; }
  bool has_sample_gap() const { return sample_gap_; }

  // Slerp of the preintegrated rotation at time t within the interval.
  Quat gamma_at(double t) const;

  // 15-vector residual over (alpha, beta, theta, ba, bg) and its
  // Jacobians w.r.t. the 17-dim local increments of both states.
  Eigen::Matrix<double, 15, 1> residual(
      const NavState& x_k, const NavState& x_k1, const Vec3& gravity,
      Eigen::Matrix<double, 15, 17>* jac_k = nullptr,
      Eigen::Matrix<double, 15, 17>* jac_k1 = nullptr) const;

  // Propagate a state across the interval (used for epoch prediction).
  NavState predict(const NavState& x_k, const Vec3& gravity) const;

  double relinearization_threshold = 0.05;

 private:
  double start_time_ = 0.0;
  double dt_total_ = 0.0;
  Vec3 alpha_ = Vec3::Zero();
  Vec3 beta_ = Vec3::Zero();
  Quat gamma_ = Quat::Identity();
  ImuBias bias_;
  ImuNoiseParams noise_;
  Eigen::Matrix<double, 15, 15> cov_ = Eigen::Matrix<double, 15, 15>::Zero();
  Eigen::Matrix<double, 15, 15> jac_ = Eigen::Matrix<double, 15, 15>::Identity();
  std::vector<GammaCheckpoint> checkpoints_{{0.0, Quat::Identity()}};
  bool sample_gap_ = false;
  double last_time_ = 0.0;
  bool has_samples_ = false;
};

// One midpoint step of the world-frame strapdown equations. Shared with
// the simulator so that discrete ground truth and preintegration agree.
void strapdown_midpoint_step(Quat& q, Vec3& v, Vec3& p, const Vec3& f0,
                             const Vec3& f1, const Vec3& w0, const Vec3& w1,
                             double dt, const Vec3& gravity);

}  // namespace radnav
