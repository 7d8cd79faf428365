#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radnav/gnss_models.hpp"
#include "radnav/imu_preintegration.hpp"
#include "radnav/nav_state.hpp"
#include "radnav/radar_ego_velocity.hpp"
#include "radnav/robustification.hpp"

namespace radnav {

struct OptimizerConfig {
  int max_iterations = 50;
  double gradient_tol = 1e-8;
  double step_tol = 1e-10;
  double initial_lambda = 1e-6;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
};

struct ConvergenceReport {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double gradient_norm = 0.0;
  std::string termination;
  bool converged = false;
  bool rank_deficient = false;
};

// A factor contributes cost plus whitened residual/Jacobian blocks such
// that H += J^T J and g += J^T r reproduce the cost gradient.
class Factor {
 public:
  virtual ~Factor() = default;
  virtual int dim() const = 0;
  virtual const char* name() const = 0;
  virtual double evaluate(const std::vector<const NavState*>& states,
                          Eigen::VectorXd* residual,
                          std::vector<Eigen::MatrixXd>* jacobians) const = 0;
  std::vector<uint64_t> state_ids;
};

class ImuFactor : public Factor {
 public:
  ImuFactor(PreintegratedImu preint, Vec3 gravity)
      : preint_(std::move(preint)), gravity_(gravity) {}
  int dim() const override { return 15; }
  const char* name() const override { return "imu"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;
  const PreintegratedImu& preint() const { return preint_; }

 private:
  PreintegratedImu preint_;
  Vec3 gravity_;
  mutable Eigen::Matrix<double, 15, 15> sqrt_info_;
  mutable bool sqrt_info_ready_ = false;
};

class RadarVelocityFactor : public Factor {
 public:
  explicit RadarVelocityFactor(PreintegratedRadarVelocity preint)
      : preint_(std::move(preint)) {}
  int dim() const override { return 3; }
  const char* name() const override { return "radar_velocity"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;

 private:
  PreintegratedRadarVelocity preint_;
};

class ClockDriftFactor : public Factor {
 public:
  ClockDriftFactor(double dt, double sigma_bias, double sigma_drift)
      : dt_(dt), sigma_bias_(sigma_bias), sigma_drift_(sigma_drift) {}
  int dim() const override { return 2; }
  const char* name() const override { return "clock_drift"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;

 private:
  double dt_, sigma_bias_, sigma_drift_;
};

class TdcpFactor : public Factor {
 public:
  TdcpFactor(TdcpMeasurement m, SatelliteState sat_k, SatelliteState sat_k1,
             const geodesy::FrameSet* frames, double sigma)
      : m_(m), sat_k_(sat_k), sat_k1_(sat_k1), frames_(frames), sigma_(sigma) {}
  int dim() const override { return 1; }
  const char* name() const override { return "tdcp"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;

 private:
  TdcpMeasurement m_;
  SatelliteState sat_k_, sat_k1_;
  const geodesy::FrameSet* frames_;
  double sigma_;
};

// Gaussian noise by default; with a GmmCost attached, the robust mixture
// cost is applied via re-weighting at the current iterate.
class PseudorangeFactor : public Factor {
 public:
  PseudorangeFactor(SatelliteObservation obs, SatelliteState sat,
                    const geodesy::FrameSet* frames, double gaussian_sigma,
                    std::shared_ptr<const GmmCost> gmm = nullptr)
      : obs_(obs), sat_(sat), frames_(frames), sigma_(gaussian_sigma),
        gmm_(std::move(gmm)) {}
  int dim() const override { return 1; }
  const char* name() const override { return "pseudorange"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;

 private:
  SatelliteObservation obs_;
  SatelliteState sat_;
  const geodesy::FrameSet* frames_;
  double sigma_;
  std::shared_ptr<const GmmCost> gmm_;
};

// Linearized Gaussian prior left behind by marginalization:
// r(x) = r0 + sum_i J_i (x_i [-] x_i_lin), already whitened.
class MarginalPriorFactor : public Factor {
 public:
  MarginalPriorFactor(Eigen::VectorXd r0, std::vector<Eigen::MatrixXd> jacs,
                      std::vector<NavState> lin_states)
      : r0_(std::move(r0)), jacs_(std::move(jacs)), lin_(std::move(lin_states)) {}
  int dim() const override { return static_cast<int>(r0_.size()); }
  const char* name() const override { return "prior"; }
  double evaluate(const std::vector<const NavState*>& states, Eigen::VectorXd* r,
                  std::vector<Eigen::MatrixXd>* jacs) const override;

 private:
  Eigen::VectorXd r0_;
  std::vector<Eigen::MatrixXd> jacs_;
  std::vector<NavState> lin_;
};

struct BackendConfig {
  size_t window_size = 10;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  double sigma_tdcp = 0.01;          // m
  double sigma_pseudorange = 1.0;    // m
  double sigma_clock_bias = 0.3;     // m
  double sigma_clock_drift = 0.05;   // m/s
  bool enable_radar = true;
  bool enable_tdcp = true;
  bool use_gmm = true;
  OptimizerConfig optimizer;
};

struct EpochInput {
  PreintegratedImu preint_imu;
  std::optional<PreintegratedRadarVelocity> preint_radar;
  GnssEpoch epoch;  // already elevation-filtered
  std::vector<TdcpMeasurement> tdcp;          // accepted flags set
  const GnssEpoch* previous_epoch = nullptr;  // for TDCP satellite states
  std::shared_ptr<const GmmCost> gmm;         // null -> Gaussian pseudorange
};

struct FactorCounts {
  int imu = 0, radar_velocity = 0, clock = 0, pseudorange = 0, tdcp = 0, prior = 0;
};

class Problem {
 public:
  Problem(const geodesy::FrameSet& frames, const BackendConfig& config)
      : frames_(frames), config_(config) {}

  // Seed the window with an initial state and a diagonal prior
  // (stddevs over the 17-dim increment).
  void set_initial_state(const NavState& x0,
                         const Eigen::Matrix<double, kStateDim, 1>& prior_sigmas);

  // Append a new state predicted through the IMU interval and attach all
  // factors for the epoch. Marginalizes when the window exceeds capacity.
  void add_epoch(const EpochInput& input);

  ConvergenceReport optimize();
  void marginalize_oldest();

  const std::vector<NavState>& states() const { return states_; }
  NavState& state_at(size_t window_index) { return states_[window_index]; }
  NavState& latest_state() { return states_.back(); }
  const std::vector<std::unique_ptr<Factor>>& factors() const { return factors_; }
  FactorCounts factor_counts() const;
  double total_cost() const;
  const BackendConfig& config() const { return config_; }
  size_t window_size() const { return states_.size(); }

  void add_factor(std::unique_ptr<Factor> f);
  uint64_t state_id(size_t window_index) const { return ids_[window_index]; }
  const ConvergenceReport& last_report() const { return report_; }

 private:
  size_t index_of(uint64_t id) const;
  double evaluate_factor(const Factor& f, Eigen::VectorXd* r,
                         std::vector<Eigen::MatrixXd>* jacs) const;

  geodesy::FrameSet frames_;
  BackendConfig config_;
  std::vector<NavState> states_;
  std::vector<uint64_t> ids_;
  uint64_t next_id_ = 0;
  std::vector<std::unique_ptr<Factor>> factors_;
  ConvergenceReport report_;
};

// Schur complement of the leading `drop_dim` block of (H, b); returns
// the reduced (H', b') on the remaining variables.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> marginalize_gaussian(
    const Eigen::MatrixXd& H, const Eigen::VectorXd& b, int drop_dim);

struct SppResult {
  Vec3 position_ecef = Vec3::Zero();
  double clock_bias = 0.0;  // m
  double gdop = 0.0;
  int iterations = 0;
  bool valid = false;
};

// Iterative least-squares single point positioning on pseudoranges.
SppResult solve_spp(const GnssEpoch& epoch);

// Roll/pitch from averaged specific force (gravity alignment).
void roll_pitch_from_accel(const Vec3& mean_accel, double* roll, double* pitch);

struct InitializationResult {
  NavState state;  // at the first epoch, ENU anchored at the first fix
  geodesy::GeodeticPoint enu_origin;
  double gdop = 0.0;
  bool valid = false;
};

// Bootstrap from two SPP fixes plus buffered IMU: position/clock from
// SPP, velocity and yaw from the fix difference, roll/pitch from gravity.
InitializationResult initialize_from_epochs(const GnssEpoch& epoch_a,
                                            const GnssEpoch& epoch_b,
                                            const std::vector<ImuSample>& imu_buffer);

}  // namespace radnav
