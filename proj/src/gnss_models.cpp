#include "radnav/gnss_models.hpp"

#include <cmath>
#include <stdexcept>

namespace radnav {

using geodesy::sagnac_correction;

Vec3 receiver_antenna_ecef(const Vec3& position_enu, const Quat& orientation,
                           const geodesy::FrameSet& frames) {
  return frames.enu_to_ecef(position_enu + orientation * frames.lever_arm_gnss);
}

GnssEpoch elevation_filter(const GnssEpoch& epoch, const Vec3& receiver_ecef,
                           double mask) {
  GnssEpoch out;
  out.timestamp = epoch.timestamp;
  for (const auto& [id, obs] : epoch.observations) {
    const auto it = epoch.sat_states.find(id);
    if (it == epoch.sat_states.end()) continue;
    const auto ea = geodesy::elevation_azimuth(it->second.position_ecef, receiver_ecef);
    if (ea.elevation >= mask) {
      out.observations.emplace(id, obs);
      out.sat_states.emplace(id, it->second);
    }
  }
  return out;
}

double pseudorange_model(const SatelliteState& sat, const Vec3& receiver_ecef,
                         double clock_bias) {
  return (sat.position_ecef - receiver_ecef).norm() + clock_bias - sat.clock_error +
         sat.tropo_delay + sat.iono_delay +
         sagnac_correction(sat.position_ecef, receiver_ecef);
}

double carrier_phase_model(const SatelliteState& sat, const Vec3& receiver_ecef,
                           double clock_bias) {
  return (sat.position_ecef - receiver_ecef).norm() + clock_bias - sat.clock_error +
         sat.tropo_delay - sat.iono_delay;
}

namespace {

// d(range + sagnac)/d(receiver ecef), as a row vector
Eigen::RowVector3d range_jacobian_ecef(const SatelliteState& sat,
                                       const Vec3& receiver_ecef) {
  const Vec3 los = sat.position_ecef - receiver_ecef;
  const Vec3 u = los / los.norm();
  Eigen::RowVector3d j = -u.transpose();
  const double k = geodesy::kEarthRotationRate / geodesy::kSpeedOfLight;
  j(0) += -k * sat.position_ecef.y();
  j(1) += k * sat.position_ecef.x();
  return j;
}

void fill_pose_jacobian(const Eigen::RowVector3d& d_ecef, const NavState& x,
                        const geodesy::FrameSet& frames,
                        Eigen::Matrix<double, 1, 17>* jac) {
  jac->setZero();
  const Mat3& r_en = frames.rotation_ecef_from_enu;
  jac->segment<3>(0) = d_ecef * r_en;
  jac->segment<3>(6) =
      d_ecef * (-r_en * x.orientation.toRotationMatrix() * skew(frames.lever_arm_gnss));
}

}  // namespace

double pseudorange_residual(const SatelliteObservation& obs, const SatelliteState& sat,
                            const NavState& x_k, const geodesy::FrameSet& frames,
                            Eigen::Matrix<double, 1, 17>* jac) {
  const Vec3 p_r = receiver_antenna_ecef(x_k.position, x_k.orientation, frames);
  const double r = pseudorange_model(sat, p_r, x_k.clock_bias) - obs.pseudorange;
  if (jac) {
    fill_pose_jacobian(range_jacobian_ecef(sat, p_r), x_k, frames, jac);
    (*jac)(15) = 1.0;
  }
  return r;
}

std::vector<TdcpMeasurement> build_tdcp(const GnssEpoch& epoch_k,
                                        const GnssEpoch& epoch_k1) {
  std::vector<TdcpMeasurement> out;
  for (const auto& [id, obs_k] : epoch_k.observations) {
    const auto it = epoch_k1.observations.find(id);
    if (it == epoch_k1.observations.end()) continue;
    TdcpMeasurement m;
    m.sat_id = id;
    m.t_k = epoch_k.timestamp;
    m.t_k1 = epoch_k1.timestamp;
    m.delta_phase = obs_k.wavelength * (it->second.carrier_phase - obs_k.carrier_phase);
    m.phase_k = obs_k.carrier_phase;
    m.phase_k1 = it->second.carrier_phase;
    m.wavelength = obs_k.wavelength;
    out.push_back(m);
  }
  return out;
}

double tdcp_residual(const TdcpMeasurement& m, const SatelliteState& sat_k,
                     const SatelliteState& sat_k1, const NavState& x_k,
                     const NavState& x_k1, const geodesy::FrameSet& frames,
                     Eigen::Matrix<double, 1, 17>* jac_k,
                     Eigen::Matrix<double, 1, 17>* jac_k1) {
  if (!m.accepted) {
    throw std::logic_error("tdcp_residual: measurement did not pass cycle-slip check");
  }
  const Vec3 p_r_k = receiver_antenna_ecef(x_k.position, x_k.orientation, frames);
  const Vec3 p_r_k1 = receiver_antenna_ecef(x_k1.position, x_k1.orientation, frames);
  // Form the residual in cycles with the (constant) integer ambiguity
  // removed from the predictions; the ~1e7 m range magnitudes then
  // cancel without catastrophic rounding.
  const double cpm_k = carrier_phase_model(sat_k, p_r_k, x_k.clock_bias);
  const double cpm_k1 = carrier_phase_model(sat_k1, p_r_k1, x_k1.clock_bias);
  const double n_hat = std::round(m.phase_k - cpm_k / m.wavelength);
  const double pred_k = (cpm_k + m.wavelength * n_hat) / m.wavelength;
  const double pred_k1 = (cpm_k1 + m.wavelength * n_hat) / m.wavelength;
  const double r =
      m.wavelength * ((pred_k1 - m.phase_k1) - (pred_k - m.phase_k));
  if (jac_k) {
    const Vec3 u = (sat_k.position_ecef - p_r_k).normalized();
    fill_pose_jacobian(u.transpose(), x_k, frames, jac_k);
    (*jac_k)(15) = -1.0;
  }
  if (jac_k1) {
    const Vec3 u = (sat_k1.position_ecef - p_r_k1).normalized();
    fill_pose_jacobian(-u.transpose(), x_k1, frames, jac_k1);
    (*jac_k1)(15) = 1.0;
  }
  return r;
}

Vec2 clock_drift_residual(const NavState& x_k, const NavState& x_k1, double dt,
                          Eigen::Matrix<double, 2, 17>* jac_k,
                          Eigen::Matrix<double, 2, 17>* jac_k1) {
  if (dt <= 0.0) throw std::invalid_argument("clock_drift_residual: dt <= 0");
  Vec2 r(x_k.clock_bias + x_k.clock_drift * dt - x_k1.clock_bias,
         x_k.clock_drift - x_k1.clock_drift);
  if (jac_k) {
    jac_k->setZero();
    (*jac_k)(0, 15) = 1.0;
    (*jac_k)(0, 16) = dt;
    (*jac_k)(1, 16) = 1.0;
  }
  if (jac_k1) {
    jac_k1->setZero();
    (*jac_k1)(0, 15) = -1.0;
    (*jac_k1)(1, 16) = -1.0;
  }
  return r;
}

}  // namespace radnav
