#pragma once

#include <map>
#include <string>
#include <vector>

#include "radnav/geodesy.hpp"
#include "radnav/nav_state.hpp"

namespace radnav {

struct SatelliteObservation {
  int sat_id = 0;
  double pseudorange = 0.0;   // m
  double carrier_phase = 0.0; // cycles
  double doppler = 0.0;       // Hz
  double snr = 0.0;           // dB-Hz
  double wavelength = 0.0;    // m
};

struct SatelliteState {
  Vec3 position_ecef = Vec3::Zero();
  double clock_error = 0.0;  // m
  double tropo_delay = 0.0;  // m
  double iono_delay = 0.0;   // m
};

struct GnssEpoch {
  double timestamp = 0.0;
  std::map<int, SatelliteObservation> observations;
  std::map<int, SatelliteState> sat_states;
};

struct TdcpMeasurement {
  int sat_id = 0;
  double t_k = 0.0;
  double t_k1 = 0.0;
  double delta_phase = 0.0;  // m
  double phase_k = 0.0;      // cycles, as observed
  double phase_k1 = 0.0;     // cycles
  double wavelength = 0.0;   // m
  bool accepted = false;
};

// GNSS antenna position in ECEF for a given body state.
Vec3 receiver_antenna_ecef(const Vec3& position_enu, const Quat& orientation,
                           const geodesy::FrameSet& frames);

// Drop observations below the elevation mask (rad).
GnssEpoch elevation_filter(const GnssEpoch& epoch, const Vec3& receiver_ecef,
                           double mask);

// Predicted pseudorange per the full measurement model, given the
// receiver antenna ECEF position and receiver clock bias (m).
double pseudorange_model(const SatelliteState& sat, const Vec3& receiver_ecef,
                         double clock_bias);

// Carrier phase model in meters, excluding the ambiguity term.
double carrier_phase_model(const SatelliteState& sat, const Vec3& receiver_ecef,
                           double clock_bias);

// residual = model - measurement; jacobian over the 17-dim increment of x_k
double pseudorange_residual(const SatelliteObservation& obs, const SatelliteState& sat,
                            const NavState& x_k, const geodesy::FrameSet& frames,
                            Eigen::Matrix<double, 1, 17>* jac = nullptr);

// One candidate per satellite common to both epochs; accepted flag unset.
std::vector<TdcpMeasurement> build_tdcp(const GnssEpoch& epoch_k,
                                        const GnssEpoch& epoch_k1);

double tdcp_residual(const TdcpMeasurement& m, const SatelliteState& sat_k,
                     const SatelliteState& sat_k1, const NavState& x_k,
                     const NavState& x_k1, const geodesy::FrameSet& frames,
                     Eigen::Matrix<double, 1, 17>* jac_k = nullptr,
                     Eigen::Matrix<double, 1, 17>* jac_k1 = nullptr);

// Constant clock error drift model.
Vec2 clock_drift_residual(const NavState& x_k, const NavState& x_k1, double dt,
                          Eigen::Matrix<double, 2, 17>* jac_k = nullptr,
                          Eigen::Matrix<double, 2, 17>* jac_k1 = nullptr);

}  // namespace radnav
