#pragma once

#include <cmath>
#include <random>

#include "radnav/geodesy.hpp"
#include "radnav/gnss_models.hpp"
#include "radnav/nav_state.hpp"

namespace radnav::testutil {

inline geodesy::FrameSet default_frames() {
  return geodesy::FrameSet::make(geodesy::GeodeticPoint(0.546, 2.115, 20.0),
                                 Vec3(0.3, 0.0, 1.2), Mat3::Identity());
}

inline Quat random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Quat q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

inline NavState random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  NavState x;
  x.position = 200.0 * Vec3(u(rng), u(rng), 0.2 * u(rng));
  x.velocity = 10.0 * Vec3(u(rng), u(rng), 0.1 * u(rng));
  x.orientation = random_quat(rng);
  x.accel_bias = 0.05 * Vec3(u(rng), u(rng), u(rng));
  x.gyro_bias = 0.005 * Vec3(u(rng), u(rng), u(rng));
  x.clock_bias = 150.0 * u(rng);
  x.clock_drift = u(rng);
  return x;
}

// Random satellite with elevation above the horizon as seen from the
// frame origin.
inline SatelliteState random_satellite(std::mt19937_64& rng,
                                       const geodesy::FrameSet& frames) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double el = (15.0 + 70.0 * u(rng)) * M_PI / 180.0;
  const double az = 2.0 * M_PI * u(rng);
  const Vec3 los_enu(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az),
                     std::sin(el));
  SatelliteState s;
  s.position_ecef =
      frames.enu_origin_ecef + frames.rotation_ecef_from_enu * los_enu * 2.2e7;
  s.clock_error = 20.0 * u(rng);
  s.tropo_delay = 2.0 + 10.0 * u(rng);
  s.iono_delay = 3.0 + 15.0 * u(rng);
  return s;
}

// --- extended-precision GNSS range models ------------------------------
// The double-precision model rounds at ~4e-9 m (ulp of a 2.6e7 m range),
// which would dominate a central difference with h = 1e-6. These long
// double twins keep the finite-difference oracle meaningful.

struct Vec3L {
  long double x = 0, y = 0, z = 0;
};

inline Vec3L antenna_ecef_ld(const NavState& x, const geodesy::FrameSet& fr) {
  const Mat3 rb = x.orientation.toRotationMatrix();
  long double body[3];
  for (int i = 0; i < 3; ++i) {
    body[i] = static_cast<long double>(x.position(i));
    for (int j = 0; j < 3; ++j) {
      body[i] += static_cast<long double>(rb(i, j)) *
                 static_cast<long double>(fr.lever_arm_gnss(j));
    }
  }
  Vec3L out;
  long double* o[3] = {&out.x, &out.y, &out.z};
  for (int i = 0; i < 3; ++i) {
    *o[i] = static_cast<long double>(fr.enu_origin_ecef(i));
    for (int j = 0; j < 3; ++j) {
      *o[i] += static_cast<long double>(fr.rotation_ecef_from_enu(i, j)) * body[j];
    }
  }
  return out;
}

inline long double range_ld(const SatelliteState& sat, const Vec3L& r) {
  const long double dx = static_cast<long double>(sat.position_ecef.x()) - r.x;
  const long double dy = static_cast<long double>(sat.position_ecef.y()) - r.y;
  const long double dz = static_cast<long double>(sat.position_ecef.z()) - r.z;
  return sqrtl(dx * dx + dy * dy + dz * dz);
}

inline long double sagnac_ld(const SatelliteState& sat, const Vec3L& r) {
  const long double k = static_cast<long double>(geodesy::kEarthRotationRate) /
                        static_cast<long double>(geodesy::kSpeedOfLight);
  return k * (static_cast<long double>(sat.position_ecef.x()) * r.y -
              static_cast<long double>(sat.position_ecef.y()) * r.x);
}

inline long double pseudorange_model_ld(const SatelliteState& sat, const NavState& x,
                                        const geodesy::FrameSet& fr) {
  const Vec3L r = antenna_ecef_ld(x, fr);
  return range_ld(sat, r) + static_cast<long double>(x.clock_bias) -
         static_cast<long double>(sat.clock_error) +
         static_cast<long double>(sat.tropo_delay) +
         static_cast<long double>(sat.iono_delay) + sagnac_ld(sat, r);
}

inline long double carrier_phase_model_ld(const SatelliteState& sat, const NavState& x,
                                          const geodesy::FrameSet& fr) {
  const Vec3L r = antenna_ecef_ld(x, fr);
  return range_ld(sat, r) + static_cast<long double>(x.clock_bias) -
         static_cast<long double>(sat.clock_error) +
         static_cast<long double>(sat.tropo_delay) -
         static_cast<long double>(sat.iono_delay);
}

inline long double tdcp_residual_ld(const TdcpMeasurement& m,
                                    const SatelliteState& sat_k,
                                    const SatelliteState& sat_k1, const NavState& x_k,
                                    const NavState& x_k1,
                                    const geodesy::FrameSet& fr) {
  const long double lam = static_cast<long double>(m.wavelength);
  const long double cpm_k = carrier_phase_model_ld(sat_k, x_k, fr);
  const long double cpm_k1 = carrier_phase_model_ld(sat_k1, x_k1, fr);
  const long double n_hat =
      roundl(static_cast<long double>(m.phase_k) - cpm_k / lam);
  const long double pred_k = (cpm_k + lam * n_hat) / lam;
  const long double pred_k1 = (cpm_k1 + lam * n_hat) / lam;
  return lam * ((pred_k1 - static_cast<long double>(m.phase_k1)) -
                (pred_k - static_cast<long double>(m.phase_k)));
}

}  // namespace radnav::testutil
