#include "radnav/geodesy.hpp"

#include <cmath>

namespace radnav::geodesy {

GeodeticPoint::GeodeticPoint(double lat, double lon, double h)
    : latitude(lat), longitude(lon), height(h) {
  if (!(std::abs(lat) <= M_PI / 2.0) || !std::isfinite(lon) || !std::isfinite(h)) {
    throw std::invalid_argument("GeodeticPoint: invalid coordinates");
  }
  // wrap longitude to (-pi, pi]
  while (longitude <= -M_PI) longitude += 2.0 * M_PI;
  while (longitude > M_PI) longitude -= 2.0 * M_PI;
}

Vec3 geodetic_to_ecef(const GeodeticPoint& p) {
  const double sin_lat = std::sin(p.latitude);
  const double cos_lat = std::cos(p.latitude);
  const double sin_lon = std::sin(p.longitude);
  const double cos_lon = std::cos(p.longitude);
  const double n = kSemiMajorAxis / std::sqrt(1.0 - kEccSq * sin_lat * sin_lat);
  return Vec3((n + p.height) * cos_lat * cos_lon,
              (n + p.height) * cos_lat * sin_lon,
              (n * (1.0 - kEccSq) + p.height) * sin_lat);
}

GeodeticPoint ecef_to_geodetic(const Vec3& p_ecef) {
  const double rho = std::hypot(p_ecef.x(), p_ecef.y());
  const double lon = (rho < 1e-12) ? 0.0 : std::atan2(p_ecef.y(), p_ecef.x());
  double lat = std::atan2(p_ecef.z(), rho * (1.0 - kEccSq));
  double h = 0.0;
  for (int i = 0; i < 12; ++i) {
    const double sin_lat = std::sin(lat);
    const double n = kSemiMajorAxis / std::sqrt(1.0 - kEccSq * sin_lat * sin_lat);
    if (rho > 1.0) {
      h = rho / std::cos(lat) - n;
      lat = std::atan2(p_ecef.z(), rho * (1.0 - kEccSq * n / (n + h)));
    } else {
      // near the poles the vertical is along z
      h = std::abs(p_ecef.z()) - n * (1.0 - kEccSq);
      lat = (p_ecef.z() >= 0.0) ? M_PI / 2.0 : -M_PI / 2.0;
    }
  }
  return GeodeticPoint(lat, lon, h);
}

Mat3 ecef_from_enu_rotation(const GeodeticPoint& p) {
  const double sl = std::sin(p.latitude), cl = std::cos(p.latitude);
  const double so = std::sin(p.longitude), co = std::cos(p.longitude);
  Mat3 r;
  // columns: east, north, up expressed in ECEF
  r << -so, -sl * co, cl * co,
        co, -sl * so, cl * so,
       0.0,       cl,      sl;
  return r;
}

FrameSet FrameSet::make(const GeodeticPoint& origin, const Vec3& lever_arm,
                        const Mat3& body_from_radar) {
  FrameSet f;
  f.enu_origin = origin;
  f.enu_origin_ecef = geodetic_to_ecef(origin);
  f.rotation_ecef_from_enu = ecef_from_enu_rotation(origin);
  f.lever_arm_gnss = lever_arm;
  f.rotation_body_from_radar = body_from_radar;
  const Mat3 rr = body_from_radar.transpose() * body_from_radar;
  if ((rr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      body_from_radar.determinant() < 0.0) {
    throw std::invalid_argument("FrameSet: radar rotation not orthonormal");
  }
  if (!lever_arm.allFinite()) throw std::invalid_argument("FrameSet: lever arm not finite");
  return f;
}

double sagnac_correction(const Vec3& p_sat_ecef, const Vec3& p_rcv_ecef) {
  return kEarthRotationRate / kSpeedOfLight *
         (p_sat_ecef.x() * p_rcv_ecef.y() - p_sat_ecef.y() * p_rcv_ecef.x());
}

ElevationAzimuth elevation_azimuth(const Vec3& p_sat_ecef, const Vec3& p_rcv_ecef) {
  const Vec3 los = p_sat_ecef - p_rcv_ecef;
  const double d = los.norm();
  if (d < 1e-6) throw std::invalid_argument("elevation_azimuth: coincident points");
  const Mat3 r = ecef_from_enu_rotation(ecef_to_geodetic(p_rcv_ecef));
  const Vec3 los_enu = r.transpose() * (los / d);
  ElevationAzimuth ea;
  ea.elevation = std::asin(std::clamp(los_enu.z(), -1.0, 1.0));
  ea.azimuth = std::atan2(los_enu.x(), los_enu.y());
  return ea;
}

}  // namespace radnav::geodesy
