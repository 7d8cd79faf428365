#pragma once

#include <stdexcept>

#include "radnav/rotation.hpp"

namespace radnav::geodesy {

// WGS-84 ellipsoid.
constexpr double kSemiMajorAxis = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kEccSq = kFlattening * (2.0 - kFlattening);

constexpr double kEarthRotationRate = 7.2921151467e-5;  // rad/s
constexpr double kSpeedOfLight = 299792458.0;           // m/s

struct GeodeticPoint {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad
  double height = 0.0;     // m

  GeodeticPoint() = default;
  GeodeticPoint(double lat, double lon, double h);
};

// Fixed frame conventions for one run: ENU anchor, GNSS lever arm and
// radar mounting rotation (both in the body/IMU frame).
struct FrameSet {
  GeodeticPoint enu_origin;
  Vec3 enu_origin_ecef = Vec3::Zero();
  Mat3 rotation_ecef_from_enu = Mat3::Identity();
  Vec3 lever_arm_gnss = Vec3::Zero();
  Mat3 rotation_body_from_radar = Mat3::Identity();

  static FrameSet make(const GeodeticPoint& origin, const Vec3& lever_arm,
                       const Mat3& body_from_radar);

  Vec3 enu_to_ecef(const Vec3& p_enu) const {
    return enu_origin_ecef + rotation_ecef_from_enu * p_enu;
  }
  Vec3 ecef_to_enu(const Vec3& p_ecef) const {
    return rotation_ecef_from_enu.transpose() * (p_ecef - enu_origin_ecef);
  }
};

Vec3 geodetic_to_ecef(const GeodeticPoint& p);
GeodeticPoint ecef_to_geodetic(const Vec3& p_ecef);

// Rotation taking ENU vectors at `p` into ECEF.
Mat3 ecef_from_enu_rotation(const GeodeticPoint& p);

// Earth-rotation range correction (omega_e / c) * (x_s * y_r - y_s * x_r).
double sagnac_correction(const Vec3& p_sat_ecef, const Vec3& p_rcv_ecef);

struct ElevationAzimuth {
  double elevation = 0.0;  // rad, from local horizon
  double azimuth = 0.0;    // rad, clockwise from north
};

ElevationAzimuth elevation_azimuth(const Vec3& p_sat_ecef, const Vec3& p_rcv_ecef);

}  // namespace radnav::geodesy
