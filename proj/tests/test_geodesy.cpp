#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "radnav/geodesy.hpp"

using namespace radnav;
using namespace radnav::geodesy;

TEST_CASE("geodetic_to_ecef reference points") {
  SUBCASE("equator / prime meridian lies on the semi-major axis") {
    const Vec3 p = geodetic_to_ecef(GeodeticPoint(0.0, 0.0, 0.0));
    CHECK(std::abs(p.x() - kSemiMajorAxis) < 1e-9);
    CHECK(std::abs(p.y()) < 1e-9);
    CHECK(std::abs(p.z()) < 1e-9);
  }
  SUBCASE("north pole lies on the semi-minor axis") {
    const double b = kSemiMajorAxis * std::sqrt(1.0 - kEccSq);
    const Vec3 p = geodetic_to_ecef(GeodeticPoint(M_PI / 2.0, 0.0, 0.0));
    CHECK(std::abs(p.x()) < 1e-6);
    CHECK(std::abs(p.y()) < 1e-6);
    CHECK(std::abs(p.z() - b) < 1e-6);
  }
  SUBCASE("mid-latitude point vs independent conversion") {
    // oracle computed with a 40-digit evaluation of the closed-form
    // ellipsoidal conversion
    const Vec3 p = geodetic_to_ecef(GeodeticPoint(0.5486, 2.1201, 20.0));
    CHECK(std::abs(p.x() - -2843925.5634896505) < 1e-6);
    CHECK(std::abs(p.y() - 4645817.1332531112) < 1e-6);
    CHECK(std::abs(p.z() - 3306910.4433495774) < 1e-6);
  }
  SUBCASE("ecef_to_geodetic inverts geodetic_to_ecef") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const GeodeticPoint g(1.4 * u(rng), M_PI * u(rng), 5000.0 * u(rng));
      const GeodeticPoint back = ecef_to_geodetic(geodetic_to_ecef(g));
      CHECK(std::abs(back.latitude - g.latitude) < 1e-12);
      CHECK(std::abs(back.longitude - g.longitude) < 1e-12);
      CHECK(std::abs(back.height - g.height) < 1e-7);
    }
  }
}

TEST_CASE("ENU frame mapping") {
  const GeodeticPoint origin(0.5486, 2.1201, 20.0);
  const FrameSet fr = FrameSet::make(origin, Vec3::Zero(), Mat3::Identity());

  SUBCASE("origin maps to zero") {
    CHECK(fr.ecef_to_enu(geodetic_to_ecef(origin)).norm() < 1e-9);
  }
  SUBCASE("point 100 m geodetic east of the origin") {
    // same latitude/height, longitude advanced by 100 m of parallel arc
    // (oracle ECEF coordinates from the 40-digit script)
    const Vec3 east_ecef(-2844010.8518380580, 4645764.9231235803, 3306910.4433495774);
    const Vec3 enu = fr.ecef_to_enu(east_ecef);
    CHECK(std::abs(enu.x() - 100.0) < 1e-3);
    CHECK(std::abs(enu.y()) < 1e-3);
    CHECK(std::abs(enu.z()) < 1e-3);  // chord dips ~d^2/2R below the tangent
  }
  SUBCASE("round trip within 50 km") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 p(5e4 * u(rng), 5e4 * u(rng), 2e3 * u(rng));
      CHECK((fr.ecef_to_enu(fr.enu_to_ecef(p)) - p).norm() < 1e-9);
    }
  }
  SUBCASE("rotation is orthonormal") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
      const GeodeticPoint g(1.4 * u(rng), M_PI * u(rng), 100.0 * u(rng));
      const Mat3 r = ecef_from_enu_rotation(g);
      CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    }
  }
}

TEST_CASE("sagnac correction") {
  SUBCASE("receiver at the ECEF origin") {
    CHECK(sagnac_correction(Vec3(2e7, 1e7, 5e6), Vec3::Zero()) == 0.0);
  }
  SUBCASE("satellite and receiver both on the +x axis") {
    CHECK(sagnac_correction(Vec3(2.6e7, 0.0, 0.0), Vec3(6.4e6, 0.0, 0.0)) == 0.0);
  }
  SUBCASE("direct arithmetic oracle") {
    const Vec3 sat(2.0e7, 1.0e7, 0.0), rcv(6.0e6, 1.0e6, 0.0);
    const double oracle =
        kEarthRotationRate / kSpeedOfLight * (2.0e7 * 1.0e6 - 1.0e7 * 6.0e6);
    CHECK(std::abs(sagnac_correction(sat, rcv) - oracle) < 1e-6);
  }
  SUBCASE("antisymmetric in its arguments") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const Vec3 a(2e7 * u(rng), 2e7 * u(rng), 2e7 * u(rng));
      const Vec3 b(6e6 * u(rng), 6e6 * u(rng), 6e6 * u(rng));
      CHECK(std::abs(sagnac_correction(a, b) + sagnac_correction(b, a)) < 1e-9);
    }
  }
}

TEST_CASE("elevation and azimuth") {
  const GeodeticPoint origin(0.5486, 2.1201, 20.0);
  const FrameSet fr = FrameSet::make(origin, Vec3::Zero(), Mat3::Identity());
  const Vec3 rcv = fr.enu_origin_ecef;

  SUBCASE("satellite at zenith") {
    const Vec3 sat = fr.enu_to_ecef(Vec3(0.0, 0.0, 2.0e7));
    CHECK(std::abs(elevation_azimuth(sat, rcv).elevation - M_PI / 2.0) < 1e-9);
  }
  SUBCASE("satellite on the horizon plane, due east") {
    const Vec3 sat = fr.enu_to_ecef(Vec3(2.0e7, 0.0, 0.0));
    const auto ea = elevation_azimuth(sat, rcv);
    CHECK(std::abs(ea.elevation) < 1e-9);
    CHECK(std::abs(ea.azimuth - M_PI / 2.0) < 1e-9);
  }
  SUBCASE("mid-latitude geometry vs independent ENU rotation") {
    // independent rotation built from the textbook ENU basis
    const double lat = origin.latitude, lon = origin.longitude;
    const Vec3 east(-std::sin(lon), std::cos(lon), 0.0);
    const Vec3 north(-std::sin(lat) * std::cos(lon), -std::sin(lat) * std::sin(lon),
                     std::cos(lat));
    const Vec3 up(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                  std::sin(lat));
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const Vec3 sat =
          rcv + 2e7 * Vec3(u(rng), u(rng), u(rng)).normalized() + Vec3(0, 0, 1e7);
      const Vec3 los = sat - rcv;
      const double e = east.dot(los), n = north.dot(los), z = up.dot(los);
      const double el = std::asin(z / los.norm());
      const double az = std::atan2(e, n);
      const auto ea = elevation_azimuth(sat, rcv);
      CHECK(std::abs(ea.elevation - el) < 1e-9);
      CHECK(std::abs(std::remainder(ea.azimuth - az, 2.0 * M_PI)) < 1e-9);
    }
  }
}
