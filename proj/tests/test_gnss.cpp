#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "radnav/gnss_models.hpp"
#include "radnav/simulator.hpp"

using namespace radnav;

namespace {

sim::SimOutput noise_free_run() {
  sim::Scenario sc;
  sc.trajectory.type = sim::TrajectoryType::kFigureEight;
  sc.trajectory.period = 120.0;
  sc.duration = 10.0;
  return sim::generate(sc);
}

NavState state_from_truth(const sim::TruthRecord& tr) {
  NavState x;
  x.position = tr.position;
  x.velocity = tr.velocity;
  x.orientation = tr.orientation;
  x.accel_bias = tr.accel_bias;
  x.gyro_bias = tr.gyro_bias;
  x.clock_bias = tr.clock_bias;
  x.clock_drift = tr.clock_drift;
  x.timestamp = tr.t;
  return x;
}

}  // namespace

TEST_CASE("elevation filter") {
  const geodesy::FrameSet fr = testutil::default_frames();
  const Vec3 rcv = fr.enu_origin_ecef;
  const double mask = 15.0 * M_PI / 180.0;

  const auto sat_at = [&](double el_deg, double az_deg) {
    const double el = el_deg * M_PI / 180.0, az = az_deg * M_PI / 180.0;
    SatelliteState s;
    s.position_ecef = fr.enu_to_ecef(
        2.2e7 * Vec3(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az),
                     std::sin(el)));
    return s;
  };
  GnssEpoch epoch;
  epoch.timestamp = 5.0;
  const double els[] = {90.0, 5.0, 45.0, 14.0, 16.0};
  for (int i = 0; i < 5; ++i) {
    SatelliteObservation obs;
    obs.sat_id = i + 1;
    epoch.observations.emplace(i + 1, obs);
    epoch.sat_states.emplace(i + 1, sat_at(els[i], 40.0 * i));
  }

  SUBCASE("zenith satellite survives") {
    const auto out = elevation_filter(epoch, rcv, mask);
    CHECK(out.observations.count(1) == 1);
  }
  SUBCASE("satellite below the mask is removed") {
    const auto out = elevation_filter(epoch, rcv, mask);
    CHECK(out.observations.count(2) == 0);
    CHECK(out.observations.count(4) == 0);
  }
  SUBCASE("survivors match the per-satellite elevation oracle") {
    const auto out = elevation_filter(epoch, rcv, mask);
    for (const auto& [id, st] : epoch.sat_states) {
      const double el = geodesy::elevation_azimuth(st.position_ecef, rcv).elevation;
      CHECK(out.observations.count(id) == (el >= mask ? 1u : 0u));
    }
    CHECK(out.timestamp == epoch.timestamp);
  }
}

TEST_CASE("pseudorange residual") {
  const auto run = noise_free_run();
  const geodesy::FrameSet& fr = run.frames;

  SUBCASE("zero at ground truth") {
    for (size_t k = 0; k < run.gnss.size(); ++k) {
      const NavState x = state_from_truth(run.truth[k]);
      for (const auto& [id, obs] : run.gnss[k].observations) {
        const double r =
            pseudorange_residual(obs, run.gnss[k].sat_states.at(id), x, fr);
        CHECK(std::abs(r) < 1e-9);
      }
    }
  }
  SUBCASE("clock bias enters linearly") {
    NavState x = state_from_truth(run.truth[0]);
    const auto& epoch = run.gnss[0];
    const auto& [id, obs] = *epoch.observations.begin();
    const double r0 = pseudorange_residual(obs, epoch.sat_states.at(id), x, fr);
    x.clock_bias += 10.0;
    const double r1 = pseudorange_residual(obs, epoch.sat_states.at(id), x, fr);
    CHECK(std::abs(r1 - r0 - 10.0) < 1e-9);
  }
  SUBCASE("analytic Jacobian matches extended-precision central differences") {
    std::mt19937_64 rng(43);
    const geodesy::FrameSet frames = testutil::default_frames();
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
      const NavState x = testutil::random_state(rng);
      const SatelliteState sat = testutil::random_satellite(rng, frames);
      SatelliteObservation obs;
      obs.pseudorange = pseudorange_model(
          sat, receiver_antenna_ecef(x.position, x.orientation, frames), x.clock_bias);
      Eigen::Matrix<double, 1, 17> j;
      pseudorange_residual(obs, sat, x, frames, &j);
      for (int c = 0; c < kStateDim; ++c) {
        Eigen::Matrix<double, kStateDim, 1> dv =
            Eigen::Matrix<double, kStateDim, 1>::Zero();
        dv(c) = h;
        const long double fp = testutil::pseudorange_model_ld(sat, x.boxplus(dv), frames);
        const long double fm = testutil::pseudorange_model_ld(sat, x.boxplus(-dv), frames);
        const double fd = static_cast<double>((fp - fm) / (2.0L * h));
        CHECK(std::abs(fd - j(c)) / std::max(1.0, std::abs(j(c))) < 1e-5);
      }
    }
  }
}

TEST_CASE("tdcp candidates") {
  SUBCASE("satellite present only at the first epoch yields no candidate") {
    GnssEpoch a, b;
    a.timestamp = 0.0;
    b.timestamp = 1.0;
    SatelliteObservation obs;
    obs.sat_id = 3;
    obs.wavelength = 0.19;
    a.observations.emplace(3, obs);
    CHECK(build_tdcp(a, b).empty());
  }
  SUBCASE("static geometry gives zero phase delta") {
    const geodesy::FrameSet fr = testutil::default_frames();
    std::mt19937_64 rng(47);
    const SatelliteState sat = testutil::random_satellite(rng, fr);
    NavState x;
    const double lam = 0.192;
    const double phase =
        carrier_phase_model(sat, receiver_antenna_ecef(x.position, x.orientation, fr),
                            x.clock_bias) /
        lam;
    GnssEpoch a, b;
    a.timestamp = 0.0;
    b.timestamp = 1.0;
    SatelliteObservation obs;
    obs.sat_id = 1;
    obs.wavelength = lam;
    obs.carrier_phase = phase;
    a.observations.emplace(1, obs);
    b.observations.emplace(1, obs);
    a.sat_states.emplace(1, sat);
    b.sat_states.emplace(1, sat);
    const auto tdcp = build_tdcp(a, b);
    REQUIRE(tdcp.size() == 1);
    CHECK(tdcp[0].delta_phase == 0.0);
    CHECK_FALSE(tdcp[0].accepted);
  }
  SUBCASE("simulator motion matches the range+clock difference oracle") {
    const auto run = noise_free_run();
    for (size_t k = 0; k + 1 < run.gnss.size(); ++k) {
      const auto tdcp = build_tdcp(run.gnss[k], run.gnss[k + 1]);
      REQUIRE_FALSE(tdcp.empty());
      const NavState xa = state_from_truth(run.truth[k]);
      const NavState xb = state_from_truth(run.truth[k + 1]);
      for (const auto& m : tdcp) {
        const long double oracle =
            testutil::carrier_phase_model_ld(run.gnss[k + 1].sat_states.at(m.sat_id),
                                             xb, run.frames) -
            testutil::carrier_phase_model_ld(run.gnss[k].sat_states.at(m.sat_id), xa,
                                             run.frames);
        // emitted phases round at the full-range scale, ~1e-8 m
        CHECK(std::abs(m.delta_phase - static_cast<double>(oracle)) < 1e-7);
      }
    }
  }
}

TEST_CASE("tdcp residual") {
  const auto run = noise_free_run();
  const geodesy::FrameSet& fr = run.frames;

  SUBCASE("unaccepted measurement throws") {
    auto tdcp = build_tdcp(run.gnss[0], run.gnss[1]);
    REQUIRE_FALSE(tdcp.empty());
    const NavState xa = state_from_truth(run.truth[0]);
    const NavState xb = state_from_truth(run.truth[1]);
    const auto& m = tdcp.front();
    CHECK_THROWS_AS((void)tdcp_residual(m, run.gnss[0].sat_states.at(m.sat_id),
                                        run.gnss[1].sat_states.at(m.sat_id), xa, xb, fr),
                    std::logic_error);
  }
  SUBCASE("zero at ground truth") {
    for (size_t k = 0; k + 1 < run.gnss.size(); ++k) {
      auto tdcp = build_tdcp(run.gnss[k], run.gnss[k + 1]);
      const NavState xa = state_from_truth(run.truth[k]);
      const NavState xb = state_from_truth(run.truth[k + 1]);
      for (auto& m : tdcp) {
        m.accepted = true;
        const double r =
            tdcp_residual(m, run.gnss[k].sat_states.at(m.sat_id),
                          run.gnss[k + 1].sat_states.at(m.sat_id), xa, xb, fr);
        CHECK(std::abs(r) < 1e-9);
      }
    }
  }
  SUBCASE("invariant to a common clock shift") {
    auto tdcp = build_tdcp(run.gnss[0], run.gnss[1]);
    NavState xa = state_from_truth(run.truth[0]);
    NavState xb = state_from_truth(run.truth[1]);
    for (auto& m : tdcp) {
      m.accepted = true;
      const auto& sa = run.gnss[0].sat_states.at(m.sat_id);
      const auto& sb = run.gnss[1].sat_states.at(m.sat_id);
      const double r0 = tdcp_residual(m, sa, sb, xa, xb, fr);
      NavState xa2 = xa, xb2 = xb;
      xa2.clock_bias += 7.5;
      xb2.clock_bias += 7.5;
      const double r1 = tdcp_residual(m, sa, sb, xa2, xb2, fr);
      CHECK(std::abs(r1 - r0) < 1e-8);
    }
  }
  SUBCASE("analytic Jacobians match extended-precision central differences") {
    std::mt19937_64 rng(53);
    const geodesy::FrameSet frames = testutil::default_frames();
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
      const NavState xa = testutil::random_state(rng);
      const NavState xb = testutil::random_state(rng);
      const SatelliteState sa = testutil::random_satellite(rng, frames);
      SatelliteState sb = sa;
      sb.position_ecef += Vec3(900.0, -400.0, 600.0);  // one second of orbit
      TdcpMeasurement m;
      m.sat_id = 1;
      m.accepted = true;
      m.wavelength = 0.192;
      m.phase_k =
          static_cast<double>(testutil::carrier_phase_model_ld(sa, xa, frames)) /
          m.wavelength;
      m.phase_k1 =
          static_cast<double>(testutil::carrier_phase_model_ld(sb, xb, frames)) /
              m.wavelength +
          0.4;
      Eigen::Matrix<double, 1, 17> jk, jk1;
      tdcp_residual(m, sa, sb, xa, xb, frames, &jk, &jk1);
      for (int c = 0; c < kStateDim; ++c) {
        Eigen::Matrix<double, kStateDim, 1> dv =
            Eigen::Matrix<double, kStateDim, 1>::Zero();
        dv(c) = h;
        const double fd_k = static_cast<double>(
            (testutil::tdcp_residual_ld(m, sa, sb, xa.boxplus(dv), xb, frames) -
             testutil::tdcp_residual_ld(m, sa, sb, xa.boxplus(-dv), xb, frames)) /
            (2.0L * h));
        const double fd_k1 = static_cast<double>(
            (testutil::tdcp_residual_ld(m, sa, sb, xa, xb.boxplus(dv), frames) -
             testutil::tdcp_residual_ld(m, sa, sb, xa, xb.boxplus(-dv), frames)) /
            (2.0L * h));
        CHECK(std::abs(fd_k - jk(c)) / std::max(1.0, std::abs(jk(c))) < 1e-5);
        CHECK(std::abs(fd_k1 - jk1(c)) / std::max(1.0, std::abs(jk1(c))) < 1e-5);
      }
    }
  }
}

TEST_CASE("clock drift residual") {
  NavState a, b;
  a.clock_bias = 120.0;
  a.clock_drift = 0.4;

  SUBCASE("exact constant-drift motion gives zero") {
    b.clock_bias = a.clock_bias + a.clock_drift * 1.0;
    b.clock_drift = a.clock_drift;
    CHECK(clock_drift_residual(a, b, 1.0).norm() < 1e-12);
  }
  SUBCASE("a drift step appears in the second component") {
    b.clock_bias = a.clock_bias + a.clock_drift * 1.0;
    b.clock_drift = a.clock_drift + 0.1;
    const Vec2 r = clock_drift_residual(a, b, 1.0);
    CHECK(std::abs(r(1) - -0.1) < 1e-12);
  }
  SUBCASE("random states match the direct formula") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      NavState x = testutil::random_state(rng);
      NavState y = testutil::random_state(rng);
      const double dt = 0.5 + u(rng) * 0.4;
      const Vec2 r = clock_drift_residual(x, y, dt);
      CHECK(std::abs(r(0) - (x.clock_bias + x.clock_drift * dt - y.clock_bias)) < 1e-12);
      CHECK(std::abs(r(1) - (x.clock_drift - y.clock_drift)) < 1e-12);
    }
  }
  SUBCASE("non-positive dt throws") {
    CHECK_THROWS_AS(clock_drift_residual(a, b, 0.0), std::invalid_argument);
  }
}
