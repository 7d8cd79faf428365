#include "radnav/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace radnav::sim {

namespace {

constexpr double kGravityMag = 9.81;
constexpr double kMu = 3.986004418e14;  // m^3/s^2

struct KinematicSample {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

KinematicSample eval_trajectory(const TrajectorySpec& s, double t) {
  KinematicSample k;
  switch (s.type) {
    case TrajectoryType::kStatic:
      k.yaw = s.yaw0;
      break;
    case TrajectoryType::kStraight: {
      const Vec3 dir(std::cos(s.yaw0), std::sin(s.yaw0), 0.0);
      k.position = dir * s.speed * t;
      k.velocity = dir * s.speed;
      k.yaw = s.yaw0;
      break;
    }
    case TrajectoryType::kCircle: {
      const double w = s.speed / s.radius;
      const double a = w * t;
      k.position = Vec3(s.radius * std::sin(a), s.radius * (1.0 - std::cos(a)), 0.0);
      k.velocity = Vec3(s.speed * std::cos(a), s.speed * std::sin(a), 0.0);
      k.accel = Vec3(-s.speed * w * std::sin(a), s.speed * w * std::cos(a), 0.0);
      k.yaw = a;
      k.yaw_rate = w;
      break;
    }
    case TrajectoryType::kFigureEight: {
      const double w = 2.0 * M_PI / s.period;
      const double ae = s.amplitude_east, an = s.amplitude_north;
      k.position = Vec3(ae * std::sin(w * t), an * std::sin(2.0 * w * t), 0.0);
      k.velocity =
          Vec3(ae * w * std::cos(w * t), 2.0 * an * w * std::cos(2.0 * w * t), 0.0);
      k.accel = Vec3(-ae * w * w * std::sin(w * t),
                     -4.0 * an * w * w * std::sin(2.0 * w * t), 0.0);
      const Vec3 jerk(-ae * w * w * w * std::cos(w * t),
                      -8.0 * an * w * w * w * std::cos(2.0 * w * t), 0.0);
      const double v2 = k.velocity.head<2>().squaredNorm();
      k.yaw = std::atan2(k.velocity.y(), k.velocity.x());
      k.yaw_rate =
          (k.velocity.x() * k.accel.y() - k.velocity.y() * k.accel.x()) / v2;
      (void)jerk;
      break;
    }
  }
  return k;
}

Quat yaw_quat(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

// analytic body-frame specific force and angular rate at time t
void imu_truth(const TrajectorySpec& s, double t, Vec3* specific_force, Vec3* gyro) {
  const KinematicSample k = eval_trajectory(s, t);
  const Quat q = yaw_quat(k.yaw);
  const Vec3 gravity(0.0, 0.0, -kGravityMag);
  *specific_force = q.conjugate() * (k.accel - gravity);
  *gyro = Vec3(0.0, 0.0, k.yaw_rate);
}

struct Satellite {
  int id = 0;
  Vec3 axis_u = Vec3::Zero();
  Vec3 axis_v = Vec3::Zero();
  double radius = 0.0;
  double rate = 0.0;
  double clock_error = 0.0;
  double tropo = 0.0;
  double iono = 0.0;
  double ambiguity = 0.0;  // cycles, integer-valued; changes at injected slips
};

Vec3 satellite_position(const Satellite& s, double t) {
  const double a = s.rate * t;
  return s.radius * (s.axis_u * std::cos(a) + s.axis_v * std::sin(a));
}

struct ClockModel {
  double bias0 = 0.0;
  double drift = 0.0;
  double bias(double t) const { return bias0 + drift * t; }
};

}  // namespace

SimOutput generate(const Scenario& sc) {
  if (sc.imu_hz <= 0.0 || sc.radar_hz <= 0.0 || sc.gnss_hz <= 0.0) {
    throw std::invalid_argument("scenario: rates must be positive");
  }
  for (const auto& f : sc.multipath) {
    if (f.t_start < 0.0 || f.t_end > sc.duration)
      throw std::invalid_argument("scenario: multipath interval outside duration");
  }
  if (sc.radar_points_per_scan < 1)
    throw std::invalid_argument("scenario: radar frustum empty");

  SimOutput out;
  out.frames = geodesy::FrameSet::make(sc.origin, sc.lever_arm, sc.body_from_radar);
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // master integration grid: union of sensor clocks; every node carries
  // an IMU sample so discrete ground truth and preintegration share the
  // exact quadrature
  struct Node {
    double t = 0.0;
    bool radar = false;
    bool gnss = false;
  };
  std::vector<Node> nodes;
  const auto add_nodes = [&](double hz, bool radar, bool gnss) {
    const long count = std::lround(sc.duration * hz);
    for (long i = 0; i <= count; ++i) {
      const double t = static_cast<double>(i) / hz;
      if (t > sc.duration + 1e-9) break;
      nodes.push_back({t, radar, gnss});
    }
  };
  add_nodes(sc.imu_hz, false, false);
  add_nodes(sc.radar_hz, true, false);
  add_nodes(sc.gnss_hz, false, true);
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) {
    return a.t < b.t;
  });
  std::vector<Node> merged;
  for (const auto& n : nodes) {
    if (!merged.empty() && merged.back().t == n.t) {
      merged.back().radar |= n.radar;
      merged.back().gnss |= n.gnss;
    } else {
      merged.push_back(n);
    }
  }
  nodes = std::move(merged);

  // constellation on circular ECEF orbits, spread over the visible sky
  const Vec3 origin_ecef = out.frames.enu_origin_ecef;
  std::vector<Satellite> sats(sc.satellite_count);
  for (int i = 0; i < sc.satellite_count; ++i) {
    Satellite& s = sats[i];
    s.id = i + 1;
    const double el = (20.0 + 55.0 * ((i * 37) % 60) / 60.0) * M_PI / 180.0;
    const double az = 2.0 * M_PI * i / sc.satellite_count;
    const Vec3 los_enu(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az),
                       std::sin(el));
    const Vec3 p0 = origin_ecef + out.frames.rotation_ecef_from_enu * los_enu * 2.2e7;
    s.axis_u = p0.normalized();
    Vec3 v = s.axis_u.cross(Vec3::UnitZ());
    if (v.norm() < 1e-3) v = s.axis_u.cross(Vec3::UnitX());
    s.axis_v = v.normalized();
    s.radius = sc.orbit_radius;
    s.rate = std::sqrt(kMu / (s.radius * s.radius * s.radius));
    s.clock_error = 3.7 * (i + 1);
    s.tropo = 2.4 / std::max(std::sin(el), 0.1);
    s.iono = 3.5 / std::max(std::sin(el), 0.1);
  }

  const ClockModel clock{sc.clock_bias0, sc.clock_drift};

  // receiver antenna ECEF for a truth sample
  const auto antenna_ecef = [&](const Vec3& p_enu, const Quat& q) {
    return receiver_antenna_ecef(p_enu, q, out.frames);
  };
  // carrier phase in meters for satellite s at time t given truth pose
  const auto phase_model_m = [&](const Satellite& s, double t, const Vec3& p_enu,
                                 const Quat& q) {
    SatelliteState st;
    st.position_ecef = satellite_position(s, t);
    st.clock_error = s.clock_error;
    st.tropo_delay = s.tropo;
    st.iono_delay = s.iono;
    return carrier_phase_model(st, antenna_ecef(p_enu, q), clock.bias(t));
  };

  // initialize ambiguities so emitted phases stay small
  {
    const KinematicSample k0 = eval_trajectory(sc.trajectory, 0.0);
    const Quat q0 = yaw_quat(k0.yaw);
    for (auto& s : sats) {
      s.ambiguity = -std::round(phase_model_m(s, 0.0, k0.position, q0) / sc.wavelength);
    }
  }

  // discrete truth integration (shared strapdown quadrature)
  const KinematicSample k0 = eval_trajectory(sc.trajectory, 0.0);
  Quat q_true = yaw_quat(k0.yaw);
  Vec3 v_true = k0.velocity;
  Vec3 p_true = k0.position;
  const Vec3 gravity(0.0, 0.0, -kGravityMag);

  Vec3 f_prev, w_prev;
  imu_truth(sc.trajectory, nodes.front().t, &f_prev, &w_prev);

  std::vector<CycleSlipFault> pending_slips = sc.cycle_slips;
  std::sort(pending_slips.begin(), pending_slips.end(),
            [](const auto& a, const auto& b) { return a.t < b.t; });
  size_t slip_cursor = 0;

  for (size_t ni = 0; ni < nodes.size(); ++ni) {
    const Node& node = nodes[ni];
    const double t = node.t;
    Vec3 f_true, w_true;
    imu_truth(sc.trajectory, t, &f_true, &w_true);
    if (ni > 0) {
      strapdown_midpoint_step(q_true, v_true, p_true, f_prev, f_true, w_prev, w_true,
                              t - nodes[ni - 1].t, gravity);
    }
    f_prev = f_true;
    w_prev = w_true;

    // IMU sample at every node
    ImuSample imu;
    imu.timestamp = t;
    imu.accel = f_true + sc.accel_bias +
                sc.noise.accel * Vec3(gauss(rng), gauss(rng), gauss(rng));
    imu.gyro = w_true + sc.gyro_bias +
               sc.noise.gyro * Vec3(gauss(rng), gauss(rng), gauss(rng));
    out.imu.push_back(imu);

    while (slip_cursor < pending_slips.size() && pending_slips[slip_cursor].t <= t) {
      for (auto& s : sats) {
        if (s.id == pending_slips[slip_cursor].sat_id) {
          s.ambiguity += pending_slips[slip_cursor].cycles;
        }
      }
      ++slip_cursor;
    }

    if (node.radar) {
      RadarScan scan;
      scan.timestamp = t;
      const Vec3 v_body = q_true.conjugate() * v_true;
      const Vec3 v_radar = sc.body_from_radar.transpose() * v_body;
      for (int i = 0; i < sc.radar_points_per_scan; ++i) {
        const double az = (unif(rng) - 0.5) * (2.0 * M_PI / 3.0);  // +-60 deg
        const double el = (unif(rng) - 0.5) * (M_PI / 6.0);        // +-15 deg
        const double range = 2.0 + 78.0 * unif(rng);
        RadarPoint pt;
        pt.position = range * Vec3(std::cos(el) * std::cos(az),
                                   std::cos(el) * std::sin(az), std::sin(el));
        const Vec3 d = pt.position.normalized();
        pt.doppler = d.dot(v_radar) + sc.noise.radar_doppler * gauss(rng);
        if (unif(rng) < sc.radar_outlier_fraction) {
          const double mag = sc.radar_outlier_min_offset +
                             (sc.radar_outlier_max_offset - sc.radar_outlier_min_offset) *
                                 unif(rng);
          pt.doppler += (unif(rng) < 0.5 ? -1.0 : 1.0) * mag;
        }
        scan.points.push_back(pt);
      }
      out.radar.push_back(std::move(scan));
    }

    if (node.gnss) {
      TruthRecord tr;
      tr.t = t;
      tr.position = p_true;
      tr.velocity = v_true;
      tr.orientation = q_true;
      tr.accel_bias = sc.accel_bias;
      tr.gyro_bias = sc.gyro_bias;
      tr.clock_bias = clock.bias(t);
      tr.clock_drift = clock.drift;
      out.truth.push_back(tr);

      bool in_outage = false;
      for (const auto& o : sc.gnss_outages) {
        if (t >= o.t_start && t <= o.t_end) in_outage = true;
      }
      if (!in_outage) {
        GnssEpoch epoch;
        epoch.timestamp = t;
        const Vec3 p_ant = antenna_ecef(p_true, q_true);
        for (const auto& s : sats) {
          SatelliteState st;
          st.position_ecef = satellite_position(s, t);
          st.clock_error = s.clock_error;
          st.tropo_delay = s.tropo;
          st.iono_delay = s.iono;
          const auto ea = geodesy::elevation_azimuth(st.position_ecef, p_ant);
          if (ea.elevation < 10.0 * M_PI / 180.0) continue;

          SatelliteObservation obs;
          obs.sat_id = s.id;
          obs.wavelength = sc.wavelength;
          obs.pseudorange = pseudorange_model(st, p_ant, clock.bias(t)) +
                            sc.noise.pseudorange * gauss(rng);
          for (const auto& f : sc.multipath) {
            if (f.sat_id == s.id && t >= f.t_start && t <= f.t_end)
              obs.pseudorange += f.bias;
          }
          const double phase_m =
              carrier_phase_model(st, p_ant, clock.bias(t)) +
              sc.wavelength * s.ambiguity + sc.noise.phase * gauss(rng);
          obs.carrier_phase = phase_m / sc.wavelength;
          // range-rate Doppler from the analytic trajectory (ambiguity
          // excluded; consistent with the emitted sign convention)
          {
            const double h = 1e-3;
            const auto phase_at = [&](double tt) {
              const KinematicSample k = eval_trajectory(sc.trajectory, tt);
              return phase_model_m(s, tt, k.position, yaw_quat(k.yaw));
            };
            const double rate = (phase_at(t + h) - phase_at(t - h)) / (2.0 * h);
            obs.doppler = sc.doppler_sign * rate / sc.wavelength +
                          sc.noise.doppler * gauss(rng);
          }
          obs.snr = 45.0;
          epoch.observations.emplace(s.id, obs);
          epoch.sat_states.emplace(s.id, st);
        }
        out.gnss.push_back(std::move(epoch));
      }
    }

    TruthRecord td;
    td.t = t;
    td.position = p_true;
    td.velocity = v_true;
    td.orientation = q_true;
    td.accel_bias = sc.accel_bias;
    td.gyro_bias = sc.gyro_bias;
    td.clock_bias = clock.bias(t);
    td.clock_drift = clock.drift;
    out.truth_dense.push_back(td);
  }
  return out;
}

}  // namespace radnav::sim
