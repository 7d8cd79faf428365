#include "radnav/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "radnav/evaluation.hpp"
#include "radnav/robustification.hpp"

namespace radnav {

namespace {

// IMU samples spanning [t0, t1] inclusive, with linearly interpolated
// boundary samples when the stream has none exactly at the endpoints.
std::vector<ImuSample> imu_slice(const std::vector<ImuSample>& imu, double t0,
                                 double t1) {
  constexpr double kEps = 1e-9;
  auto lo = std::lower_bound(imu.begin(), imu.end(), t0 - kEps,
                             [](const ImuSample& s, double t) { return s.timestamp < t; });
  auto hi = std::upper_bound(imu.begin(), imu.end(), t1 + kEps,
                             [](double t, const ImuSample& s) { return t < s.timestamp; });
  std::vector<ImuSample> out;
  const auto interp = [](const ImuSample& a, const ImuSample& b, double t) {
    const double u = (t - a.timestamp) / (b.timestamp - a.timestamp);
    ImuSample s;
    s.timestamp = t;
    s.accel = (1.0 - u) * a.accel + u * b.accel;
    s.gyro = (1.0 - u) * a.gyro + u * b.gyro;
    return s;
  };
  if (lo == hi) {
    if (lo == imu.begin() || lo == imu.end())
      throw EstimationError("no IMU coverage over GNSS interval");
    out.push_back(interp(*(lo - 1), *lo, t0));
    out.push_back(interp(*(lo - 1), *lo, t1));
    return out;
  }
  if (lo->timestamp > t0 + kEps) {
    if (lo == imu.begin()) throw EstimationError("IMU stream starts after GNSS epoch");
    out.push_back(interp(*(lo - 1), *lo, t0));
  }
  out.insert(out.end(), lo, hi);
  if (out.back().timestamp < t1 - kEps) {
    if (hi == imu.end()) throw EstimationError("IMU stream ends before GNSS epoch");
    out.push_back(interp(*(hi - 1), *hi, t1));
  }
  return out;
}

Eigen::Matrix<double, kStateDim, 1> initial_prior_sigmas() {
  Eigen::Matrix<double, kStateDim, 1> s;
  s.segment<3>(0) = Vec3::Constant(5.0);    // position, m
  s.segment<3>(3) = Vec3::Constant(1.0);    // velocity, m/s
  s.segment<3>(6) = Vec3(0.2, 0.2, 0.3);    // attitude, rad
  s.segment<3>(9) = Vec3::Constant(0.1);    // accel bias
  s.segment<3>(12) = Vec3::Constant(0.01);  // gyro bias
  s(15) = 10.0;                             // clock bias, m
  s(16) = 1.0;                              // clock drift, m/s
  return s;
}

io::EstimateRecord to_record(const NavState& x) {
  io::EstimateRecord r;
  r.t = x.timestamp;
  r.position = x.position;
  r.velocity = x.velocity;
  r.orientation = x.orientation;
  r.accel_bias = x.accel_bias;
  r.gyro_bias = x.gyro_bias;
  r.clock_bias = x.clock_bias;
  r.clock_drift = x.clock_drift;
  return r;
}

}  // namespace

FusionResult run_fusion(const std::vector<ImuSample>& imu,
                        const std::vector<RadarScan>& radar,
                        const std::vector<GnssEpoch>& gnss,
                        const RunConfig& config) {
  if (gnss.size() < 2) throw EstimationError("need at least two GNSS epochs");
  if (imu.size() < 2) throw EstimationError("need at least two IMU samples");

  // Bootstrap from the first two fixes with enough satellites.
  size_t first = 0;
  while (first + 1 < gnss.size() && (gnss[first].observations.size() < 4 ||
                                     gnss[first + 1].observations.size() < 4)) {
    ++first;
  }
  std::vector<ImuSample> init_buffer;
  for (const auto& s : imu) {
    if (s.timestamp >= gnss[first].timestamp &&
        s.timestamp <= gnss[first + 1].timestamp) {
      init_buffer.push_back(s);
    }
  }
  const InitializationResult init =
      initialize_from_epochs(gnss[first], gnss[first + 1], init_buffer);
  if (!init.valid) throw EstimationError("initialization failed: no valid SPP fix pair");

  const geodesy::GeodeticPoint origin =
      config.enu_origin ? *config.enu_origin : init.enu_origin;
  const geodesy::FrameSet frames =
      geodesy::FrameSet::make(origin, config.lever_arm_gnss, config.radar_rotation());

  // Re-express the bootstrap state in the chosen ENU frame; the SPP fix
  // is the antenna, so undo the lever arm for the body position.
  const SppResult fix = solve_spp(gnss[first]);
  const Mat3 r_init = geodesy::ecef_from_enu_rotation(init.enu_origin);
  const Mat3 r_rel = frames.rotation_ecef_from_enu.transpose() * r_init;
  NavState x0 = init.state;
  x0.orientation = (Quat(r_rel) * init.state.orientation).normalized();
  x0.velocity = r_rel * init.state.velocity;
  x0.position = frames.ecef_to_enu(fix.position_ecef) -
                x0.orientation * config.lever_arm_gnss;

  FusionResult out;
  out.enu_origin = origin;
  out.diagnostics.initial_gdop = init.gdop;

  Problem problem(frames, config.backend);
  problem.set_initial_state(x0, initial_prior_sigmas());

  // Smoothed output: every optimize pass refreshes all in-window states.
  std::map<double, io::EstimateRecord> estimates;
  estimates[x0.timestamp] = to_record(x0);

  std::deque<double> gmm_residuals;
  std::shared_ptr<const GmmCost> gmm;
  GnssEpoch prev_epoch;  // elevation-filtered epoch at the previous state
  {
    const Vec3 ant = receiver_antenna_ecef(x0.position, x0.orientation, frames);
    prev_epoch = elevation_filter(gnss[first], ant, config.elevation_mask);
  }

  Vec3 last_radar_velocity = Vec3::Zero();
  bool last_radar_velocity_valid = false;
  size_t radar_cursor = 0;
  while (radar_cursor < radar.size() &&
         radar[radar_cursor].timestamp <= gnss[first].timestamp) {
    ++radar_cursor;
  }

  for (size_t k = first + 1; k < gnss.size(); ++k) {
    const double t_prev = problem.latest_state().timestamp;
    const double t_cur = gnss[k].timestamp;
    if (t_cur <= t_prev) continue;

    const ImuBias bias{problem.latest_state().accel_bias,
                       problem.latest_state().gyro_bias};
    PreintegratedImu preint(t_prev, bias, config.imu_noise);
    const std::vector<ImuSample> samples = imu_slice(imu, t_prev, t_cur);
    for (size_t i = 0; i + 1 < samples.size(); ++i) {
      preint.integrate(samples[i], samples[i + 1]);
    }

    // Radar quadrature over the interval: each scan covers the
    // sub-interval reaching back to the previous boundary.
    PreintegratedRadarVelocity preint_radar;
    double mark = t_prev;
    while (radar_cursor < radar.size() &&
           radar[radar_cursor].timestamp <= t_cur + 1e-9) {
      const RadarScan& scan = radar[radar_cursor];
      const double dt = scan.timestamp - mark;
      if (dt > 1e-9) {
        const EgoVelocityEstimate est = estimate_ego_velocity(
            scan.points, config.ransac, frames.rotation_body_from_radar);
        if (est.valid) {
          // trapezoid over consecutive scan velocities, rotation at the
          // sub-interval midpoint
          const Vec3 v = last_radar_velocity_valid
                             ? Vec3(0.5 * (last_radar_velocity + est.body_velocity))
                             : est.body_velocity;
          preint_radar.integrate(v, preint.gamma_at(0.5 * (mark + scan.timestamp)),
                                 dt, config.sigma_radar_velocity);
          ++out.diagnostics.radar_valid;
        } else {
          preint_radar.add_gap(dt);
          ++out.diagnostics.radar_invalid;
        }
        last_radar_velocity = est.valid ? est.body_velocity : Vec3::Zero();
        last_radar_velocity_valid = est.valid;
        mark = scan.timestamp;
      }
      ++radar_cursor;
    }
    if (t_cur - mark > 1e-9) preint_radar.add_gap(t_cur - mark);
    preint_radar.finalize();

    // Elevation mask at the predicted antenna position.
    const NavState x_pred = preint.predict(problem.latest_state(),
                                           config.backend.gravity);
    const Vec3 ant_pred =
        receiver_antenna_ecef(x_pred.position, x_pred.orientation, frames);
    const GnssEpoch epoch = elevation_filter(gnss[k], ant_pred, config.elevation_mask);

    // TDCP candidates gated by the Doppler slip detector.
    std::vector<TdcpMeasurement> tdcp;
    if (!prev_epoch.observations.empty()) {
      tdcp = build_tdcp(prev_epoch, epoch);
      for (auto& m : tdcp) {
        const auto& obs_k = prev_epoch.observations.at(m.sat_id);
        const auto& obs_k1 = epoch.observations.at(m.sat_id);
        const CycleSlipCheck check = detect_cycle_slip(
            obs_k.carrier_phase, obs_k1.carrier_phase, obs_k.doppler, obs_k1.doppler,
            obs_k1.wavelength, m.t_k1 - m.t_k, config.cycle_slip_threshold,
            config.doppler_sign);
        m.accepted = check.passed;
        ++(m.accepted ? out.diagnostics.tdcp_accepted : out.diagnostics.tdcp_rejected);
      }
    }

    // Rolling pseudorange residual window at the predicted state feeds
    // the mixture fit used to robustify the current epoch.
    if (config.backend.use_gmm) {
      for (const auto& [id, obs] : epoch.observations) {
        gmm_residuals.push_back(
            pseudorange_residual(obs, epoch.sat_states.at(id), x_pred, frames));
        if (static_cast<int>(gmm_residuals.size()) > config.gmm_window)
          gmm_residuals.pop_front();
      }
      if (static_cast<int>(gmm_residuals.size()) >= config.gmm_min_residuals) {
        const std::vector<double> r(gmm_residuals.begin(), gmm_residuals.end());
        try {
          const EmResult em = fit_gmm(r, default_gmm_init(r));
          gmm = std::make_shared<GmmCost>(em.model);
          ++out.diagnostics.gmm_refits;
        } catch (const std::exception&) {
          // keep the previous model on a degenerate fit
        }
      }
    }

    EpochInput input;
    input.preint_imu = preint;
    if (preint_radar.covered_dt > 0.0) input.preint_radar = preint_radar;
    input.epoch = epoch;
    input.tdcp = std::move(tdcp);
    input.previous_epoch = &prev_epoch;
    input.gmm = gmm;
    problem.add_epoch(input);

    const ConvergenceReport report = problem.optimize();
    EpochDiagnostics ed;
    ed.t = t_cur;
    ed.report = report;
    ed.counts = problem.factor_counts();
    for (const auto& m : input.tdcp) ++(m.accepted ? ed.tdcp_accepted : ed.tdcp_rejected);
    if (gmm) {
      ed.gmm_active = true;
      ed.gmm = gmm->model();
    }
    out.diagnostics.per_epoch.push_back(std::move(ed));
    ++out.diagnostics.epochs;
    if (report.rank_deficient) {
      throw EstimationError("optimizer failed at t=" + std::to_string(t_cur) + ": " +
                            report.termination);
    }

    for (const auto& x : problem.states()) estimates[x.timestamp] = to_record(x);
    prev_epoch = epoch;
  }

  out.estimates.reserve(estimates.size());
  for (const auto& [t, r] : estimates) out.estimates.push_back(r);
  return out;
}

FusionResult run_fusion_file(const std::string& dataset_path, const RunConfig& config) {
  std::vector<ImuSample> imu;
  std::vector<RadarScan> radar;
  std::vector<GnssEpoch> gnss;
  io::DatasetReader reader(dataset_path);
  while (auto rec = reader.next()) {
    if (auto* s = std::get_if<ImuSample>(&*rec)) imu.push_back(*s);
    else if (auto* r = std::get_if<RadarScan>(&*rec)) radar.push_back(*r);
    else if (auto* g = std::get_if<GnssEpoch>(&*rec)) gnss.push_back(*g);
  }
  return run_fusion(imu, radar, gnss, config);
}

}  // namespace radnav
