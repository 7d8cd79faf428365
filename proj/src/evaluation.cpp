#include "radnav/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace radnav::eval {

namespace {

// Index of the truth state closest in time to t, over a sorted stream.
size_t nearest_index(const std::vector<io::EstimateRecord>& truth, double t) {
  auto it = std::lower_bound(
      truth.begin(), truth.end(), t,
      [](const io::EstimateRecord& r, double value) { return r.t < value; });
  if (it == truth.begin()) return 0;
  if (it == truth.end()) return truth.size() - 1;
  const size_t hi = static_cast<size_t>(it - truth.begin());
  return (t - truth[hi - 1].t) <= (truth[hi].t - t) ? hi - 1 : hi;
}

}  // namespace

Metrics compare_trajectories(const io::StampedTrajectory& estimate,
                             const io::StampedTrajectory& truth, double max_dt,
                             double min_overlap) {
  if (estimate.states.empty()) throw io::DataError("estimate trajectory is empty");
  if (truth.states.empty()) throw io::DataError("truth trajectory is empty");

  // Map estimate positions into the truth ENU frame if the origins differ.
  bool reframe = false;
  geodesy::FrameSet frame_est, frame_truth;
  if (estimate.has_origin && truth.has_origin) {
    const auto& a = estimate.enu_origin;
    const auto& b = truth.enu_origin;
    reframe = std::abs(a.latitude - b.latitude) > 1e-15 ||
              std::abs(a.longitude - b.longitude) > 1e-15 ||
              std::abs(a.height - b.height) > 1e-9;
    if (reframe) {
      frame_est = geodesy::FrameSet::make(a, Vec3::Zero(), Mat3::Identity());
      frame_truth = geodesy::FrameSet::make(b, Vec3::Zero(), Mat3::Identity());
    }
  }
  const Mat3 rot_truth_from_est =
      reframe ? Mat3(frame_truth.rotation_ecef_from_enu.transpose() *
                     frame_est.rotation_ecef_from_enu)
              : Mat3::Identity();
  const Quat q_truth_from_est(rot_truth_from_est);

  Metrics m;
  Vec3 abs_sum = Vec3::Zero();
  Vec3 sq_sum = Vec3::Zero();
  double sq_2d = 0.0, sq_3d = 0.0, sq_att = 0.0;
  for (const auto& est : estimate.states) {
    const size_t idx = nearest_index(truth.states, est.t);
    const auto& ref = truth.states[idx];
    if (std::abs(ref.t - est.t) > max_dt) continue;
    Vec3 p = est.position;
    Quat q = est.orientation;
    if (reframe) {
      p = frame_truth.ecef_to_enu(frame_est.enu_to_ecef(p));
      q = q_truth_from_est * q;
    }
    const Vec3 err = p - ref.position;
    abs_sum += err.cwiseAbs();
    sq_sum += err.cwiseAbs2();
    sq_2d += err.head<2>().squaredNorm();
    sq_3d += err.squaredNorm();
    const double att = quat_log(ref.orientation.conjugate() * q.normalized()).norm();
    sq_att += att * att;
    ++m.matched;
  }

  m.overlap_fraction = double(m.matched) / double(estimate.states.size());
  if (m.overlap_fraction < min_overlap) {
    std::ostringstream os;
    os << "trajectory overlap too small: matched " << m.matched << " of "
       << estimate.states.size() << " states (" << m.overlap_fraction * 100.0
       << "%, need " << min_overlap * 100.0 << "%)";
    throw io::DataError(os.str());
  }
  const double n = double(m.matched);
  m.mae = abs_sum / n;
  m.rmse = (sq_sum / n).cwiseSqrt();
  m.rmse_2d = std::sqrt(sq_2d / n);
  m.rmse_3d = std::sqrt(sq_3d / n);
  m.attitude_rmse_deg = std::sqrt(sq_att / n) * 180.0 / M_PI;
  return m;
}

std::string metrics_report(const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << "matched states:    " << m.matched << " (" << m.overlap_fraction * 100.0
     << "% overlap)\n"
     << "MAE  E/N/U [m]:    " << m.mae.x() << " / " << m.mae.y() << " / "
     << m.mae.z() << "\n"
     << "RMSE E/N/U [m]:    " << m.rmse.x() << " / " << m.rmse.y() << " / "
     << m.rmse.z() << "\n"
     << "RMSE 2D [m]:       " << m.rmse_2d << "\n"
     << "RMSE 3D [m]:       " << m.rmse_3d << "\n"
     << "attitude RMSE [deg]: " << m.attitude_rmse_deg << "\n";
  return os.str();
}

}  // namespace radnav::eval
