#pragma once

#include <string>

#include "radnav/dataset_io.hpp"

namespace radnav::eval {

struct Metrics {
  Vec3 mae = Vec3::Zero();    // per ENU axis, m
  Vec3 rmse = Vec3::Zero();   // per ENU axis, m
  double rmse_2d = 0.0;       // horizontal, m
  double rmse_3d = 0.0;       // m
  double attitude_rmse_deg = 0.0;
  size_t matched = 0;
  double overlap_fraction = 0.0;  // matched / estimate count
};

// Nearest-neighbour association within `max_dt` seconds. When the two
// files carry different ENU origins the estimate is re-expressed in the
// truth frame through ECEF before differencing. Throws io::DataError if
// fewer than `min_overlap` of the estimate states find a truth match.
Metrics compare_trajectories(const io::StampedTrajectory& estimate,
                             const io::StampedTrajectory& truth,
                             double max_dt = 0.01, double min_overlap = 0.9);

std::string metrics_report(const Metrics& m);

}  // namespace radnav::eval
