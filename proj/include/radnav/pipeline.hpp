#pragma once

#include <deque>
#include <string>
#include <vector>

#include "radnav/dataset_io.hpp"
#include "radnav/graph_backend.hpp"
#include "radnav/run_config.hpp"

namespace radnav {

struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EpochDiagnostics {
  double t = 0.0;
  ConvergenceReport report;
  FactorCounts counts;  // graph-wide after this epoch
  int tdcp_accepted = 0;
  int tdcp_rejected = 0;
  bool gmm_active = false;
  GmmNoiseModel gmm;
};

struct FusionDiagnostics {
  int epochs = 0;
  int tdcp_accepted = 0;
  int tdcp_rejected = 0;
  int radar_valid = 0;
  int radar_invalid = 0;
  int gmm_refits = 0;
  double initial_gdop = 0.0;
  std::vector<EpochDiagnostics> per_epoch;
};

struct FusionResult {
  std::vector<io::EstimateRecord> estimates;  // one per epoch, smoothed
  geodesy::GeodeticPoint enu_origin;
  FusionDiagnostics diagnostics;
};

// Run the full sliding-window fusion over in-memory sensor streams
// (each sorted by timestamp). Throws EstimationError when the solution
// cannot be bootstrapped or the optimizer breaks down.
FusionResult run_fusion(const std::vector<ImuSample>& imu,
                        const std::vector<RadarScan>& radar,
                        const std::vector<GnssEpoch>& gnss,
                        const RunConfig& config);

// Convenience wrapper: stream the dataset from disk, then fuse.
FusionResult run_fusion_file(const std::string& dataset_path,
                             const RunConfig& config);

}  // namespace radnav
