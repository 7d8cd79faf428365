#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "radnav/gnss_models.hpp"
#include "radnav/imu_preintegration.hpp"
#include "radnav/radar_ego_velocity.hpp"
#include "radnav/simulator.hpp"

namespace radnav::io {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Record = std::variant<ImuSample, RadarScan, GnssEpoch, sim::TruthRecord>;

// Line-delimited JSON records, sorted by t (imu < radar_scan <
// gnss_epoch at equal timestamps).
void write_dataset(const std::string& path, const std::vector<ImuSample>& imu,
                   const std::vector<RadarScan>& radar,
                   const std::vector<GnssEpoch>& gnss);

void write_ground_truth(const std::string& path,
                        const std::vector<sim::TruthRecord>& truth,
                        const geodesy::GeodeticPoint& enu_origin);

// Streams records in file order; unknown record types are skipped with
// a warning on stderr. Throws DataError with the line number on
// malformed input.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path);
  ~DatasetReader();
  std::optional<Record> next();

 private:
  struct Impl;
  Impl* impl_;
};

struct EstimateRecord {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  double clock_bias = 0.0;
  double clock_drift = 0.0;
};

void write_trajectory(const std::string& path,
                      const std::vector<EstimateRecord>& estimates,
                      const geodesy::GeodeticPoint& enu_origin);

struct StampedTrajectory {
  std::vector<EstimateRecord> states;
  geodesy::GeodeticPoint enu_origin;
  bool has_origin = false;
};

// Reads either a trajectory file or a ground-truth file.
StampedTrajectory read_trajectory(const std::string& path);

}  // namespace radnav::io
