#include "radnav/dataset_io.hpp"

#include <fstream>
#include <iostream>

#include <json.hpp>

namespace radnav::io {

using nlohmann::json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

Vec3 vec_from_json(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }
Quat quat_from_json(const json& j) {
  return Quat(j.at(0), j.at(1), j.at(2), j.at(3));
}

json imu_to_json(const ImuSample& s) {
  return {{"type", "imu"}, {"t", s.timestamp}, {"accel", vec_to_json(s.accel)},
          {"gyro", vec_to_json(s.gyro)}};
}

json radar_to_json(const RadarScan& s) {
  json pts = json::array();
  for (const auto& p : s.points) {
    pts.push_back({p.position.x(), p.position.y(), p.position.z(), p.doppler});
  }
  return {{"type", "radar_scan"}, {"t", s.timestamp}, {"points", pts}};
}

json gnss_to_json(const GnssEpoch& e) {
  json sats = json::array();
  for (const auto& [id, obs] : e.observations) {
    const auto& st = e.sat_states.at(id);
    sats.push_back({{"id", id},
                    {"pr", obs.pseudorange},
                    {"cp", obs.carrier_phase},
                    {"dop", obs.doppler},
                    {"snr", obs.snr},
                    {"wl", obs.wavelength},
                    {"pos", vec_to_json(st.position_ecef)},
                    {"clk", st.clock_error},
                    {"trop", st.tropo_delay},
                    {"iono", st.iono_delay}});
  }
  return {{"type", "gnss_epoch"}, {"t", e.timestamp}, {"sats", sats}};
}

ImuSample imu_from_json(const json& j) {
  ImuSample s;
  s.timestamp = j.at("t");
  s.accel = vec_from_json(j.at("accel"));
  s.gyro = vec_from_json(j.at("gyro"));
  return s;
}

RadarScan radar_from_json(const json& j) {
  RadarScan s;
  s.timestamp = j.at("t");
  for (const auto& p : j.at("points")) {
    RadarPoint pt;
    pt.position = Vec3(p.at(0), p.at(1), p.at(2));
    pt.doppler = p.at(3);
    s.points.push_back(pt);
  }
  return s;
}

GnssEpoch gnss_from_json(const json& j) {
  GnssEpoch e;
  e.timestamp = j.at("t");
  for (const auto& s : j.at("sats")) {
    const int id = s.at("id");
    SatelliteObservation obs;
    obs.sat_id = id;
    obs.pseudorange = s.at("pr");
    obs.carrier_phase = s.at("cp");
    obs.doppler = s.at("dop");
    obs.snr = s.at("snr");
    obs.wavelength = s.at("wl");
    SatelliteState st;
    st.position_ecef = vec_from_json(s.at("pos"));
    st.clock_error = s.at("clk");
    st.tropo_delay = s.at("trop");
    st.iono_delay = s.at("iono");
    e.observations.emplace(id, obs);
    e.sat_states.emplace(id, st);
  }
  return e;
}

json truth_to_json(const sim::TruthRecord& r) {
  return {{"type", "ground_truth"},
          {"t", r.t},
          {"p", vec_to_json(r.position)},
          {"v", vec_to_json(r.velocity)},
          {"q", quat_to_json(r.orientation)},
          {"ba", vec_to_json(r.accel_bias)},
          {"bg", vec_to_json(r.gyro_bias)},
          {"clk", r.clock_bias},
          {"clk_drift", r.clock_drift}};
}

}  // namespace

void write_dataset(const std::string& path, const std::vector<ImuSample>& imu,
                   const std::vector<RadarScan>& radar,
                   const std::vector<GnssEpoch>& gnss) {
  struct Entry {
    double t;
    int order;
    json j;
  };
  std::vector<Entry> entries;
  entries.reserve(imu.size() + radar.size() + gnss.size());
  for (const auto& s : imu) entries.push_back({s.timestamp, 0, imu_to_json(s)});
  for (const auto& s : radar) entries.push_back({s.timestamp, 1, radar_to_json(s)});
  for (const auto& e : gnss) entries.push_back({e.timestamp, 2, gnss_to_json(e)});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.t < b.t || (a.t == b.t && a.order < b.order);
  });
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  for (const auto& e : entries) f << e.j.dump() << "\n";
}

void write_ground_truth(const std::string& path,
                        const std::vector<sim::TruthRecord>& truth,
                        const geodesy::GeodeticPoint& enu_origin) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << json{{"type", "meta"},
            {"enu_origin",
             {{"lat", enu_origin.latitude},
              {"lon", enu_origin.longitude},
              {"height", enu_origin.height}}}}
           .dump()
    << "\n";
  for (const auto& r : truth) f << truth_to_json(r).dump() << "\n";
}

struct DatasetReader::Impl {
  std::ifstream file;
  std::string path;
  long line_number = 0;
};

DatasetReader::DatasetReader(const std::string& path) : impl_(new Impl) {
  impl_->file.open(path);
  impl_->path = path;
  if (!impl_->file) {
    delete impl_;
    throw DataError("cannot open dataset: " + path);
  }
}

DatasetReader::~DatasetReader() { delete impl_; }

std::optional<Record> DatasetReader::next() {
  std::string line;
  while (std::getline(impl_->file, line)) {
    ++impl_->line_number;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "imu") return Record{imu_from_json(j)};
      if (type == "radar_scan") return Record{radar_from_json(j)};
      if (type == "gnss_epoch") return Record{gnss_from_json(j)};
      std::cerr << "warning: " << impl_->path << ":" << impl_->line_number
                << ": skipping unknown record type '" << type << "'\n";
    } catch (const json::exception& e) {
      throw DataError(impl_->path + ":" + std::to_string(impl_->line_number) +
                      ": malformed record: " + e.what());
    }
  }
  return std::nullopt;
}

void write_trajectory(const std::string& path,
                      const std::vector<EstimateRecord>& estimates,
                      const geodesy::GeodeticPoint& enu_origin) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open for writing: " + path);
  f << json{{"type", "meta"},
            {"enu_origin",
             {{"lat", enu_origin.latitude},
              {"lon", enu_origin.longitude},
              {"height", enu_origin.height}}}}
           .dump()
    << "\n";
  for (const auto& r : estimates) {
    f << json{{"type", "estimate"},
              {"t", r.t},
              {"p", vec_to_json(r.position)},
              {"v", vec_to_json(r.velocity)},
              {"q", quat_to_json(r.orientation)},
              {"ba", vec_to_json(r.accel_bias)},
              {"bg", vec_to_json(r.gyro_bias)},
              {"clk", r.clock_bias},
              {"clk_drift", r.clock_drift}}
             .dump()
      << "\n";
  }
}

StampedTrajectory read_trajectory(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open trajectory: " + path);
  StampedTrajectory out;
  std::string line;
  long line_number = 0;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "meta") {
        const auto& o = j.at("enu_origin");
        out.enu_origin = geodesy::GeodeticPoint(o.at("lat"), o.at("lon"), o.at("height"));
        out.has_origin = true;
        continue;
      }
      if (type != "estimate" && type != "ground_truth") continue;
      EstimateRecord r;
      r.t = j.at("t");
      r.position = vec_from_json(j.at("p"));
      r.velocity = vec_from_json(j.at("v"));
      r.orientation = quat_from_json(j.at("q"));
      if (j.contains("ba")) r.accel_bias = vec_from_json(j.at("ba"));
      if (j.contains("bg")) r.gyro_bias = vec_from_json(j.at("bg"));
      if (j.contains("clk")) r.clock_bias = j.at("clk");
      if (j.contains("clk_drift")) r.clock_drift = j.at("clk_drift");
      out.states.push_back(r);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_number) +
                      ": malformed record: " + e.what());
    }
  }
  return out;
}

}  // namespace radnav::io
