#include "radnav/radar_ego_velocity.hpp"

#include <cmath>
#include <stdexcept>

namespace radnav {

namespace {

Vec2 direction_cosines_2d(const RadarPoint& pt) {
  const double l = pt.position.norm();
  return Vec2(pt.position.x() / l, pt.position.y() / l);
}

// least squares v2d over the given point subset
bool solve_2d(const std::vector<RadarPoint>& scan, const std::vector<int>& idx,
              Vec2* v2d) {
  Eigen::Matrix2d ata = Eigen::Matrix2d::Zero();
  Vec2 atb = Vec2::Zero();
  for (int i : idx) {
    const Vec2 d = direction_cosines_2d(scan[i]);
    ata += d * d.transpose();
    atb += d * scan[i].doppler;
  }
  if (std::abs(ata.determinant()) < 1e-12) return false;
  *v2d = ata.ldlt().solve(atb);
  return true;
}

}  // namespace

EgoVelocityEstimate estimate_ego_velocity(const std::vector<RadarPoint>& scan,
                                          const RansacConfig& config,
                                          const Mat3& rotation_body_from_radar) {
  EgoVelocityEstimate est;
  const int n = static_cast<int>(scan.size());
  if (n < config.min_points) return est;

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::vector<int> best_inliers;
  for (int it = 0; it < config.iterations; ++it) {
    const int i = pick(rng);
    int j = pick(rng);
    if (j == i) j = (j + 1) % n;
    Vec2 v2d;
    if (!solve_2d(scan, {i, j}, &v2d)) continue;
    std::vector<int> inliers;
    inliers.reserve(n);
    for (int k = 0; k < n; ++k) {
      const Vec2 d = direction_cosines_2d(scan[k]);
      if (std::abs(d.dot(v2d) - scan[k].doppler) < config.inlier_threshold)
        inliers.push_back(k);
    }
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
    if (static_cast<double>(best_inliers.size()) >= config.early_exit_fraction * n)
      break;
  }

  if (static_cast<int>(best_inliers.size()) < config.min_points) return est;
  if (static_cast<double>(best_inliers.size()) < config.min_consensus_fraction * n)
    return est;

  Vec2 v2d;
  if (!solve_2d(scan, best_inliers, &v2d)) return est;
  // refine the consensus set once with the least-squares solution
  std::vector<int> inliers;
  for (int k = 0; k < n; ++k) {
    const Vec2 d = direction_cosines_2d(scan[k]);
    if (std::abs(d.dot(v2d) - scan[k].doppler) < config.inlier_threshold)
      inliers.push_back(k);
  }
  if (static_cast<int>(inliers.size()) >= config.min_points &&
      solve_2d(scan, inliers, &v2d)) {
    est.inlier_indices = std::move(inliers);
  } else {
    est.inlier_indices = std::move(best_inliers);
  }

  double ss = 0.0;
  for (int k : est.inlier_indices) {
    const Vec2 d = direction_cosines_2d(scan[k]);
    const double r = d.dot(v2d) - scan[k].doppler;
    ss += r * r;
  }
  est.v2d_radar = v2d;
  est.residual_rms = std::sqrt(ss / est.inlier_indices.size());
  const Vec3 v_body = rotation_body_from_radar * Vec3(v2d.x(), v2d.y(), 0.0);
  est.body_velocity = Vec3(v_body.x(), 0.0, 0.0);
  est.valid = true;
  return est;
}

void PreintegratedRadarVelocity::integrate(const Vec3& v_body, const Quat& gamma_t,
                                           double dt, double sigma_velocity) {
  if (dt <= 0.0) throw std::invalid_argument("PreintegratedRadarVelocity: dt <= 0");
  eta += gamma_t * v_body * dt;
  covariance += Mat3::Identity() * sigma_velocity * sigma_velocity * dt * dt;
  dt_total += dt;
  covered_dt += dt;
}

void PreintegratedRadarVelocity::add_gap(double dt) {
  if (dt <= 0.0) throw std::invalid_argument("PreintegratedRadarVelocity: dt <= 0");
  dt_total += dt;
}

void PreintegratedRadarVelocity::finalize() {
  if (covered_dt <= 0.0 || dt_total <= 0.0) return;
  covariance *= dt_total / covered_dt;
}

Vec3 radar_velocity_residual(const PreintegratedRadarVelocity& p,
                             const NavState& x_k, const NavState& x_k1,
                             Eigen::Matrix<double, 3, 17>* jac_k,
                             Eigen::Matrix<double, 3, 17>* jac_k1) {
  const Mat3 rk_t = x_k.orientation.toRotationMatrix().transpose();
  const Vec3 dp = x_k1.position - x_k.position;
  const Vec3 r = rk_t * dp - p.eta;
  if (jac_k) {
    jac_k->setZero();
    jac_k->block<3, 3>(0, 0) = -rk_t;
    jac_k->block<3, 3>(0, 6) = skew(rk_t * dp);
  }
  if (jac_k1) {
    jac_k1->setZero();
    jac_k1->block<3, 3>(0, 0) = rk_t;
  }
  return r;
}

}  // namespace radnav
