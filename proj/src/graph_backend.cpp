#include "radnav/graph_backend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radnav {

namespace {

// sqrt-information whitening: Sigma^{-1} = L L^T, whitened r = L^T r
template <int N>
Eigen::Matrix<double, N, N> sqrt_information(const Eigen::Matrix<double, N, N>& cov) {
  const Eigen::Matrix<double, N, N> info = cov.inverse();
  Eigen::LLT<Eigen::Matrix<double, N, N>> llt(0.5 * (info + info.transpose()));
  if (llt.info() == Eigen::Success) {
    return llt.matrixL().transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>> es(
      0.5 * (info + info.transpose()));
  Eigen::Matrix<double, N, 1> ev = es.eigenvalues().cwiseMax(0.0);
  return ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double ImuFactor::evaluate(const std::vector<const NavState*>& states,
                           Eigen::VectorXd* r, std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::Matrix<double, 15, 17> jk, jk1;
  const Eigen::Matrix<double, 15, 1> res =
      preint_.residual(*states[0], *states[1], gravity_, jacs ? &jk : nullptr,
                       jacs ? &jk1 : nullptr);
  if (!sqrt_info_ready_) {
    sqrt_info_ = sqrt_information<15>(preint_.covariance());
    sqrt_info_ready_ = true;
  }
  const Eigen::Matrix<double, 15, 1> wr = sqrt_info_ * res;
  if (r) *r = wr;
  if (jacs) {
    jacs->resize(2);
    (*jacs)[0] = sqrt_info_ * jk;
    (*jacs)[1] = sqrt_info_ * jk1;
  }
  return 0.5 * wr.squaredNorm();
}

double RadarVelocityFactor::evaluate(const std::vector<const NavState*>& states,
                                     Eigen::VectorXd* r,
                                     std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::Matrix<double, 3, 17> jk, jk1;
  const Vec3 res = radar_velocity_residual(preint_, *states[0], *states[1],
                                           jacs ? &jk : nullptr, jacs ? &jk1 : nullptr);
  const Mat3 sqrt_info = sqrt_information<3>(preint_.covariance);
  const Vec3 wr = sqrt_info * res;
  if (r) *r = wr;
  if (jacs) {
    jacs->resize(2);
    (*jacs)[0] = sqrt_info * jk;
    (*jacs)[1] = sqrt_info * jk1;
  }
  return 0.5 * wr.squaredNorm();
}

double ClockDriftFactor::evaluate(const std::vector<const NavState*>& states,
                                  Eigen::VectorXd* r,
                                  std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::Matrix<double, 2, 17> jk, jk1;
  const Vec2 res = clock_drift_residual(*states[0], *states[1], dt_,
                                        jacs ? &jk : nullptr, jacs ? &jk1 : nullptr);
  const Vec2 w(1.0 / sigma_bias_, 1.0 / sigma_drift_);
  const Vec2 wr = w.asDiagonal() * res;
  if (r) *r = wr;
  if (jacs) {
    jacs->resize(2);
    (*jacs)[0] = w.asDiagonal() * jk;
    (*jacs)[1] = w.asDiagonal() * jk1;
  }
  return 0.5 * wr.squaredNorm();
}

double TdcpFactor::evaluate(const std::vector<const NavState*>& states,
                            Eigen::VectorXd* r,
                            std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::Matrix<double, 1, 17> jk, jk1;
  const double res =
      tdcp_residual(m_, sat_k_, sat_k1_, *states[0], *states[1], *frames_,
                    jacs ? &jk : nullptr, jacs ? &jk1 : nullptr);
  const double wr = res / sigma_;
  if (r) {
    r->resize(1);
    (*r)(0) = wr;
  }
  if (jacs) {
    jacs->resize(2);
    (*jacs)[0] = jk / sigma_;
    (*jacs)[1] = jk1 / sigma_;
  }
  return 0.5 * wr * wr;
}

double PseudorangeFactor::evaluate(const std::vector<const NavState*>& states,
                                   Eigen::VectorXd* r,
                                   std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::Matrix<double, 1, 17> j;
  const double res =
      pseudorange_residual(obs_, sat_, *states[0], *frames_, jacs ? &j : nullptr);
  if (!std::isfinite(res)) {
    throw std::runtime_error("pseudorange factor: non-finite residual");
  }
  if (!gmm_) {
    const double wr = res / sigma_;
    if (r) {
      r->resize(1);
      (*r)(0) = wr;
    }
    if (jacs) {
      jacs->resize(1);
      (*jacs)[0] = j / sigma_;
    }
    return 0.5 * wr * wr;
  }
  // robust mixture cost via re-weighting at the current iterate:
  // weight w = c'(r)/r so that J^T J and J^T r match the cost gradient
  const auto [cost, grad] = gmm_->evaluate(res);
  double w = (std::abs(res) > 1e-9) ? grad / res : 1.0 / gmm_->model().variances[0];
  w = std::max(w, 1e-8);
  const double sw = std::sqrt(w);
  if (r) {
    r->resize(1);
    (*r)(0) = grad / sw;
  }
  if (jacs) {
    jacs->resize(1);
    (*jacs)[0] = sw * j;
  }
  return cost;
}

double MarginalPriorFactor::evaluate(const std::vector<const NavState*>& states,
                                     Eigen::VectorXd* r,
                                     std::vector<Eigen::MatrixXd>* jacs) const {
  Eigen::VectorXd res = r0_;
  for (size_t i = 0; i < lin_.size(); ++i) {
    res += jacs_[i] * states[i]->boxminus(lin_[i]);
  }
  if (r) *r = res;
  if (jacs) *jacs = jacs_;
  return 0.5 * res.squaredNorm();
}

void Problem::add_factor(std::unique_ptr<Factor> f) {
  for (uint64_t id : f->state_ids) index_of(id);  // validates membership
  factors_.push_back(std::move(f));
}

size_t Problem::index_of(uint64_t id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw std::logic_error("Problem: factor references out-of-window state");
  return static_cast<size_t>(it - ids_.begin());
}

double Problem::evaluate_factor(const Factor& f, Eigen::VectorXd* r,
                                std::vector<Eigen::MatrixXd>* jacs) const {
  std::vector<const NavState*> ptrs;
  ptrs.reserve(f.state_ids.size());
  for (uint64_t id : f.state_ids) ptrs.push_back(&states_[index_of(id)]);
  return f.evaluate(ptrs, r, jacs);
}

void Problem::set_initial_state(const NavState& x0,
                                const Eigen::Matrix<double, kStateDim, 1>& prior_sigmas) {
  if (!states_.empty()) throw std::logic_error("Problem: already initialized");
  states_.push_back(x0);
  ids_.push_back(next_id_++);
  Eigen::MatrixXd j = prior_sigmas.cwiseInverse().asDiagonal();
  auto prior = std::make_unique<MarginalPriorFactor>(
      Eigen::VectorXd::Zero(kStateDim), std::vector<Eigen::MatrixXd>{j},
      std::vector<NavState>{x0});
  prior->state_ids = {ids_.back()};
  factors_.push_back(std::move(prior));
}

void Problem::add_epoch(const EpochInput& input) {
  if (states_.empty()) {
    throw std::logic_error("Problem: add_epoch before initialization");
  }
  const NavState x_prev = states_.back();  // copy: push_back may reallocate
  const uint64_t prev_id = ids_.back();
  NavState x_new = input.preint_imu.predict(x_prev, config_.gravity);
  x_new.timestamp = input.epoch.timestamp;
  states_.push_back(x_new);
  ids_.push_back(next_id_++);
  const uint64_t new_id = ids_.back();

  auto imu = std::make_unique<ImuFactor>(input.preint_imu, config_.gravity);
  imu->state_ids = {prev_id, new_id};
  factors_.push_back(std::move(imu));

  const double dt = input.epoch.timestamp - x_prev.timestamp;
  auto clock = std::make_unique<ClockDriftFactor>(dt, config_.sigma_clock_bias,
                                                  config_.sigma_clock_drift);
  clock->state_ids = {prev_id, new_id};
  factors_.push_back(std::move(clock));

  if (config_.enable_radar && input.preint_radar.has_value() &&
      input.preint_radar->covered_dt > 0.0) {
    auto vel = std::make_unique<RadarVelocityFactor>(*input.preint_radar);
    vel->state_ids = {prev_id, new_id};
    factors_.push_back(std::move(vel));
  }

  for (const auto& [id, obs] : input.epoch.observations) {
    const auto& sat = input.epoch.sat_states.at(id);
    auto pr = std::make_unique<PseudorangeFactor>(
        obs, sat, &frames_, config_.sigma_pseudorange,
        config_.use_gmm ? input.gmm : nullptr);
    pr->state_ids = {new_id};
    factors_.push_back(std::move(pr));
  }

  if (config_.enable_tdcp && input.previous_epoch != nullptr) {
    for (const auto& m : input.tdcp) {
      if (!m.accepted) continue;
      const auto it_prev = input.previous_epoch->sat_states.find(m.sat_id);
      const auto it_cur = input.epoch.sat_states.find(m.sat_id);
      if (it_prev == input.previous_epoch->sat_states.end() ||
          it_cur == input.epoch.sat_states.end())
        continue;
      auto t = std::make_unique<TdcpFactor>(m, it_prev->second, it_cur->second,
                                            &frames_, config_.sigma_tdcp);
      t->state_ids = {prev_id, new_id};
      factors_.push_back(std::move(t));
    }
  }

  if (states_.size() > config_.window_size) marginalize_oldest();
}

double Problem::total_cost() const {
  double c = 0.0;
  for (const auto& f : factors_) c += evaluate_factor(*f, nullptr, nullptr);
  return c;
}

FactorCounts Problem::factor_counts() const {
  FactorCounts c;
  for (const auto& f : factors_) {
    const std::string n = f->name();
    if (n == "imu") ++c.imu;
    else if (n == "radar_velocity") ++c.radar_velocity;
    else if (n == "clock_drift") ++c.clock;
    else if (n == "pseudorange") ++c.pseudorange;
    else if (n == "tdcp") ++c.tdcp;
    else if (n == "prior") ++c.prior;
  }
  return c;
}

ConvergenceReport Problem::optimize() {
  const auto& cfg = config_.optimizer;
  const int n = static_cast<int>(states_.size());
  const int dim = n * kStateDim;
  ConvergenceReport rep;
  double lambda = cfg.initial_lambda;
  double cost = total_cost();
  rep.initial_cost = cost;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd r;
    std::vector<Eigen::MatrixXd> jacs;
    for (const auto& f : factors_) {
      evaluate_factor(*f, &r, &jacs);
      std::vector<size_t> idx;
      for (uint64_t id : f->state_ids) idx.push_back(index_of(id));
      for (size_t a = 0; a < idx.size(); ++a) {
        g.segment<kStateDim>(idx[a] * kStateDim) += jacs[a].transpose() * r;
        for (size_t b = 0; b < idx.size(); ++b) {
          H.block<kStateDim, kStateDim>(idx[a] * kStateDim, idx[b] * kStateDim) +=
              jacs[a].transpose() * jacs[b];
        }
      }
    }
    rep.gradient_norm = g.lpNorm<Eigen::Infinity>();
    rep.iterations = iter;
    if (rep.gradient_norm < cfg.gradient_tol) {
      rep.converged = true;
      rep.termination = "gradient norm below tolerance";
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal() += lambda * H.diagonal().cwiseMax(1e-9);
      const Eigen::VectorXd delta = Hd.ldlt().solve(-g);
      if (!delta.allFinite()) {
        rep.rank_deficient = true;
        rep.termination = "rank-deficient normal equations";
        rep.final_cost = cost;
        report_ = rep;
        return rep;
      }
      std::vector<NavState> candidate = states_;
      for (int i = 0; i < n; ++i) {
        candidate[i] = states_[i].boxplus(delta.segment<kStateDim>(i * kStateDim));
      }
      std::swap(candidate, states_);
      const double new_cost = total_cost();
      if (new_cost <= cost) {
        accepted = true;
        cost = new_cost;
        lambda = std::max(lambda * cfg.lambda_down, 1e-12);
        if (delta.norm() < cfg.step_tol) {
          rep.converged = true;
          rep.termination = "step norm below tolerance";
          rep.iterations = iter + 1;
          rep.final_cost = cost;
          report_ = rep;
          return rep;
        }
      } else {
        std::swap(candidate, states_);  // revert
        lambda *= cfg.lambda_up;
        if (lambda > 1e14) {
          rep.termination = "damping exhausted";
          rep.final_cost = cost;
          report_ = rep;
          return rep;
        }
      }
    }
    if (iter == cfg.max_iterations - 1) rep.termination = "max iterations";
  }
  if (rep.termination.empty()) rep.termination = "max iterations";
  rep.final_cost = cost;
  report_ = rep;
  return rep;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> marginalize_gaussian(
    const Eigen::MatrixXd& H, const Eigen::VectorXd& b, int drop_dim) {
  const int keep = static_cast<int>(H.rows()) - drop_dim;
  const Eigen::MatrixXd Hdd = H.topLeftCorner(drop_dim, drop_dim);
  const Eigen::MatrixXd Hkd = H.bottomLeftCorner(keep, drop_dim);
  const Eigen::MatrixXd Hkk = H.bottomRightCorner(keep, keep);
  const auto ldlt = Hdd.ldlt();
  const Eigen::MatrixXd Hdd_inv_Hdk = ldlt.solve(Hkd.transpose());
  const Eigen::VectorXd Hdd_inv_bd = ldlt.solve(b.head(drop_dim));
  Eigen::MatrixXd Hp = Hkk - Hkd * Hdd_inv_Hdk;
  Eigen::VectorXd bp = b.tail(keep) - Hkd * Hdd_inv_bd;
  Hp = 0.5 * (Hp + Hp.transpose()).eval();
  return {Hp, bp};
}

void Problem::marginalize_oldest() {
  if (states_.size() < 2) throw std::logic_error("Problem: nothing to marginalize");
  const uint64_t old_id = ids_.front();

  std::vector<std::unique_ptr<Factor>> touching, remaining;
  for (auto& f : factors_) {
    const bool touches = std::find(f->state_ids.begin(), f->state_ids.end(), old_id) !=
                         f->state_ids.end();
    (touches ? touching : remaining).push_back(std::move(f));
  }

  // involved states: the marginalized one first, then the kept ones in
  // window order
  std::vector<uint64_t> involved{old_id};
  for (auto& f : touching) {
    for (uint64_t id : f->state_ids) {
      if (std::find(involved.begin(), involved.end(), id) == involved.end())
        involved.push_back(id);
    }
  }
  std::sort(involved.begin() + 1, involved.end());

  const int dim = static_cast<int>(involved.size()) * kStateDim;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd r;
  std::vector<Eigen::MatrixXd> jacs;
  for (auto& f : touching) {
    evaluate_factor(*f, &r, &jacs);
    std::vector<int> pos;
    for (uint64_t id : f->state_ids) {
      pos.push_back(static_cast<int>(
          std::find(involved.begin(), involved.end(), id) - involved.begin()));
    }
    for (size_t a = 0; a < pos.size(); ++a) {
      b.segment<kStateDim>(pos[a] * kStateDim) += jacs[a].transpose() * r;
      for (size_t c = 0; c < pos.size(); ++c) {
        H.block<kStateDim, kStateDim>(pos[a] * kStateDim, pos[c] * kStateDim) +=
            jacs[a].transpose() * jacs[c];
      }
    }
  }

  auto [Hp, bp] = marginalize_gaussian(H, b, kStateDim);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hp);
  Eigen::VectorXd ev = es.eigenvalues();
  const double floor = std::max(ev.cwiseAbs().maxCoeff(), 1.0) * 1e-12;
  int rank = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < 0.0) ev(i) = 0.0;  // PSD clamp
    if (ev(i) > floor) ++rank;
  }
  const int keep_dim = static_cast<int>(Hp.rows());
  Eigen::MatrixXd J0 = Eigen::MatrixXd::Zero(rank, keep_dim);
  Eigen::VectorXd r0 = Eigen::VectorXd::Zero(rank);
  int row = 0;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) <= floor) continue;
    const double s = std::sqrt(ev(i));
    J0.row(row) = s * es.eigenvectors().col(i).transpose();
    r0(row) = es.eigenvectors().col(i).dot(bp) / s;
    ++row;
  }

  std::vector<uint64_t> kept(involved.begin() + 1, involved.end());
  std::vector<Eigen::MatrixXd> prior_jacs;
  std::vector<NavState> lin;
  for (size_t i = 0; i < kept.size(); ++i) {
    prior_jacs.push_back(J0.middleCols(static_cast<int>(i) * kStateDim, kStateDim));
    lin.push_back(states_[index_of(kept[i])]);
  }
  auto prior = std::make_unique<MarginalPriorFactor>(std::move(r0),
                                                     std::move(prior_jacs),
                                                     std::move(lin));
  prior->state_ids = kept;

  states_.erase(states_.begin());
  ids_.erase(ids_.begin());
  factors_ = std::move(remaining);
  factors_.push_back(std::move(prior));
}

SppResult solve_spp(const GnssEpoch& epoch) {
  SppResult out;
  const int n = static_cast<int>(epoch.observations.size());
  if (n < 4) return out;
  Vec3 p = Vec3::Zero();
  double clk = 0.0;
  Eigen::MatrixXd J(n, 4);
  Eigen::VectorXd r(n);
  for (int iter = 0; iter < 20; ++iter) {
    int row = 0;
    for (const auto& [id, obs] : epoch.observations) {
      const auto& sat = epoch.sat_states.at(id);
      r(row) = pseudorange_model(sat, p, clk) - obs.pseudorange;
      const Vec3 u = (sat.position_ecef - p).normalized();
      J(row, 0) = -u.x() - geodesy::kEarthRotationRate / geodesy::kSpeedOfLight *
                              sat.position_ecef.y();
      J(row, 1) = -u.y() + geodesy::kEarthRotationRate / geodesy::kSpeedOfLight *
                              sat.position_ecef.x();
      J(row, 2) = -u.z();
      J(row, 3) = 1.0;
      ++row;
    }
    const Eigen::Matrix4d JtJ = J.transpose() * J;
    const Eigen::Vector4d delta = JtJ.ldlt().solve(-J.transpose() * r);
    if (!delta.allFinite()) return out;
    p += delta.head<3>();
    clk += delta(3);
    out.iterations = iter + 1;
    if (delta.norm() < 1e-8) break;
  }
  const Eigen::Matrix4d cov = (J.transpose() * J).inverse();
  out.gdop = std::sqrt(cov.trace());
  out.position_ecef = p;
  out.clock_bias = clk;
  out.valid = std::isfinite(out.gdop);
  return out;
}

void roll_pitch_from_accel(const Vec3& mean_accel, double* roll, double* pitch) {
  const Vec3 f = mean_accel.normalized();
  *pitch = std::asin(std::clamp(-f.x(), -1.0, 1.0));
  *roll = std::atan2(f.y(), f.z());
}

InitializationResult initialize_from_epochs(const GnssEpoch& epoch_a,
                                            const GnssEpoch& epoch_b,
                                            const std::vector<ImuSample>& imu_buffer) {
  InitializationResult out;
  const SppResult fix_a = solve_spp(epoch_a);
  const SppResult fix_b = solve_spp(epoch_b);
  if (!fix_a.valid || !fix_b.valid) return out;
  out.gdop = std::max(fix_a.gdop, fix_b.gdop);

  out.enu_origin = geodesy::ecef_to_geodetic(fix_a.position_ecef);
  const Mat3 r_en = geodesy::ecef_from_enu_rotation(out.enu_origin);
  const double dt = epoch_b.timestamp - epoch_a.timestamp;
  if (dt <= 0.0) return out;
  const Vec3 v_enu =
      r_en.transpose() * (fix_b.position_ecef - fix_a.position_ecef) / dt;

  Vec3 mean_f = Vec3::Zero();
  for (const auto& s : imu_buffer) mean_f += s.accel;
  if (!imu_buffer.empty()) mean_f /= static_cast<double>(imu_buffer.size());
  double roll = 0.0, pitch = 0.0;
  if (mean_f.norm() > 1.0) roll_pitch_from_accel(mean_f, &roll, &pitch);
  const double yaw = std::atan2(v_enu.y(), v_enu.x());

  NavState x0;
  x0.position = Vec3::Zero();
  x0.velocity = v_enu;
  x0.orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                        Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                        Eigen::AngleAxisd(roll, Vec3::UnitX()));
  x0.clock_bias = fix_a.clock_bias;
  x0.clock_drift = (fix_b.clock_bias - fix_a.clock_bias) / dt;
  x0.timestamp = epoch_a.timestamp;
  out.state = x0;
  out.valid = true;
  return out;
}

}  // namespace radnav
