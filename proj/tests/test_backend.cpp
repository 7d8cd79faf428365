#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "radnav/graph_backend.hpp"
#include "radnav/robustification.hpp"
#include "radnav/simulator.hpp"

using namespace radnav;

namespace {

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

sim::SimOutput noise_free_run(double duration = 10.0) {
  sim::Scenario sc;
  sc.trajectory.type = sim::TrajectoryType::kFigureEight;
  sc.trajectory.period = 120.0;
  sc.duration = duration;
  return sim::generate(sc);
}

// preintegrate the IMU stream between two consecutive GNSS epochs
PreintegratedImu preint_between(const sim::SimOutput& run, size_t k,
                                const ImuBias& bias) {
  const double t0 = run.gnss[k - 1].timestamp;
  const double t1 = run.gnss[k].timestamp;
  PreintegratedImu p(t0, bias, ImuNoiseParams{});
  const ImuSample* prev = nullptr;
  for (const auto& s : run.imu) {
    if (s.timestamp < t0 - 1e-9 || s.timestamp > t1 + 1e-9) continue;
    if (prev) p.integrate(*prev, s);
    prev = &s;
  }
  return p;
}

EpochInput make_input(const sim::SimOutput& run, size_t k, const ImuBias& bias) {
  EpochInput input;
  input.preint_imu = preint_between(run, k, bias);
  input.epoch = run.gnss[k];
  input.previous_epoch = &run.gnss[k - 1];
  input.tdcp = build_tdcp(run.gnss[k - 1], run.gnss[k]);
  for (auto& m : input.tdcp) {
    const auto& a = run.gnss[k - 1].observations.at(m.sat_id);
    const auto& b = run.gnss[k].observations.at(m.sat_id);
    m.accepted = detect_cycle_slip(a.carrier_phase, b.carrier_phase, a.doppler,
                                   b.doppler, b.wavelength, m.t_k1 - m.t_k, 0.05)
                     .passed;
  }
  return input;
}

Eigen::Matrix<double, kStateDim, 1> unit_sigmas() {
  return Eigen::Matrix<double, kStateDim, 1>::Ones();
}

}  // namespace

TEST_CASE("add_epoch factor bookkeeping") {
  const auto run = noise_free_run();
  REQUIRE(run.gnss[1].observations.size() == 8);
  BackendConfig cfg;

  SUBCASE("8 satellites with 6 accepted TDCP") {
    Problem problem(run.frames, cfg);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    EpochInput input = make_input(run, 1, {});
    REQUIRE(input.tdcp.size() == 8);
    input.tdcp[6].accepted = false;
    input.tdcp[7].accepted = false;
    PreintegratedRadarVelocity radar;
    radar.integrate(Vec3(5.0, 0.0, 0.0), Quat::Identity(), 1.0, 0.1);
    radar.finalize();
    input.preint_radar = radar;
    problem.add_epoch(input);
    const FactorCounts c = problem.factor_counts();
    CHECK(c.imu == 1);
    CHECK(c.clock == 1);
    CHECK(c.radar_velocity == 1);
    CHECK(c.pseudorange == 8);
    CHECK(c.tdcp == 6);
    CHECK(c.prior == 1);
  }
  SUBCASE("degraded epoch stays well-posed") {
    Problem problem(run.frames, cfg);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    EpochInput input = make_input(run, 1, {});
    input.tdcp.clear();  // no TDCP, no radar
    problem.add_epoch(input);
    const auto rep = problem.optimize();
    CHECK_FALSE(rep.rank_deficient);
  }
  SUBCASE("radar ablation flag removes the velocity factor") {
    BackendConfig no_radar = cfg;
    no_radar.enable_radar = false;
    Problem problem(run.frames, no_radar);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    EpochInput input = make_input(run, 1, {});
    PreintegratedRadarVelocity radar;
    radar.integrate(Vec3(5.0, 0.0, 0.0), Quat::Identity(), 1.0, 0.1);
    input.preint_radar = radar;
    problem.add_epoch(input);
    CHECK(problem.factor_counts().radar_velocity == 0);
  }
}

TEST_CASE("optimizer on noise-free data") {
  const auto run = noise_free_run();
  BackendConfig cfg;
  cfg.use_gmm = false;
  Problem problem(run.frames, cfg);
  Eigen::Matrix<double, kStateDim, 1> sigmas = unit_sigmas();
  problem.set_initial_state(state_from_truth(run.truth[0]), sigmas);
  for (size_t k = 1; k <= 5; ++k) problem.add_epoch(make_input(run, k, {}));

  SUBCASE("fixed point at ground truth") {
    const auto rep = problem.optimize();
    CHECK(rep.iterations <= 2);
    CHECK(rep.final_cost < 1e-12);
    CHECK_FALSE(rep.rank_deficient);
  }
  SUBCASE("recovers from a 1 m position perturbation") {
    problem.optimize();
    for (size_t i = 0; i < problem.states().size(); ++i) {
      problem.state_at(i).position += Vec3(1.0, 0.0, 0.0);
    }
    const auto rep = problem.optimize();
    CHECK(rep.final_cost < 1e-10);
    for (size_t i = 0; i < problem.states().size(); ++i) {
      CHECK((problem.states()[i].position - run.truth[i].position).norm() < 1e-6);
    }
  }
  SUBCASE("accepted steps never increase the cost") {
    for (size_t i = 0; i < problem.states().size(); ++i) {
      problem.state_at(i).position += Vec3(0.5, -0.5, 0.2);
    }
    const double before = problem.total_cost();
    const auto rep = problem.optimize();
    CHECK(rep.final_cost <= before + 1e-12);
    CHECK(rep.initial_cost == doctest::Approx(before).epsilon(1e-9));
  }
}

TEST_CASE("linear-Gaussian graph equals the closed-form solve") {
  const geodesy::FrameSet fr = testutil::default_frames();
  std::mt19937_64 rng(73);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    BackendConfig cfg;
    cfg.optimizer.gradient_tol = 1e-13;
    cfg.optimizer.step_tol = 1e-16;
    cfg.optimizer.max_iterations = 200;
    Problem problem(fr, cfg);
    NavState x0 = testutil::random_state(rng);
    problem.set_initial_state(x0, unit_sigmas());

    // stack of unary linear factors r = r0 + J (x [-] x0)
    Eigen::MatrixXd jtj = Eigen::MatrixXd::Identity(kStateDim, kStateDim);
    Eigen::VectorXd jtr = Eigen::VectorXd::Zero(kStateDim);
    for (int f = 0; f < 3; ++f) {
      Eigen::MatrixXd j(kStateDim, kStateDim);
      for (int a = 0; a < kStateDim; ++a)
        for (int b = 0; b < kStateDim; ++b) j(a, b) = 0.3 * g(rng);
      j += 2.0 * Eigen::MatrixXd::Identity(kStateDim, kStateDim);
      Eigen::VectorXd r0(kStateDim);
      for (int a = 0; a < kStateDim; ++a) r0(a) = 0.1 * g(rng);
      jtj += j.transpose() * j;
      jtr += j.transpose() * r0;
      auto factor = std::make_unique<MarginalPriorFactor>(
          r0, std::vector<Eigen::MatrixXd>{j}, std::vector<NavState>{x0});
      factor->state_ids = {problem.state_id(0)};
      problem.add_factor(std::move(factor));
    }
    const auto rep = problem.optimize();
    CHECK(rep.converged);
    const Eigen::VectorXd z_closed = jtj.ldlt().solve(-jtr);
    const Eigen::VectorXd z_sol = problem.states()[0].boxminus(x0);
    CHECK((z_sol - z_closed).norm() < 1e-10);
  }
}

TEST_CASE("marginalization") {
  SUBCASE("schur complement matches the dense solve on a 3-state chain") {
    std::mt19937_64 rng(79);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = 4;  // per-state dimension of the toy chain
    const int dim = 3 * d;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(5 * d, dim);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(5 * d);
    // unary prior on state 0 and two pairwise links, all random
    const auto fill = [&](int row, int col) {
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) J(row + a, col + b) = g(rng);
    };
    fill(0, 0);
    fill(d, 0);
    fill(d, d);  // link 0-1 spans two column blocks
    fill(2 * d, d);
    fill(2 * d, 2 * d);
    fill(3 * d, d);
    fill(4 * d, 2 * d);
    for (int i = 0; i < 5 * d; ++i) r(i) = g(rng);
    const Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd b = J.transpose() * r;

    const Eigen::VectorXd full = H.ldlt().solve(b);
    const auto [Hp, bp] = marginalize_gaussian(H, b, d);
    const Eigen::VectorXd reduced = Hp.ldlt().solve(bp);
    CHECK((reduced - full.tail(2 * d)).norm() < 1e-10);
    // marginal covariance equals the corresponding block of the joint
    const Eigen::MatrixXd joint_cov = H.inverse();
    CHECK((Hp.inverse() - joint_cov.bottomRightCorner(2 * d, 2 * d)).norm() /
              joint_cov.norm() <
          1e-9);
  }
  SUBCASE("chain tail marginalization leaves a unary prior") {
    const auto run = noise_free_run();
    BackendConfig cfg;
    cfg.use_gmm = false;
    Problem problem(run.frames, cfg);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    problem.add_epoch(make_input(run, 1, {}));
    problem.marginalize_oldest();
    CHECK(problem.window_size() == 1);
    const FactorCounts c = problem.factor_counts();
    CHECK(c.prior == 1);
    CHECK(c.imu == 0);
    for (const auto& f : problem.factors()) {
      if (std::string(f->name()) == "prior") CHECK(f->state_ids.size() == 1);
    }
  }
  SUBCASE("marginalizing at the mode preserves the remaining means") {
    const auto run = noise_free_run();
    BackendConfig cfg;
    cfg.use_gmm = false;
    Problem problem(run.frames, cfg);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    for (size_t k = 1; k <= 4; ++k) problem.add_epoch(make_input(run, k, {}));
    problem.optimize();
    std::vector<NavState> before(problem.states().begin() + 1, problem.states().end());
    problem.marginalize_oldest();
    problem.optimize();
    REQUIRE(problem.states().size() == before.size());
    for (size_t i = 0; i < before.size(); ++i) {
      CHECK((problem.states()[i].position - before[i].position).norm() < 1e-8);
      CHECK((problem.states()[i].velocity - before[i].velocity).norm() < 1e-8);
      CHECK(std::abs(problem.states()[i].clock_bias - before[i].clock_bias) < 1e-8);
    }
  }
  SUBCASE("repeated marginalization keeps the window bounded and finite") {
    const auto run = noise_free_run(100.0);
    BackendConfig cfg;
    cfg.use_gmm = false;
    cfg.window_size = 5;
    Problem problem(run.frames, cfg);
    problem.set_initial_state(state_from_truth(run.truth[0]), unit_sigmas());
    for (size_t k = 1; k < run.gnss.size(); ++k) {
      const auto& latest = problem.latest_state();
      problem.add_epoch(make_input(run, k, {latest.accel_bias, latest.gyro_bias}));
      const auto rep = problem.optimize();
      CHECK_FALSE(rep.rank_deficient);
      CHECK(problem.window_size() <= 5);
    }
    for (const auto& x : problem.states()) {
      CHECK(x.position.allFinite());
      CHECK(x.velocity.allFinite());
      CHECK(std::isfinite(x.clock_bias));
    }
    // estimates stay pinned to truth on noise-free data
    CHECK((problem.latest_state().position - run.truth.back().position).norm() < 1e-3);
  }
}

TEST_CASE("single point positioning") {
  const auto run = noise_free_run();

  SUBCASE("noise-free epoch recovers the antenna position") {
    const NavState x = state_from_truth(run.truth[0]);
    const Vec3 antenna = receiver_antenna_ecef(x.position, x.orientation, run.frames);
    const SppResult r = solve_spp(run.gnss[0]);
    REQUIRE(r.valid);
    CHECK((r.position_ecef - antenna).norm() < 1e-6);
    CHECK(std::abs(r.clock_bias - x.clock_bias) < 1e-6);
    CHECK(r.gdop < 10.0);
  }
  SUBCASE("fewer than 4 satellites is invalid") {
    GnssEpoch epoch = run.gnss[0];
    while (epoch.observations.size() > 3) {
      epoch.observations.erase(epoch.observations.begin());
    }
    CHECK_FALSE(solve_spp(epoch).valid);
  }
  SUBCASE("degenerate near-coplanar geometry reports a large GDOP") {
    const geodesy::FrameSet fr = testutil::default_frames();
    const Vec3 antenna = fr.enu_origin_ecef;
    GnssEpoch epoch;
    epoch.timestamp = 0.0;
    for (int i = 0; i < 4; ++i) {
      // all four satellites within ~1 degree of zenith
      const double az = i * M_PI / 2.0;
      const double off = 0.017;
      SatelliteState st;
      st.position_ecef = fr.enu_to_ecef(
          2.2e7 * Vec3(off * std::sin(az), off * std::cos(az), 1.0).normalized());
      SatelliteObservation obs;
      obs.sat_id = i + 1;
      obs.pseudorange = pseudorange_model(st, antenna, 50.0);
      epoch.observations.emplace(i + 1, obs);
      epoch.sat_states.emplace(i + 1, st);
    }
    const SppResult r = solve_spp(epoch);
    CHECK((!r.valid || r.gdop > 50.0));
  }
}

TEST_CASE("initialization") {
  SUBCASE("roll and pitch from averaged specific force") {
    std::mt19937_64 rng(83);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 0.02);
    for (int trial = 0; trial < 100; ++trial) {
      const double roll = 0.35 * u(rng), pitch = 0.35 * u(rng), yaw = M_PI * u(rng);
      const Quat q(Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                   Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                   Eigen::AngleAxisd(roll, Vec3::UnitX()));
      Vec3 mean_f = Vec3::Zero();
      const int n = 100;
      for (int i = 0; i < n; ++i) {
        mean_f += q.conjugate() * Vec3(0.0, 0.0, 9.81) + Vec3(g(rng), g(rng), g(rng));
      }
      mean_f /= n;
      double r_est = 0.0, p_est = 0.0;
      roll_pitch_from_accel(mean_f, &r_est, &p_est);
      CHECK(std::abs(r_est - roll) < 0.2 * M_PI / 180.0);
      CHECK(std::abs(p_est - pitch) < 0.2 * M_PI / 180.0);
    }
  }
  SUBCASE("two-fix bootstrap on noise-free data") {
    const auto run = noise_free_run();
    std::vector<ImuSample> buffer;
    for (const auto& s : run.imu) {
      if (s.timestamp <= 1.0) buffer.push_back(s);
    }
    const auto init = initialize_from_epochs(run.gnss[0], run.gnss[1], buffer);
    REQUIRE(init.valid);
    CHECK(init.gdop < 10.0);
    CHECK(std::abs(init.state.clock_bias - run.truth[0].clock_bias) < 1e-5);
    // velocity from the fix difference: first-order accurate over 1 s
    CHECK((init.state.velocity - run.truth[0].velocity).norm() < 0.6);
    const double yaw_true =
        std::atan2(run.truth[0].velocity.y(), run.truth[0].velocity.x());
    const Vec3 fwd = init.state.orientation * Vec3::UnitX();
    CHECK(std::abs(std::remainder(std::atan2(fwd.y(), fwd.x()) - yaw_true,
                                  2.0 * M_PI)) < 0.2);
  }
}
