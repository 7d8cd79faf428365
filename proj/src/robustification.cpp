#include "radnav/robustification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace radnav {

CycleSlipCheck detect_cycle_slip(double phi_k_cycles, double phi_k1_cycles,
                                 double doppler_k, double doppler_k1,
                                 double wavelength, double dt, double threshold,
                                 double doppler_sign) {
  CycleSlipCheck out;
  out.threshold = threshold;
  if (dt <= 0.0) throw std::invalid_argument("detect_cycle_slip: dt <= 0");
  if (!std::isfinite(doppler_k) || !std::isfinite(doppler_k1)) {
    out.epsilon = std::numeric_limits<double>::infinity();
    out.passed = false;
    return out;
  }
  const double delta_phase = wavelength * (phi_k1_cycles - phi_k_cycles);
  const double doppler_integral =
      doppler_sign * wavelength * 0.5 * (doppler_k + doppler_k1) * dt;
  out.epsilon = std::abs(delta_phase - doppler_integral);
  out.passed = out.epsilon < threshold;
  return out;
}

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gauss(double r, double mu, double var) {
  const double d = r - mu;
  return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * d * d / var);
}
}  // namespace

double GmmNoiseModel::density(double r) const {
  return weights[0] * gauss(r, means[0], variances[0]) +
         weights[1] * gauss(r, means[1], variances[1]);
}

double GmmNoiseModel::log_density(double r) const { return std::log(density(r)); }

GmmNoiseModel default_gmm_init(const std::vector<double>& residuals) {
  std::vector<double> sorted = residuals;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  const size_t lo = static_cast<size_t>(0.1 * n);
  const size_t hi = std::max(lo + 1, static_cast<size_t>(0.9 * n));
  double mean = 0.0;
  for (size_t i = lo; i < hi; ++i) mean += sorted[i];
  mean /= static_cast<double>(hi - lo);
  double var = 0.0;
  for (size_t i = lo; i < hi; ++i) var += (sorted[i] - mean) * (sorted[i] - mean);
  var = std::max(var / static_cast<double>(hi - lo), GmmNoiseModel::variance_floor);
  GmmNoiseModel m;
  m.weights = {0.8, 0.2};
  m.means = {mean, mean};
  m.variances = {var, 10.0 * var};
  return m;
}

EmResult fit_gmm(const std::vector<double>& residuals, const GmmNoiseModel& init,
                 const EmConfig& config) {
  if (residuals.empty()) throw std::invalid_argument("fit_gmm: empty input");
  const size_t n = residuals.size();
  EmResult out;
  out.model = init;
  auto& m = out.model;

  double prev_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> resp(n);
  for (int iter = 0; iter < config.max_iters; ++iter) {
    // E-step
    double ll = 0.0;
    double w0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double p0 = m.weights[0] * gauss(residuals[i], m.means[0], m.variances[0]);
      const double p1 = m.weights[1] * gauss(residuals[i], m.means[1], m.variances[1]);
      const double tot = std::max(p0 + p1, 1e-300);
      resp[i] = p0 / tot;
      ll += std::log(tot);
      w0 += resp[i];
      s0 += resp[i] * residuals[i];
      s1 += (1.0 - resp[i]) * residuals[i];
    }
    out.log_likelihood.push_back(ll);
    out.iterations = iter + 1;
    if (ll < prev_ll - 1e-9) {
      throw std::logic_error("fit_gmm: log-likelihood decreased");
    }
    if (std::abs(ll - prev_ll) < config.tol) break;
    prev_ll = ll;

    // M-step
    const double w1 = static_cast<double>(n) - w0;
    const double n0 = std::max(w0, 1e-12);
    const double n1 = std::max(w1, 1e-12);
    const double mu0 = s0 / n0;
    const double mu1 = s1 / n1;
    double v0 = 0.0, v1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      v0 += resp[i] * (residuals[i] - mu0) * (residuals[i] - mu0);
      v1 += (1.0 - resp[i]) * (residuals[i] - mu1) * (residuals[i] - mu1);
    }
    m.weights = {std::clamp(w0 / n, 1e-6, 1.0 - 1e-6),
                 std::clamp(w1 / n, 1e-6, 1.0 - 1e-6)};
    m.means = {mu0, mu1};
    m.variances = {std::max(v0 / n0, GmmNoiseModel::variance_floor),
                   std::max(v1 / n1, GmmNoiseModel::variance_floor)};
  }
  return out;
}

GmmCost::GmmCost(const GmmNoiseModel& model) : model_(model) {
  // locate the mixture mode: coarse grid between the components, then
  // a few Newton refinements on d/dr log f
  const double sd0 = std::sqrt(model.variances[0]);
  const double sd1 = std::sqrt(model.variances[1]);
  const double lo = std::min(model.means[0] - 5.0 * sd0, model.means[1] - 5.0 * sd1);
  const double hi = std::max(model.means[0] + 5.0 * sd0, model.means[1] + 5.0 * sd1);
  double best_r = model.means[0];
  double best_f = model.density(best_r);
  const int steps = 2000;
  for (int i = 0; i <= steps; ++i) {
    const double r = lo + (hi - lo) * i / steps;
    const double f = model.density(r);
    if (f > best_f) {
      best_f = f;
      best_r = r;
    }
  }
  for (int it = 0; it < 20; ++it) {
    const double h = 1e-6 * std::max(1.0, std::abs(best_r));
    const double fm = model.density(best_r - h);
    const double f0 = model.density(best_r);
    const double fp = model.density(best_r + h);
    const double g = (fp - fm) / (2.0 * h);
    const double hess = (fp - 2.0 * f0 + fm) / (h * h);
    if (std::abs(hess) < 1e-300) break;
    const double step = g / hess;
    const double cand = best_r - step;
    if (model.density(cand) >= f0) best_r = cand;
    if (std::abs(step) < 1e-14) break;
  }
  log_peak_ = std::log(model.density(best_r));
}

std::pair<double, double> GmmCost::evaluate(double residual) const {
  const double p0 =
      model_.weights[0] * gauss(residual, model_.means[0], model_.variances[0]);
  const double p1 =
      model_.weights[1] * gauss(residual, model_.means[1], model_.variances[1]);
  const double f = std::max(p0 + p1, 1e-300);
  const double cost = -std::log(f) + log_peak_;
  const double fprime = -p0 * (residual - model_.means[0]) / model_.variances[0] -
                        p1 * (residual - model_.means[1]) / model_.variances[1];
  return {cost, -fprime / f};
}

}  // namespace radnav
