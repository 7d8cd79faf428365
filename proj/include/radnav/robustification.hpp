#pragma once

#include <array>
#include <vector>

namespace radnav {

struct CycleSlipCheck {
  double epsilon = 0.0;    // m
  double threshold = 0.0;  // m
  bool passed = false;
};

// Doppler-integration detection metric:
//   eps = | lambda*(phi_k1 - phi_k) - sign * lambda * (D_k + D_k1)/2 * dt |
// Missing (non-finite) Doppler fails closed.
CycleSlipCheck detect_cycle_slip(double phi_k_cycles, double phi_k1_cycles,
                                 double doppler_k, double doppler_k1,
                                 double wavelength, double dt, double threshold,
                                 double doppler_sign = 1.0);

struct GmmNoiseModel {
  std::array<double, 2> weights{0.5, 0.5};
  std::array<double, 2> means{0.0, 0.0};       // m
  std::array<double, 2> variances{1.0, 1.0};   // m^2
  static constexpr int component_count = 2;
  static constexpr double variance_floor = 1e-4;  // m^2

  double density(double r) const;
  double log_density(double r) const;
};

struct EmConfig {
  int max_iters = 100;
  double tol = 1e-6;
};

struct EmResult {
  GmmNoiseModel model;
  int iterations = 0;
  std::vector<double> log_likelihood;  // per iteration, non-decreasing
};

// Default initialization: component 1 from the inner 80% quantile,
// component 2 same mean with 10x variance, weights (0.8, 0.2).
GmmNoiseModel default_gmm_init(const std::vector<double>& residuals);

EmResult fit_gmm(const std::vector<double>& residuals, const GmmNoiseModel& init,
                 const EmConfig& config = {});

// Negative log mixture density shifted so the minimum over r is zero.
// Precomputes the mode once per model.
class GmmCost {
 public:
  explicit GmmCost(const GmmNoiseModel& model);
  // returns (cost, d cost / d residual)
  std::pair<double, double> evaluate(double residual) const;
  const GmmNoiseModel& model() const { return model_; }

 private:
  GmmNoiseModel model_;
  double log_peak_ = 0.0;
};

}  // namespace radnav
