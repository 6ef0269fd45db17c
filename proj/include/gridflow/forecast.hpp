#ifndef GRIDFLOW_FORECAST_HPP
#define GRIDFLOW_FORECAST_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "gridflow/common.hpp"

namespace gridflow::forecast {

// Small deterministic RNG (PCG32 + Box-Muller) so scenario sampling is
// byte-reproducible across platforms, independent of libstdc++.
class Rng {
public:
  explicit Rng(uint64_t seed);
  uint32_t next_u32();
  double uniform();  // (0, 1)
  double normal();

private:
  uint64_t state_;
  uint64_t inc_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Seasonal baseline b(t) = beta0 + sum_k a_k sin(2 pi t / P_k) + b_k cos(...).
struct BaselineModel {
  std::vector<double> periods;  // sample counts; fractional allowed
  double beta0 = 0.0;
  std::vector<double> sin_coef;
  std::vector<double> cos_coef;

  double value(double t) const;
  std::vector<double> residuals(const std::vector<double>& series,
                                int first_index = 0) const;
};

BaselineModel fit_baseline(const std::vector<double>& series,
                           const std::vector<double>& periods,
                           int first_index = 0, double ridge = 0.0);

// Direct multi-step AR on baseline residuals: for each horizon step tau the
// row gamma[tau-1] is fitted by its own (ridge) least squares; iterating a
// one-step model is deliberately not done here.
struct ResidualArModel {
  int lags = 0;     // M
  int horizon = 1;  // T; gamma has T-1 rows
  Eigen::MatrixXd gamma;  // (T-1) x M; column j multiplies r_{t-j}
  double ridge = 1e-6;

  // window[0] = r_t, window[1] = r_{t-1}, ...
  std::vector<double> predict(const std::vector<double>& window) const;
};

ResidualArModel fit_residual_ar(const std::vector<double>& residuals, int lags,
                                int horizon, double ridge = 1e-6);

struct ClipRange {
  double lo = -kInf;
  double hi = kInf;
  double apply(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

// Baseline + AR point forecast of x_{t+1..t+T-1} made at absolute time t.
// `recent` holds the last M observations, recent[0] = x_t (newest first).
std::vector<double> point_forecast(const BaselineModel& baseline,
                                   const ResidualArModel& ar,
                                   const std::vector<double>& recent, double t,
                                   const ClipRange& clip = {});

// Gaussian model of the forecast-error vector over the horizon.
struct ErrorModel {
  Eigen::VectorXd mu;     // length T-1
  Eigen::MatrixXd sigma;  // (T-1) x (T-1), symmetric PSD
  int samples = 0;
  bool zero_mean = false;  // fitted with the mu = 0 convention
};

// Collects error vectors e_tau = x_{t+tau} - xhat_{t+tau|t} over all forecast
// origins in `series` (clipped forecasts, i.e. the ones MPC consumes) and
// fits their empirical mean and covariance.
ErrorModel fit_error_model(const BaselineModel& baseline,
                           const ResidualArModel& ar,
                           const std::vector<double>& series,
                           int first_index = 0, const ClipRange& clip = {},
                           bool zero_mean = false);

// K scenario trajectories: forecast + mu + L xi, clipped. Deterministic for a
// fixed seed.
std::vector<std::vector<double>> sample_scenarios(
    const std::vector<double>& forecast, const ErrorModel& error, int k,
    uint64_t seed, const ClipRange& clip = {});

// Convenience bundle used by the MPC engine and the CLI.
struct Pipeline {
  BaselineModel baseline;
  ResidualArModel ar;
  std::optional<ErrorModel> error;
  ClipRange clip;

  std::vector<double> forecast_at(const std::vector<double>& recent,
                                  double t) const {
    return point_forecast(baseline, ar, recent, t, clip);
  }
};

}  // namespace gridflow::forecast

#endif
