#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gridflow/forecast.hpp"

using namespace gridflow;
using namespace gridflow::forecast;

namespace {

std::vector<double> sinusoid_series(int n, double beta0, double amp, double period) {
  std::vector<double> x(n);
  for (int t = 0; t < n; ++t)
    x[t] = beta0 + amp * std::sin(2 * std::numbers::pi * t / period);
  return x;
}

std::vector<double> ar1_series(int n, double rho, double sigma, Rng& rng) {
  std::vector<double> r(n);
  double v = 0;
  for (int t = 0; t < n; ++t) {
    v = rho * v + sigma * rng.normal();
    r[t] = v;
  }
  return r;
}

}  // namespace

TEST_SUITE("forecast") {

TEST_CASE("constant series fits to its mean with vanishing harmonics") {
  std::vector<double> series(300, 4.25);
  auto model = fit_baseline(series, {96.0});
  CHECK(model.beta0 == doctest::Approx(4.25).epsilon(1e-10));
  CHECK(std::abs(model.sin_coef[0]) <= 1e-8);
  CHECK(std::abs(model.cos_coef[0]) <= 1e-8);
}

TEST_CASE("exact sinusoid is recovered to near machine precision") {
  auto series = sinusoid_series(960, 3.0, 2.0, 96.0);
  auto model = fit_baseline(series, {96.0});
  CHECK(model.beta0 == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(model.sin_coef[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(model.cos_coef[0]) <= 1e-6);
}

TEST_CASE("fractional periods and the 17-parameter seasonal design") {
  std::vector<double> periods{96, 48, 24, 12, 8766, 4383, 2101.5, 1095.75};
  std::vector<double> series(2 * 8766);
  for (size_t t = 0; t < series.size(); ++t)
    series[t] = 5 + 0.5 * std::sin(2 * std::numbers::pi * t / 96.0) +
                0.2 * std::cos(2 * std::numbers::pi * t / 8766.0);
  auto model = fit_baseline(series, periods);
  CHECK(1 + 2 * model.periods.size() == 17);
  CHECK(model.beta0 == doctest::Approx(5.0).epsilon(1e-6));
  // duplicate periods are a rank-deficient design
  CHECK_THROWS_AS(fit_baseline(series, {96.0, 96.0}), Error);
}

TEST_CASE("baseline residuals are orthogonal to the design columns") {
  Rng rng(5);
  auto series = sinusoid_series(960, 1.0, 0.7, 96.0);
  for (auto& v : series) v += 0.3 * rng.normal();
  auto model = fit_baseline(series, {96.0, 48.0});
  auto resid = model.residuals(series);
  double scale = 0;
  for (double v : series) scale = std::max(scale, std::abs(v));
  double dot0 = 0, dots = 0, dotc = 0;
  for (size_t t = 0; t < resid.size(); ++t) {
    dot0 += resid[t];
    dots += resid[t] * std::sin(2 * std::numbers::pi * t / 96.0);
    dotc += resid[t] * std::cos(2 * std::numbers::pi * t / 48.0);
  }
  CHECK(std::abs(dot0) <= 1e-8 * scale * resid.size());
  CHECK(std::abs(dots) <= 1e-8 * scale * resid.size());
  CHECK(std::abs(dotc) <= 1e-8 * scale * resid.size());
}

TEST_CASE("direct AR fit recovers rho^tau for an AR(1) residual") {
  Rng rng(42);
  auto resid = ar1_series(20000, 0.9, 0.1, rng);
  auto model = fit_residual_ar(resid, 1, 8, 1e-8);
  for (int tau = 1; tau < 8; ++tau)
    CHECK(model.gamma(tau - 1, 0) ==
          doctest::Approx(std::pow(0.9, tau)).epsilon(0.08).scale(1.0));
}

TEST_CASE("day-ahead configuration yields a 287x288 coefficient matrix") {
  Rng rng(31);
  std::vector<double> resid(2000);
  for (auto& v : resid) v = rng.normal();
  auto model = fit_residual_ar(resid, 288, 288, 1e-6);
  CHECK(model.gamma.rows() == 287);
  CHECK(model.gamma.cols() == 288);
}

TEST_CASE("zero residual history gives zero coefficients and pure baseline") {
  std::vector<double> resid(500, 0.0);
  auto ar = fit_residual_ar(resid, 3, 5, 1e-6);
  CHECK(ar.gamma.cwiseAbs().maxCoeff() == 0.0);
  auto series = sinusoid_series(600, 2.0, 1.0, 96.0);
  auto base = fit_baseline(series, {96.0});
  std::vector<double> recent(3);
  for (int j = 0; j < 3; ++j) recent[j] = base.value(599 - j);
  auto fc = point_forecast(base, ar, recent, 599);
  REQUIRE(fc.size() == 4);
  for (int tau = 1; tau <= 4; ++tau)
    CHECK(fc[tau - 1] == doctest::Approx(base.value(599 + tau)).epsilon(1e-9));
}

TEST_CASE("forecasts clip to a configured range") {
  std::vector<double> resid(400);
  Rng rng(3);
  for (auto& v : resid) v = 5 * rng.normal();
  auto ar = fit_residual_ar(resid, 2, 6, 1e-6);
  BaselineModel base;
  base.beta0 = 15.5;
  ClipRange clip{0.0, 16.0};
  std::vector<double> recent{9.0, 30.0};
  auto fc = point_forecast(base, ar, recent, 100, clip);
  for (double v : fc) {
    CHECK(v >= 0.0);
    CHECK(v <= 16.0);
  }
}

TEST_CASE("direct multi-step beats the iterated one-step under mismatch") {
  // AR(2) data fitted with a single lag: iterating the one-step model
  // compounds the specification error; the direct fit does not
  Rng rng(2024);
  const int n = 30000;
  std::vector<double> r(n);
  double a = 0, b = 0;
  for (int t = 0; t < n; ++t) {
    double v = 0.5 * a + 0.4 * b + 0.1 * rng.normal();
    b = a;
    a = v;
    r[t] = v;
  }
  const int tau = 10;
  auto direct = fit_residual_ar({r.begin(), r.begin() + 20000}, 1, tau + 1, 1e-8);
  double one_step = direct.gamma(0, 0);
  double mse_direct = 0, mse_iter = 0;
  int count = 0;
  for (int t = 20000; t + tau < n; ++t) {
    double pd = direct.gamma(tau - 1, 0) * r[t];
    double pi_ = std::pow(one_step, tau) * r[t];
    mse_direct += (r[t + tau] - pd) * (r[t + tau] - pd);
    mse_iter += (r[t + tau] - pi_) * (r[t + tau] - pi_);
    ++count;
  }
  CHECK(mse_direct / count <= mse_iter / count);
}

TEST_CASE("error model with zero covariance reproduces the point forecast") {
  ErrorModel e;
  e.mu = Eigen::VectorXd::Zero(3);
  e.sigma = Eigen::MatrixXd::Zero(3, 3);
  std::vector<double> fc{1.0, 2.0, 3.0};
  auto scen = sample_scenarios(fc, e, 4, 99);
  REQUIRE(scen.size() == 4);
  for (const auto& s : scen)
    for (int i = 0; i < 3; ++i) CHECK(s[i] == fc[i]);
}

TEST_CASE("scenario sampling is seed-reproducible and distinct across seeds") {
  ErrorModel e;
  e.mu = Eigen::VectorXd::Zero(4);
  e.sigma = Eigen::MatrixXd::Identity(4, 4);
  std::vector<double> fc{0, 0, 0, 0};
  auto a = sample_scenarios(fc, e, 3, 7);
  auto b = sample_scenarios(fc, e, 3, 7);
  auto c = sample_scenarios(fc, e, 3, 8);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("sampled scenarios reproduce the error moments") {
  ErrorModel e;
  e.mu = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::MatrixXd L(3, 3);
  L << 1, 0, 0, 0.3, 0.8, 0, -0.2, 0.1, 0.5;
  e.sigma = L * L.transpose();
  std::vector<double> fc{10, 20, 30};
  const int K = 20000;
  auto scen = sample_scenarios(fc, e, K, 1234);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(3);
  for (const auto& s : scen)
    for (int i = 0; i < 3; ++i) mean[i] += s[i];
  mean /= K;
  for (int i = 0; i < 3; ++i) {
    double sd = std::sqrt(e.sigma(i, i));
    CHECK(std::abs(mean[i] - (fc[i] + 0.5)) <= 3 * sd / std::sqrt(double(K)));
  }
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& s : scen) {
    Eigen::Vector3d d;
    for (int i = 0; i < 3; ++i) d[i] = s[i] - fc[i] - mean[i] + fc[i];
    cov += d * d.transpose();
  }
  cov /= K;
  CHECK((cov - e.sigma).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("semidefinite covariance falls back to an eigendecomposition") {
  ErrorModel e;
  e.mu = Eigen::VectorXd::Zero(2);
  e.sigma = Eigen::MatrixXd::Zero(2, 2);
  e.sigma(0, 0) = 1.0;  // rank deficient
  std::vector<double> fc{0, 0};
  auto scen = sample_scenarios(fc, e, 100, 5);
  for (const auto& s : scen) CHECK(s[1] == 0.0);
}

TEST_CASE("error model fit requires at least two origins") {
  BaselineModel base;
  base.beta0 = 0;
  ResidualArModel ar;
  ar.lags = 2;
  ar.horizon = 3;
  ar.gamma = Eigen::MatrixXd::Zero(2, 2);
  std::vector<double> tiny{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(fit_error_model(base, ar, tiny), Error);
}

TEST_CASE("end-to-end: baseline + AR pipeline tracks a synthetic process") {
  Rng rng(11);
  const int n = 4000;
  std::vector<double> x(n);
  double r = 0;
  for (int t = 0; t < n; ++t) {
    r = 0.9 * r + 0.1 * rng.normal();
    x[t] = 3 + 2 * std::sin(2 * std::numbers::pi * t / 96.0) + r;
  }
  auto base = fit_baseline(x, {96.0});
  auto resid = base.residuals(x);
  auto ar = fit_residual_ar(resid, 1, 6, 1e-8);
  // one-step coefficient near 0.9, decaying with horizon
  CHECK(ar.gamma(0, 0) == doctest::Approx(0.9).epsilon(0.1));
  CHECK(ar.gamma(4, 0) < ar.gamma(0, 0));
  auto err = fit_error_model(base, ar, x);
  CHECK(err.samples > 3000);
  // innovation-sized one-step error
  CHECK(std::sqrt(err.sigma(0, 0)) == doctest::Approx(0.1).epsilon(0.3));
}

}  // TEST_SUITE
