#include "gridflow/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>
#include <Eigen/Eigenvalues>

namespace gridflow::forecast {

Rng::Rng(uint64_t seed) : state_(0), inc_((seed << 1u) | 1u) {
  next_u32();
  state_ += 0x853c49e6748fea9bULL + seed;
  next_u32();
}

uint32_t Rng::next_u32() {
  uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
  uint32_t rot = static_cast<uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
}

double Rng::uniform() {
  // 53-bit uniform in (0, 1)
  uint64_t hi = next_u32(), lo = next_u32();
  uint64_t bits = ((hi << 21) ^ lo) & ((1ULL << 53) - 1);
  return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

double BaselineModel::value(double t) const {
  double b = beta0;
  for (size_t k = 0; k < periods.size(); ++k) {
    double w = 2.0 * std::numbers::pi * t / periods[k];
    b += sin_coef[k] * std::sin(w) + cos_coef[k] * std::cos(w);
  }
  return b;
}

std::vector<double> BaselineModel::residuals(const std::vector<double>& series,
                                             int first_index) const {
  std::vector<double> r(series.size());
  for (size_t i = 0; i < series.size(); ++i)
    r[i] = series[i] - value(first_index + static_cast<double>(i));
  return r;
}

BaselineModel fit_baseline(const std::vector<double>& series,
                           const std::vector<double>& periods, int first_index,
                           double ridge) {
  const int k = static_cast<int>(periods.size());
  const int n = static_cast<int>(series.size());
  const int cols = 1 + 2 * k;
  if (n < 2 * cols)
    throw Error("baseline fit needs at least " + std::to_string(2 * cols) +
                " samples");
  for (size_t a = 0; a < periods.size(); ++a) {
    if (periods[a] <= 0) throw Error("baseline periods must be positive");
    for (size_t b = a + 1; b < periods.size(); ++b)
      if (periods[a] == periods[b])
        throw Error("duplicate baseline period " + std::to_string(periods[a]));
  }
  const int rows = ridge > 0 ? n + cols : n;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(rows);
  for (int i = 0; i < n; ++i) {
    double t = first_index + static_cast<double>(i);
    X(i, 0) = 1.0;
    for (int j = 0; j < k; ++j) {
      double w = 2.0 * std::numbers::pi * t / periods[j];
      X(i, 1 + 2 * j) = std::sin(w);
      X(i, 2 + 2 * j) = std::cos(w);
    }
    y[i] = series[i];
  }
  if (ridge > 0)
    for (int j = 0; j < cols; ++j) X(n + j, j) = std::sqrt(ridge);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (ridge == 0 && qr.rank() < cols)
    throw Error("baseline design matrix is rank deficient");
  Eigen::VectorXd beta = qr.solve(y);
  BaselineModel model;
  model.periods = periods;
  model.beta0 = beta[0];
  model.sin_coef.resize(k);
  model.cos_coef.resize(k);
  for (int j = 0; j < k; ++j) {
    model.sin_coef[j] = beta[1 + 2 * j];
    model.cos_coef[j] = beta[2 + 2 * j];
  }
  return model;
}

std::vector<double> ResidualArModel::predict(
    const std::vector<double>& window) const {
  if (static_cast<int>(window.size()) < lags)
    throw Error("AR prediction window shorter than the model's lag count");
  std::vector<double> out(horizon - 1);
  for (int tau = 1; tau < horizon; ++tau) {
    double v = 0;
    for (int j = 0; j < lags; ++j) v += gamma(tau - 1, j) * window[j];
    out[tau - 1] = v;
  }
  return out;
}

ResidualArModel fit_residual_ar(const std::vector<double>& residuals, int lags,
                                int horizon, double ridge) {
  const int n = static_cast<int>(residuals.size());
  if (lags < 1 || horizon < 2) throw Error("AR fit needs lags >= 1, horizon >= 2");
  // origins t with full history and the longest target ahead
  const int first = lags - 1;
  const int last = n - horizon;  // t + horizon - 1 <= n - 1
  const int rows = last - first + 1;
  if (rows < lags + 1)
    throw Error("insufficient residual history for the AR fit");
  const int arows = ridge > 0 ? rows + lags : rows;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(arows, lags);
  for (int i = 0; i < rows; ++i) {
    int t = first + i;
    for (int j = 0; j < lags; ++j) X(i, j) = residuals[t - j];
  }
  if (ridge > 0)
    for (int j = 0; j < lags; ++j) X(rows + j, j) = std::sqrt(ridge);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  ResidualArModel model;
  model.lags = lags;
  model.horizon = horizon;
  model.ridge = ridge;
  model.gamma.resize(horizon - 1, lags);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(arows);
  for (int tau = 1; tau < horizon; ++tau) {
    for (int i = 0; i < rows; ++i) y[i] = residuals[first + i + tau];
    model.gamma.row(tau - 1) = qr.solve(y).transpose();
  }
  return model;
}

std::vector<double> point_forecast(const BaselineModel& baseline,
                                   const ResidualArModel& ar,
                                   const std::vector<double>& recent, double t,
                                   const ClipRange& clip) {
  if (static_cast<int>(recent.size()) < ar.lags)
    throw Error("forecast window shorter than the model's lag count");
  std::vector<double> rwin(ar.lags);
  for (int j = 0; j < ar.lags; ++j)
    rwin[j] = recent[j] - baseline.value(t - j);
  std::vector<double> rhat = ar.predict(rwin);
  std::vector<double> out(rhat.size());
  for (size_t i = 0; i < rhat.size(); ++i)
    out[i] = clip.apply(baseline.value(t + 1 + static_cast<double>(i)) + rhat[i]);
  return out;
}

ErrorModel fit_error_model(const BaselineModel& baseline,
                           const ResidualArModel& ar,
                           const std::vector<double>& series, int first_index,
                           const ClipRange& clip, bool zero_mean) {
  const int n = static_cast<int>(series.size());
  const int H = ar.horizon - 1;
  const int first = ar.lags - 1;
  const int last = n - 1 - H;
  if (last - first + 1 < 2)
    throw Error("error model needs at least 2 forecast origins");
  std::vector<Eigen::VectorXd> errs;
  std::vector<double> recent(ar.lags);
  for (int t = first; t <= last; ++t) {
    for (int j = 0; j < ar.lags; ++j) recent[j] = series[t - j];
    auto fc = point_forecast(baseline, ar, recent, first_index + t, clip);
    Eigen::VectorXd e(H);
    for (int tau = 1; tau <= H; ++tau) e[tau - 1] = series[t + tau] - fc[tau - 1];
    errs.push_back(std::move(e));
  }
  ErrorModel model;
  model.samples = static_cast<int>(errs.size());
  model.zero_mean = zero_mean;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(H);
  for (const auto& e : errs) mu += e;
  mu /= static_cast<double>(errs.size());
  model.mu = zero_mean ? Eigen::VectorXd::Zero(H) : mu;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(H, H);
  for (const auto& e : errs) {
    Eigen::VectorXd d = e - mu;
    sigma += d * d.transpose();
  }
  sigma /= std::max(1, model.samples - 1);
  model.sigma = 0.5 * (sigma + sigma.transpose());
  return model;
}

std::vector<std::vector<double>> sample_scenarios(
    const std::vector<double>& forecast, const ErrorModel& error, int k,
    uint64_t seed, const ClipRange& clip) {
  const int H = static_cast<int>(forecast.size());
  if (error.mu.size() != H || error.sigma.rows() != H)
    throw Error("error model horizon does not match the forecast length");
  // Cholesky with an eigendecomposition fallback for semidefinite covariances
  Eigen::MatrixXd L;
  Eigen::LLT<Eigen::MatrixXd> llt(error.sigma);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(error.sigma);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    L = es.eigenvectors() * ev.asDiagonal();
  }
  Rng rng(seed);
  std::vector<std::vector<double>> out(k, std::vector<double>(H));
  Eigen::VectorXd xi(H);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < H; ++j) xi[j] = rng.normal();
    Eigen::VectorXd e = error.mu + L * xi;
    for (int j = 0; j < H; ++j) out[i][j] = clip.apply(forecast[j] + e[j]);
  }
  return out;
}

}  // namespace gridflow::forecast
