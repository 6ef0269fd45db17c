#ifndef GRIDFLOW_PRICING_HPP
#define GRIDFLOW_PRICING_HPP

#include <optional>
#include <string>
#include <vector>

#include "gridflow/solution.hpp"

namespace gridflow {

struct PriceSheet {
  Array3 price;  // N x T x S
  bool has_negative = false;
  std::vector<std::string> warnings;
  // Per-device view lambda_d = B_d A' lambda for one scenario (M_d x T).
  Eigen::MatrixXd device_prices(const Network& net, DeviceId d, int scenario) const;
};

PriceSheet price_sheet(const Network& net, const Solution& sol);

struct PaymentLedger {
  // Expected total payment per device (positive = device pays), hidden
  // composite parts rolled into their parent.
  std::vector<double> device_total;        // indexed by device id; 0 for hidden
  Array3 net_period_sum;                   // N x T x S sums (conservation of money)
  std::vector<Array3> device_period;       // per device: 1 x T x S payments
  bool planned = false;                    // MPC: only the first period executes
  double grand_total = 0.0;
};

// Requires an optimal solution; throws Error otherwise.
PaymentLedger payments(const Network& net, const Solution& sol);

struct PriceCheck {
  double finite_difference = 0.0;
  double reported = 0.0;
  double gap = 0.0;
  bool one_sided = false;  // perturbed problem infeasible on one side
};

// Central-difference validation of the reported price at (net n, period t,
// scenario s): (F(+eps e) - F(-eps e)) / (2 eps pi^(s)).
PriceCheck price_check(const Network& net, NetId n, int t, int s, double eps,
                       const SolverSettings& settings = {});

struct ProfitEntry {
  int local_terminal = 0;
  int period = 0;
  int scenario = 0;
  // Either a stationarity residual (differentiable point) or a subgradient
  // interval verdict for kinked costs / active bounds.
  std::optional<double> residual;
  bool interval_ok = true;
  double interval_lo = -kInf, interval_hi = kInf;  // -lambda must lie inside
};

struct ProfitCheck {
  bool checked = false;       // false: device cost is time/terminal coupled
  std::string note;
  double max_residual = 0.0;  // over differentiable entries
  bool intervals_ok = true;   // over kinked/boundary entries
  std::vector<ProfitEntry> entries;
};

// Verifies the profit-maximization stationarity grad f_d(p_d) + lambda_d = 0
// (or subgradient interval membership) for separable single-terminal devices.
ProfitCheck profit_check(const Network& net, const Solution& sol, DeviceId d,
                         double tol = 1e-5);

}  // namespace gridflow

#endif
