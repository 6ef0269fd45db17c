#ifndef GRIDFLOW_MPC_HPP
#define GRIDFLOW_MPC_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridflow/forecast.hpp"
#include "gridflow/pricing.hpp"
#include "gridflow/solution.hpp"

namespace gridflow {

enum class SimMode { Dopf, Mpc, RobustMpc };

// Which device parameter a realized/forecast series drives.
enum class Quantity { FixedLoadPower, RenewableAvail };

struct UncertainSeries {
  DeviceId device = -1;
  Quantity quantity = Quantity::FixedLoadPower;
  std::vector<double> truth;  // full run
};

struct ForecastBinding {
  enum class Kind { Oracle, Persistence, Model };
  Kind kind = Kind::Persistence;
  forecast::Pipeline pipeline;  // used when kind == Model
  forecast::ClipRange clip;     // applied to persistence/model forecasts
};

struct TerminalCondition {
  enum class Kind { None, Constraint, Cost };
  Kind kind = Kind::Constraint;
  double value = 0.0;  // energy target or cost slope
  static TerminalCondition none() { return {Kind::None, 0.0}; }
  static TerminalCondition constraint(double e) { return {Kind::Constraint, e}; }
  static TerminalCondition cost(double slope) { return {Kind::Cost, slope}; }
};

struct SimulationConfig {
  int horizon = 1;                       // planning window length T
  SimMode mode = SimMode::Dopf;
  int scenario_count = 1;                // K, robust mode
  uint64_t seed = 0;                     // scenario sampling
  bool warm_start = true;
  double infeasibility_penalty = 1e4;    // softening of forecast-driven rows
  SolverSettings solver;
  // Storage terminal condition per MPC window; unlisted devices default to
  // E_T pinned at the device's configured initial energy.  DOPF applies only
  // explicitly listed conditions.
  std::map<DeviceId, TerminalCondition> terminal;
  bool keep_planned = false;             // retain window solutions (diagnostics)
};

struct StepRecord {
  int period = 0;
  std::vector<double> executed;      // M terminal powers
  std::vector<double> price;         // N first-column prices
  std::vector<double> payment;       // per device, executed period
  double realized_cost = 0.0;        // true per-period cost
  SolveReport report;
  bool softened = false;             // infeasible window re-solved with slack
  int window_length = 0;
};

struct SimulationTrace {
  std::vector<StepRecord> steps;
  double realized_total = 0.0;
  std::vector<double> device_payment_total;  // per device over the run
  // Diagnostics: planned trajectories of the first window (optional use).
  std::vector<Solution> planned;
  bool keep_planned = false;
};

struct SimInput {
  std::vector<UncertainSeries> series;
  std::map<DeviceId, ForecastBinding> forecasters;
  int run_length = 0;
  // Baseline time index of run step 0, so model forecasters trained on a
  // historical series stay phase-aligned with the run.
  int time_offset = 0;
};

// Whole-horizon prescient solve; the lower-bound benchmark.
SimulationTrace run_dopf(const Network& base, const SimInput& input,
                         const SimulationConfig& config);

// Certainty-equivalent MPC: forecast, optimize the window, execute the first
// column, carry storage/thermal state forward.
SimulationTrace run_mpc(const Network& base, const SimInput& input,
                        const SimulationConfig& config);

// Scenario-robust MPC per the information-pattern constrained problem.
SimulationTrace run_robust_mpc(const Network& base, const SimInput& input,
                               const SimulationConfig& config);

// True cost of one executed period (separable device costs at true data).
double realized_period_cost(const Network& base, const SimInput& input, int t,
                            const std::vector<double>& executed);

// Payment ledger for one planning window's solution: everything beyond the
// first period is a planned payment, never carried out.
PaymentLedger planned_payments(const Network& window_net, const Solution& plan);

}  // namespace gridflow

#endif
