#ifndef GRIDFLOW_DEVICES_HPP
#define GRIDFLOW_DEVICES_HPP

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "gridflow/common.hpp"

namespace gridflow {

using DeviceId = int;

enum class SmoothingKind { None, Quadratic, L1 };

// Generator with convex quadratic generation cost alpha*u^2 + beta*u + gamma
// over generated power u = -p, box p_min <= u <= p_max, optional ramp limits
// and smoothing penalty on the terminal power differences.
struct GenericGenerator {
  double alpha = 0.0;  // $/MW^2
  double beta = 0.0;   // $/MW
  double gamma = 0.0;  // $, does not move the optimum
  double p_min = 0.0;
  double p_max = kInf;
  std::optional<double> ramp_up;    // max increase of terminal power per period
  std::optional<double> ramp_down;  // max decrease per period
  SmoothingKind smoothing = SmoothingKind::None;
  double smoothing_weight = 0.0;
};

struct FixedGenerator {
  Schedule p_fix;  // generated power, >= 0
};

struct RenewableGenerator {
  Schedule p_avail;  // available power per period (and scenario)
};

struct FixedLoad {
  Schedule p_fix;
};

struct CurtailableLoad {
  double p_des = 0.0;
  double p_min = 0.0;
  double lambda_curt = 0.0;  // $/MW penalty on shortfall
};

struct DeferrableLoad {
  double energy = 0.0;  // MWh required inside the window
  int start = 0;        // first period of the window (0-based, inclusive)
  int end = 0;          // last period of the window (inclusive)
  double p_max = kInf;
  // If >= 0, the window requirement becomes two-sided [energy_min, energy].
  // Used by the MPC engine for partially covered windows.
  double energy_min = -1.0;
};

struct ThermalLoad {
  double heat_capacity = 1.0;   // c
  double conductivity = 0.0;    // mu > 0
  Schedule ambient;             // theta_amb, may vary over time
  double cop = 1.0;             // eta; negative values model heating
  double temp_min = -kInf;
  double temp_max = kInf;
  double p_max = kInf;
  double temp_init = 0.0;
};

struct GridTie {
  double price_buy = 0.0;
  double price_sell = 0.0;  // requires price_buy >= price_sell >= 0
  double max_buy = kInf;
  double max_sell = kInf;
};

struct PowerDissipator {};

struct LosslessLine {
  double p_min = -kInf;  // bounds on terminal-1 power
  double p_max = kInf;
  double flow_cost = 0.0;  // optional quadratic cost weight on the flow
  static LosslessLine symmetric(double cap, double flow_cost = 0.0) {
    return LosslessLine{-cap, cap, flow_cost};
  }
};

// Lossy transmission line, lowered as the convex hull of the loss curve
// p1 + p2 = loss * ((p1 - p2)/2)^2, approximated by tangent cuts so that the
// compiled problem stays a QP.  Tangency points are spaced p_max/(cuts-1)
// apart, mirrored over [-p_max, p_max]; the polyline undershoots the parabola
// by at most loss * (p_max/(cuts-1))^2 / 4.
struct LossyLine {
  double loss = 0.0;   // 1/MW
  double p_max = 0.0;  // bound on |(p1 - p2)/2|
  int cuts = 20;
};

struct Converter {
  double eff_fwd = 1.0;  // eta in (0,1)
  double eff_rev = 1.0;  // eta~ in (0,1)
  double p_min = -kInf;  // bounds on input-terminal power
  double p_max = kInf;
};

struct IdealStorage {
  double leakage = 1e-12;  // per-period leakage, in (0, 1]
  double energy_min = 0.0;
  double energy_max = 0.0;
  double energy_init = 0.0;
  double p_min = 0.0;  // discharge limit (negative)
  double p_max = 0.0;  // charge limit
  std::optional<double> energy_final;        // hard terminal constraint E_T = value
  std::optional<double> final_energy_price;  // linear terminal cost slope ($/MWh)
  double cycle_cost = 0.0;                   // beta, $/MW on |p|
};

// Charge/discharge amortization rate from capital cost and cycle life.
inline double storage_cycle_cost_rate(double capital_cost, double period_hours,
                                      int cycles, double energy_min,
                                      double energy_max) {
  return capital_cost * period_hours /
         (2.0 * cycles * (energy_max - energy_min));
}

// A composite is flattened at construction: the part devices and internal
// nets are materialized (hidden) in the network and the composite only keeps
// their ids plus the exposed terminals.  See Network::add_composite.
struct Composite {
  std::vector<DeviceId> parts;
  std::vector<int> exposed_terminals;  // global terminal indices
};

using DeviceSpec =
    std::variant<GenericGenerator, FixedGenerator, RenewableGenerator,
                 FixedLoad, CurtailableLoad, DeferrableLoad, ThermalLoad,
                 GridTie, PowerDissipator, LosslessLine, LossyLine, Converter,
                 IdealStorage, Composite>;

const char* device_kind_name(const DeviceSpec& spec);
int terminal_count(const DeviceSpec& spec);

// Parameter and schedule-shape checks; returns one message per violation.
std::vector<std::string> validate_spec(const DeviceSpec& spec, int T, int S);

// Scenario-s cost of the device for an M_d x T power matrix.  Returns +inf
// when a hard constraint is violated by more than `tol`.  The feasible set
// checked for LossyLine/Converter is the same relaxation the compiler emits.
double evaluate_cost(const DeviceSpec& spec, const Eigen::MatrixXd& power,
                     int scenario, int T, double period_hours,
                     double tol = 1e-6);

// Hull-gap diagnostic for a lossy line: p1 + p2 - loss*((p1-p2)/2)^2 per
// period (positive means power wasted above the loss curve, small negative
// values mean the point sits below the parabola on the tangent polyline).
std::vector<double> lossy_line_relaxation_gap(const LossyLine& line,
                                              const Eigen::MatrixXd& power);

}  // namespace gridflow

#endif
