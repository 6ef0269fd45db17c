#ifndef GRIDFLOW_SOLUTION_HPP
#define GRIDFLOW_SOLUTION_HPP

#include <map>
#include <optional>
#include <vector>

#include "gridflow/qp.hpp"

namespace gridflow {

struct AuxState {
  DeviceId device = -1;
  ColTag::Kind kind = ColTag::Kind::StorageEnergy;
  Array3 values;  // 1 x T x S
};

struct Solution {
  SolveReport report;
  Array3 power;      // M x T x S, terminal powers
  Array3 price;      // N x T x S; for S>1 the first-period price is the
                     // probability-weighted aggregate, identical across s
  Array3 price_raw;  // per-scenario duals / pi^(s), no aggregation
  std::vector<AuxState> aux;
  double objective = 0.0;
  Eigen::VectorXd x, y;  // raw solver vectors

  bool optimal() const { return report.status == SolveStatus::Optimal; }
  const Array3* storage_energy(DeviceId d) const {
    for (const auto& a : aux)
      if (a.device == d && a.kind == ColTag::Kind::StorageEnergy) return &a.values;
    return nullptr;
  }
  const Array3* thermal_temp(DeviceId d) const {
    for (const auto& a : aux)
      if (a.device == d && a.kind == ColTag::Kind::ThermalTemp) return &a.values;
    return nullptr;
  }
};

// Pure reshaping of solver vectors into power/price arrays and aux states.
Solution decode(const CanonicalProblem& prob, const QpResult& result);

// Fills the terminal block of x from a power array (test helper; decode of
// the result is the identity on terminal powers).
void encode_terminal_powers(const CanonicalProblem& prob, const Array3& power,
                            Eigen::VectorXd& x);

// compile + solve + decode in one call.
Solution solve_network(const Network& net, const SolverSettings& settings = {},
                       const Array3* delta = nullptr,
                       const Eigen::VectorXd* x0 = nullptr,
                       const Eigen::VectorXd* y0 = nullptr);

}  // namespace gridflow

#endif
