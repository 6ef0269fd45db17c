#ifndef GRIDFLOW_PROBLEM_HPP
#define GRIDFLOW_PROBLEM_HPP

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "gridflow/common.hpp"
#include "gridflow/network.hpp"

namespace gridflow {

struct ColTag {
  enum class Kind {
    TerminalPower,
    StorageEnergy,
    ThermalTemp,
    GridEpigraph,
    AbsCharge,   // epigraph of |p| for storage cycle cost
    AbsSmooth,   // epigraph of |dp| for l1 smoothing
  };
  Kind kind = Kind::TerminalPower;
  DeviceId device = -1;
  int index = 0;  // local terminal (TerminalPower) or aux time index
  int period = 0;
  int scenario = 0;
};

struct RowTag {
  enum class Kind { NetBalance, Device, InfoPattern };
  Kind kind = Kind::Device;
  NetId net = -1;           // NetBalance
  DeviceId device = -1;     // Device rows
  int terminal = -1;        // InfoPattern: global terminal index
  const char* label = "";   // short row description
  int period = 0;
  int scenario = 0;
  int scenario2 = -1;       // InfoPattern pairs scenario with scenario2 (=0)
};

// Sparse convex QP with two-sided linear constraints:
//   minimize    (1/2) x'Px + q'x + objective_constant
//   subject to  l <= Cx <= u
// Every column and row carries a provenance tag so primal/dual vectors map
// back to (device/net, period, scenario).
struct CanonicalProblem {
  int n = 0;
  int m = 0;
  Eigen::SparseMatrix<double> P;  // n x n, symmetric PSD, both triangles stored
  Eigen::VectorXd q;
  double objective_constant = 0.0;
  Eigen::SparseMatrix<double> C;  // m x n
  Eigen::VectorXd l, u;
  std::vector<ColTag> col_tags;
  std::vector<RowTag> row_tags;

  // Layout of the leading blocks (terminal columns, net-balance rows).
  int M = 0, N = 0, T = 1, S = 1;
  std::vector<double> prob{1.0};

  int terminal_col(int m_global, int t, int s) const {
    return (s * T + t) * M + m_global;
  }
  int net_row(int n_idx, int t, int s) const {
    return (s * T + t) * N + n_idx;
  }

  double objective_at(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(P * x) + q.dot(x) + objective_constant;
  }

  std::string describe_row(int row, const Network& net) const;
};

// delta has shape N x T x S; NetBalance rows encode A p^(s) + delta^(s) = 0.
CanonicalProblem compile(const Network& net, const Array3* delta = nullptr);

// Plain-text dump for cross-checking against external solvers: one line per
// nonzero (row col value) in P and C sections, then q and the row bounds.
void dump_triplets(std::ostream& os, const CanonicalProblem& prob);

}  // namespace gridflow

#endif
