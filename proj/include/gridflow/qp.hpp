#ifndef GRIDFLOW_QP_HPP
#define GRIDFLOW_QP_HPP

#include <string>

#include <Eigen/Sparse>

#include "gridflow/problem.hpp"

namespace gridflow {

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations };

const char* to_string(SolveStatus s);

struct SolverSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iterations = 200000;
  double rho = 0.1;        // step for inequality rows; equality rows get 1e3x
  double sigma = 1e-6;
  double over_relaxation = 1.6;
  bool adaptive_rho = true;
  bool polish = true;
  double polish_reg = 1e-6;
  // Added to the diagonal of P.  Tests that need a unique optimum set 1e-9.
  double regularization = 0.0;
  int check_interval = 25;
  int scaling_iterations = 10;
  unsigned seed = 0;  // reserved; the solver is deterministic
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = kInf;  // max violation of l <= Cx <= u
  double dual_residual = kInf;    // ||Px + q + C'y||_inf
  double objective = 0.0;         // includes the problem's constant term
  bool polished = false;
  int worst_row = -1;  // most violated / certificate-dominant row
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // row duals; stationarity is Px + q + C'y = 0,
                      // y >= 0 on active upper bounds, y <= 0 on lower
  SolveReport report;
};

// Operator-splitting (ADMM) solver with Ruiz equilibration and an optional
// active-set polish step.  Deterministic: identical inputs give identical
// outputs.  x0/y0 warm-start the iteration when given.
QpResult solve_qp(const CanonicalProblem& prob, const SolverSettings& settings = {},
                  const Eigen::VectorXd* x0 = nullptr,
                  const Eigen::VectorXd* y0 = nullptr);

}  // namespace gridflow

#endif
