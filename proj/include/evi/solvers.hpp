#pragma once

#include <utility>
#include <vector>

#include "evi/problem.hpp"

namespace evi {

struct SolverConfig {
  double tol = 5.0e-8;
  int max_iter = 200000;
  double pdhg_prox_gamma = -1.0;  // < 0: use 10 * alpha
  double pdhg_prox_s = 1.0;
  double step_scale = 1.0;     // multiplies the internal row-sum normalization
  double adjoint_scale = -1.0;  // congruence weight of adjoint dofs; < 0: automatic
  bool record_history = false;
};

struct SolveStats {
  int iterations = 0;
  double final_residual = 0.0;
  std::vector<std::pair<int, double>> history;  // (iteration, residual)
};

/// First-order optimality report for a candidate solution X.
/// The multiplier estimate on constrained dofs is lambda = (S X + b),
/// which is <= 0 at a solution, vanishing where the bound is inactive.
struct KktReport {
  double feasibility_violation = 0.0;   // max(0, X_i - psi_i)
  double stationarity_residual = 0.0;   // ||X - P(X - (S X + b))||_2
  double complementarity = 0.0;         // sum |lambda_i (psi_i - X_i)|
  double multiplier_sign_violation = 0.0;  // max(0, lambda_i)
};

KktReport check_kkt(const ViSystem& sys, const Eigen::VectorXd& x);

/// Projection-gradient iteration for X = P(X - (S X + b)):
///   g = S X + b,  e = X - P(X - g),  d = S^T e + g,
///   rho = |e|^2 / |(S^T + I) e|^2,  X <- P(X - rho d).
/// Internally the iteration runs on the row-sum-normalized instance
/// (c S, c b), which has the same solution set; the stopping test uses
/// the unscaled residual.  Throws SolverError past max_iter.
Eigen::VectorXd projection_gradient_x(const ViSystem& sys, const SolverConfig& cfg,
                                      SolveStats* stats = nullptr,
                                      const Eigen::VectorXd* warm = nullptr);
FeSolutionBundle projection_gradient_solve(const ViSystem& sys, const SolverConfig& cfg,
                                           const Eigen::VectorXd* warm = nullptr);

/// Primal-dual hybrid gradient splitting for the saddle systems of
/// boundary-control problems.  The primal half-step is an obstacle
/// problem solved by the projection-gradient method to tol/10; the dual
/// half-step is a Poisson solve.
FeSolutionBundle pdhg_solve(const ViSystem& sys, const SolverConfig& cfg,
                            SolveStats* stats = nullptr);

/// Exhaustive enumeration of active sets (up to 16 constrained dofs):
/// for each candidate set the equality-constrained KKT system is solved
/// densely; the unique candidate with feasible primal point and
/// non-positive multipliers is returned.
Eigen::VectorXd active_set_oracle_x(const ViSystem& sys);
FeSolutionBundle active_set_oracle(const ViSystem& sys);

/// Assemble the bundle for a solution vector of sys.
FeSolutionBundle make_bundle(const ViSystem& sys, const Eigen::VectorXd& x,
                             int iterations, double residual);

}  // namespace evi
