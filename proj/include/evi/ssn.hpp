#pragma once

#include <vector>

#include "evi/problem.hpp"

namespace evi {

/// Newton iterate for the penalized gradient-constrained functional.
/// active_elements flags triangles with |grad y|^2 > y_b^2; gradients of
/// P1 functions are elementwise constant, so the flag is exact.
struct PenaltyState {
  double gamma = 1.0;
  FeFunction y;
  std::vector<std::uint8_t> active_elements;
};

struct ContinuationSchedule {
  std::vector<double> gamma_values = {1.0, 10.0, 100.0, 1e3, 1e4, 1e5};
  double newton_tol = 1e-10;  // H1 norm of the Newton increment
  int newton_max = 50;
};

std::array<double, 2> element_gradient(const Mesh& mesh, const Eigen::VectorXd& values,
                                       int tri);

std::vector<std::uint8_t> active_elements(const Mesh& mesh, const FeFunction& y,
                                          const ScalarField& y_b);

/// max over triangles of (|grad y| - y_b)+.
double gradient_violation(const Mesh& mesh, const FeFunction& y, const ScalarField& y_b);

/// One linearized step of the penalized problem, over interior dofs:
/// the weighted stiffness term (alpha + 2 gamma chi (|grad y|^2 - y_b^2)),
/// the rank-one term 4 gamma chi (grad y x grad y), and the mass term;
/// right side 4 gamma chi |grad y|^2 grad y . grad v + (y_d, v).
std::pair<SpMat, Eigen::VectorXd> newton_step_assemble(const Mesh& mesh,
                                                       const PenaltyState& state,
                                                       const ProblemSpec& spec);

/// Penalty continuation: for each gamma in the schedule run Newton until
/// the H1 increment drops below newton_tol, warm-starting from the
/// previous gamma.  The initial guess is the unconstrained solve.
/// `gamma_violations`, when given, receives the constraint violation
/// after each gamma stage.
FeSolutionBundle ssn_penalized_solve(const ProblemSpec& spec, const Mesh& mesh,
                                     const ContinuationSchedule& sched = {},
                                     std::vector<double>* gamma_violations = nullptr);

}  // namespace evi
