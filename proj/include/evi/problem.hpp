#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evi/fem.hpp"
#include "evi/mesh.hpp"

namespace evi {

enum class ProblemKind { Distributed, DirichletBC, NeumannBC, GradientConstrained };

std::string kind_name(ProblemKind k);

/// One control-problem instance: domain, regularization weight, target
/// state, obstacle and source.
struct ProblemSpec {
  ProblemKind kind = ProblemKind::Distributed;
  Domain domain = Domain::UnitSquare;
  double alpha = 0.1;
  ScalarField y_d;
  ScalarField y_b;
  ScalarField f;
  std::string case_id;

  BilinearKind form() const {
    return kind == ProblemKind::NeumannBC ? BilinearKind::GradGradPlusMass
                                          : BilinearKind::GradGrad;
  }
};

/// Registered cases, addressable as "distributed:2", "dirichlet:1",
/// "neumann:1", "gradient:1".  Throws LookupError for unknown keys.
ProblemSpec get_case(const std::string& key);
ProblemSpec get_case(ProblemKind kind, const std::string& case_id);
std::vector<std::string> list_cases();

/// Homogeneous part of the state: a(y_f, v) = (f, v) with zero Dirichlet
/// trace for Dirichlet-type problems, over the full space for Neumann.
FeFunction compute_yf(const ProblemSpec& spec, const Mesh& mesh);

/// Constant-coefficient 7-point operator on the interior lattice of a
/// structured UnitSquare mesh; equals the assembled alpha*K + B block.
struct StencilOp {
  int m = 0;  // interior lattice points per side
  double c_center = 0.0;
  double c_axis = 0.0;
  double c_skew = 0.0;  // neighbours along the cell diagonal

  void apply(const double* x, double* y, std::vector<double>& pad) const;
  double abs_row_sum_max() const {
    return std::abs(c_center) + 4.0 * std::abs(c_axis) + 2.0 * std::abs(c_skew);
  }

  // Fused projection-gradient passes (memory-bound at large sizes):
  // pass 1 evaluates g = c (S x + b), the unscaled and scaled fixed-point
  // residuals, and stores gs and e; pass 2 forms d = c S^T e + gs and the
  // squared norm of (c S^T + I) e.
  void pg_pass1(const double* x, const double* offset, const double* ub, double c,
                double* gs, double* e, double& res2, double& e2) const;
  void pg_pass2(const double* e, const double* gs, double c, double* d,
                double& t2) const;
};

/// Discrete variational-inequality instance
///   gradient(X) = S X + b,  X admissible iff X_i <= upper_i,
/// with S = A for distributed problems and the saddle blocks
/// [[A, -C^T], [C, 0]] for boundary-control problems.
struct ViSystem {
  ProblemKind kind = ProblemKind::Distributed;
  const Mesh* mesh = nullptr;
  FeFunction yf;
  double alpha = 0.0;

  std::vector<int> state_nodes;    // global node id per state dof
  std::vector<int> adjoint_nodes;  // global node id per adjoint dof

  std::optional<StencilOp> stencil;  // fast path for the state block
  SpRM A;                            // state block (unused when stencil set)
  SpRM C;                            // adjoint coupling rows
  SpRM CT;                           // C transposed

  Eigen::VectorXd offset;  // b
  Eigen::VectorXd upper;   // +infinity marks a free dof (all adjoint dofs)

  int n_state() const { return static_cast<int>(state_nodes.size()); }
  int n_adjoint() const { return static_cast<int>(adjoint_nodes.size()); }
  int size() const { return n_state() + n_adjoint(); }
  bool is_constrained(int i) const { return std::isfinite(upper[i]); }
  int constrained_count() const;

  void apply(const double* x, double* y, std::vector<double>& pad) const;   // S x
  void applyT(const double* x, double* y, std::vector<double>& pad) const;  // S^T x
  Eigen::VectorXd applyS(const Eigen::VectorXd& x) const;
  Eigen::VectorXd applyST(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd dense() const;  // assembled column by column; small systems only
  double abs_row_sum_max() const;
  void project(Eigen::VectorXd& x) const;

  /// Split a solution vector into finite element functions.
  FeFunction state_function(const Eigen::VectorXd& x) const;
  FeFunction adjoint_function(const Eigen::VectorXd& x) const;
};

struct BuildOptions {
  enum class Stencil { Auto, On, Off };
  Stencil stencil = Stencil::Auto;
};

/// Build the discrete VI for Distributed / DirichletBC / NeumannBC
/// problems.  GradientConstrained problems are handled by the penalized
/// Newton solver instead.
ViSystem build_vi_system(const ProblemSpec& spec, const Mesh& mesh,
                         const FeFunction& yf, const BuildOptions& opts = {});

/// Solver output: recovered state, its homogeneous part, the adjoint for
/// boundary-control problems, and the algebraic multiplier estimate.
struct FeSolutionBundle {
  FeFunction y_h;
  FeFunction y_u_h;
  std::optional<FeFunction> p_h;
  Eigen::VectorXd multiplier;  // (S X + b) on constrained dofs, 0 elsewhere
  int iterations = 0;
  double final_residual = 0.0;
  double gradient_violation = 0.0;  // gradient-constrained runs only
};

}  // namespace evi
