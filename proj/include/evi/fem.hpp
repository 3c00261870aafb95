#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <vector>

#include "evi/mesh.hpp"

namespace evi {

using SpMat = Eigen::SparseMatrix<double>;
using SpRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Pointwise data: f, y_d, y_b are plain callables (x1,x2) -> value.
using ScalarField = std::function<double(double, double)>;
using VecField = std::function<std::array<double, 2>(double, double)>;

/// Piecewise-linear nodal field on a mesh.
struct FeFunction {
  const Mesh* mesh = nullptr;
  Eigen::VectorXd values;

  FeFunction() = default;
  FeFunction(const Mesh& m, Eigen::VectorXd v) : mesh(&m), values(std::move(v)) {}
  static FeFunction zero(const Mesh& m) {
    return FeFunction(m, Eigen::VectorXd::Zero(m.node_count()));
  }
};

enum class BilinearKind { GradGrad, GradGradPlusMass };
enum class NormKind { L2, H1Semi, H1, L2Gamma };

/// Exact local matrices for a triangle (exposed for verification).
Eigen::Matrix3d local_stiffness(const std::array<double, 2>& p0,
                                const std::array<double, 2>& p1,
                                const std::array<double, 2>& p2);
Eigen::Matrix3d local_mass(double area);
Eigen::Matrix2d local_edge_mass(double length);

/// Global P1 matrices.  Stiffness is symmetric positive semidefinite with
/// the constants in its kernel; mass is symmetric positive definite.
SpMat assemble_stiffness(const Mesh& mesh);
SpMat assemble_mass(const Mesh& mesh);
SpMat assemble_form(const Mesh& mesh, BilinearKind kind);

/// 1D P1 mass matrix on the boundary, indexed by boundary_nodes() order.
SpMat assemble_boundary_mass(const Mesh& mesh);

/// Load vector f_i ~ integral of g * psi_i, by the 3-point edge-midpoint
/// rule (exact for quadratics).  Throws EvaluationError on non-finite g.
Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarField& g);

/// Lagrange interpolation of g at the mesh nodes.
FeFunction interpolate_nodal(const Mesh& mesh, const ScalarField& g);

/// Exact P1 interpolation onto a nested finer mesh of the same domain.
FeFunction prolong(const FeFunction& u, const Mesh& fine);

/// Evaluate u at an arbitrary point of its mesh (P1 interpolation).
double evaluate(const FeFunction& u, double x, double y);

double quad_form(const SpMat& M, const Eigen::VectorXd& v);
double fe_norm(const FeFunction& u, NormKind kind);

/// Trace of u on the boundary, ordered by boundary_nodes().
Eigen::VectorXd extract_trace(const FeFunction& u);

/// Quadrature-based errors against analytic fields (used by the
/// manufactured-solution studies).
double l2_error_vs(const FeFunction& u, const ScalarField& g);
double h1semi_error_vs(const FeFunction& u, const VecField& grad_g);

/// Conjugate gradients with diagonal preconditioning; relative residual
/// tolerance 1e-10 on the free dofs.  `fixed` dofs (if given) are
/// eliminated and pinned to `fixed_values`.  Throws SolverError when the
/// iteration cap is exceeded.
Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& rhs,
                          const std::vector<int>* fixed = nullptr,
                          const Eigen::VectorXd* fixed_values = nullptr,
                          double tol = 1e-10, int max_iter = -1);

/// Submatrix A(rows, cols) in the given orderings.
SpMat extract_submatrix(const SpMat& A, const std::vector<int>& rows,
                        const std::vector<int>& cols);

/// y = A x for row-major storage, parallel over rows.
void spmv(const SpRM& A, const double* x, double* y);

}  // namespace evi
