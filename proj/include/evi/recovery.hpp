#pragma once

#include "evi/problem.hpp"

namespace evi {

/// Distributed control from the discrete state: solve the interior mass
/// system (u_h, v) = (grad y_h, grad v) - (f, v) for v in V_h^0.
/// The result is a V_h^0 function (zero boundary coefficients).
FeFunction recover_control_distributed(const Mesh& mesh, const FeFunction& y_h,
                                       const ScalarField& f);

/// Dirichlet control is the boundary trace, in boundary_nodes() order.
Eigen::VectorXd recover_control_dirichlet(const Mesh& mesh, const FeFunction& y_h);

/// Neumann control from <u_h, v>_Gamma = a(y_h, v) - (f, v) tested with
/// boundary basis functions; solves the boundary mass system.
Eigen::VectorXd recover_control_neumann(const Mesh& mesh, const FeFunction& y_h,
                                        const ScalarField& f, BilinearKind form);

/// Debug variant: elementwise normal trace grad(y_h) . n averaged over the
/// boundary edges adjacent to each boundary node.  Not used in tables.
Eigen::VectorXd recover_control_neumann_flux(const Mesh& mesh, const FeFunction& y_h);

/// Kind-dispatched recovery.  Returns nodal values over all nodes for
/// distributed-type controls and boundary-ordered values otherwise;
/// *on_boundary tells which.
Eigen::VectorXd recover_control(const ProblemSpec& spec, const Mesh& mesh,
                                const FeSolutionBundle& bundle, bool* on_boundary);

}  // namespace evi
