#include "evi/recovery.hpp"

#include <cmath>

#include "evi/error.hpp"
#include "evi/ssn.hpp"

namespace evi {

FeFunction recover_control_distributed(const Mesh& mesh, const FeFunction& y_h,
                                       const ScalarField& f) {
  const SpMat K = assemble_stiffness(mesh);
  const SpMat B = assemble_mass(mesh);
  const Eigen::VectorXd rhs_full = K * y_h.values - assemble_load(mesh, f);

  const std::vector<int> interior = mesh.interior_nodes();
  const SpMat B00 = extract_submatrix(B, interior, interior);
  Eigen::VectorXd rhs(interior.size());
  for (std::size_t k = 0; k < interior.size(); ++k) rhs[k] = rhs_full[interior[k]];

  const Eigen::VectorXd u = solve_spd(B00, rhs);
  FeFunction out = FeFunction::zero(mesh);
  for (std::size_t k = 0; k < interior.size(); ++k) out.values[interior[k]] = u[k];
  return out;
}

Eigen::VectorXd recover_control_dirichlet(const Mesh& mesh, const FeFunction& y_h) {
  (void)mesh;
  return extract_trace(y_h);
}

Eigen::VectorXd recover_control_neumann(const Mesh& mesh, const FeFunction& y_h,
                                        const ScalarField& f, BilinearKind form) {
  const SpMat L = assemble_form(mesh, form);
  const Eigen::VectorXd r_full = L * y_h.values - assemble_load(mesh, f);
  const auto& loop = mesh.boundary_loop;
  Eigen::VectorXd r(loop.size());
  for (std::size_t k = 0; k < loop.size(); ++k) r[k] = r_full[loop[k]];
  const SpMat Mg = assemble_boundary_mass(mesh);
  return solve_spd(Mg, r);
}

Eigen::VectorXd recover_control_neumann_flux(const Mesh& mesh, const FeFunction& y_h) {
  const auto& loop = mesh.boundary_loop;
  const int nb = static_cast<int>(loop.size());

  // triangles adjacent to each node
  std::vector<std::vector<int>> star(mesh.node_count());
  for (int t = 0; t < mesh.triangle_count(); ++t)
    for (int i = 0; i < 3; ++i) star[mesh.triangles[t][i]].push_back(t);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(nb);
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(nb);
  for (int k = 0; k < nb; ++k) {
    const int a = loop[k];
    const int b = loop[(k + 1) % nb];
    int tri = -1;
    for (int t : star[a]) {
      const auto& tt = mesh.triangles[t];
      if (tt[0] == b || tt[1] == b || tt[2] == b) {
        tri = t;
        break;
      }
    }
    if (tri < 0) throw StructureError("recover_control_neumann_flux: dangling edge");
    const auto g = element_gradient(mesh, y_h.values, tri);
    const double dx = mesh.nodes[b][0] - mesh.nodes[a][0];
    const double dy = mesh.nodes[b][1] - mesh.nodes[a][1];
    const double len = std::hypot(dx, dy);
    const double flux = (g[0] * dy - g[1] * dx) / len;  // outward for CCW walks
    acc[k] += flux;
    cnt[k] += 1.0;
    acc[(k + 1) % nb] += flux;
    cnt[(k + 1) % nb] += 1.0;
  }
  return acc.cwiseQuotient(cnt);
}

Eigen::VectorXd recover_control(const ProblemSpec& spec, const Mesh& mesh,
                                const FeSolutionBundle& bundle, bool* on_boundary) {
  switch (spec.kind) {
    case ProblemKind::Distributed:
    case ProblemKind::GradientConstrained:
      *on_boundary = false;
      return recover_control_distributed(mesh, bundle.y_h, spec.f).values;
    case ProblemKind::DirichletBC:
      *on_boundary = true;
      return recover_control_dirichlet(mesh, bundle.y_h);
    case ProblemKind::NeumannBC:
      *on_boundary = true;
      return recover_control_neumann(mesh, bundle.y_h, spec.f, spec.form());
  }
  throw StructureError("recover_control: unreachable");
}

}  // namespace evi
