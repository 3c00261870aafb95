#include "evi/ssn.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <string>

#include "evi/error.hpp"

namespace evi {

std::array<double, 2> element_gradient(const Mesh& mesh, const Eigen::VectorXd& values,
                                       int tri) {
  const auto& t = mesh.triangles[tri];
  const double area = mesh.tri_area(tri);
  double gx = 0.0, gy = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto& a = mesh.nodes[t[(i + 1) % 3]];
    const auto& b = mesh.nodes[t[(i + 2) % 3]];
    gx += values[t[i]] * (a[1] - b[1]) / (2.0 * area);
    gy += values[t[i]] * (b[0] - a[0]) / (2.0 * area);
  }
  return {gx, gy};
}

namespace {

double bound_on_element(const Mesh& mesh, const ScalarField& y_b, int tri) {
  const auto& t = mesh.triangles[tri];
  const double cx =
      (mesh.nodes[t[0]][0] + mesh.nodes[t[1]][0] + mesh.nodes[t[2]][0]) / 3.0;
  const double cy =
      (mesh.nodes[t[0]][1] + mesh.nodes[t[1]][1] + mesh.nodes[t[2]][1]) / 3.0;
  return y_b(cx, cy);
}

}  // namespace

std::vector<std::uint8_t> active_elements(const Mesh& mesh, const FeFunction& y,
                                          const ScalarField& y_b) {
  std::vector<std::uint8_t> flags(mesh.triangle_count(), 0);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = element_gradient(mesh, y.values, t);
    const double yb = bound_on_element(mesh, y_b, t);
    flags[t] = (g[0] * g[0] + g[1] * g[1] > yb * yb) ? 1 : 0;
  }
  return flags;
}

double gradient_violation(const Mesh& mesh, const FeFunction& y, const ScalarField& y_b) {
  double worst = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = element_gradient(mesh, y.values, t);
    const double yb = bound_on_element(mesh, y_b, t);
    worst = std::max(worst, std::hypot(g[0], g[1]) - yb);
  }
  return std::max(worst, 0.0);
}

std::pair<SpMat, Eigen::VectorXd> newton_step_assemble(const Mesh& mesh,
                                                       const PenaltyState& state,
                                                       const ProblemSpec& spec) {
  const double gamma = state.gamma;
  const double alpha = spec.alpha;
  const Eigen::VectorXd& yk = state.y.values;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.triangles.size() * 9);
  Eigen::VectorXd rhs = assemble_load(mesh, spec.y_d);

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.tri_area(t);
    const bool active = state.active_elements[t] != 0;

    Eigen::Matrix<double, 3, 2> g;
    for (int i = 0; i < 3; ++i) {
      const auto& a = mesh.nodes[tri[(i + 1) % 3]];
      const auto& b = mesh.nodes[tri[(i + 2) % 3]];
      g(i, 0) = (a[1] - b[1]) / (2.0 * area);
      g(i, 1) = (b[0] - a[0]) / (2.0 * area);
    }
    const Eigen::Vector2d q =
        g.transpose() * Eigen::Vector3d(yk[tri[0]], yk[tri[1]], yk[tri[2]]);
    const double g2 = q.squaredNorm();

    double weight = alpha;
    if (active) {
      const double yb = bound_on_element(mesh, spec.y_b, t);
      weight += 2.0 * gamma * (g2 - yb * yb);
    }

    Eigen::Matrix3d loc = (area * weight) * (g * g.transpose());
    if (active) {
      const Eigen::Vector3d gq = g * q;  // grad(phi_i) . grad(y_k)
      loc += (4.0 * gamma * area) * (gq * gq.transpose());
      const double rw = 4.0 * gamma * g2 * area;
      for (int i = 0; i < 3; ++i) rhs[tri[i]] += rw * gq[i];
    }
    loc += local_mass(area);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], loc(a, b));
  }

  SpMat full(mesh.node_count(), mesh.node_count());
  full.setFromTriplets(trip.begin(), trip.end());

  const std::vector<int> interior = mesh.interior_nodes();
  SpMat M = extract_submatrix(full, interior, interior);
  // the analytic operator is symmetric; remove triplet-merge roundoff
  M = SpMat(0.5 * (M + SpMat(M.transpose())));
  Eigen::VectorXd r(interior.size());
  for (std::size_t k = 0; k < interior.size(); ++k) r[k] = rhs[interior[k]];
  return {std::move(M), std::move(r)};
}

FeSolutionBundle ssn_penalized_solve(const ProblemSpec& spec, const Mesh& mesh,
                                     const ContinuationSchedule& sched,
                                     std::vector<double>* gamma_violations) {
  if (spec.kind != ProblemKind::GradientConstrained)
    throw StructureError("ssn_penalized_solve: spec is not gradient-constrained");
  if (sched.gamma_values.empty() || sched.gamma_values.front() != 1.0 ||
      sched.gamma_values.back() != 1e5)
    throw BoundsError("ssn_penalized_solve: schedule must increase from 1 to 1e5");
  for (std::size_t k = 1; k < sched.gamma_values.size(); ++k)
    if (sched.gamma_values[k] <= sched.gamma_values[k - 1])
      throw BoundsError("ssn_penalized_solve: schedule must be strictly increasing");

  const std::vector<int> interior = mesh.interior_nodes();
  const SpMat K = assemble_stiffness(mesh);
  const SpMat B = assemble_mass(mesh);

  auto embed = [&](const Eigen::VectorXd& vi) {
    FeFunction u = FeFunction::zero(mesh);
    for (std::size_t k = 0; k < interior.size(); ++k) u.values[interior[k]] = vi[k];
    return u;
  };

  // unconstrained minimizer as the starting point for gamma = 1
  PenaltyState state;
  {
    const SpMat A0 = extract_submatrix(SpMat(spec.alpha * K + B), interior, interior);
    const Eigen::VectorXd load = assemble_load(mesh, spec.y_d);
    Eigen::VectorXd li(interior.size());
    for (std::size_t k = 0; k < interior.size(); ++k) li[k] = load[interior[k]];
    Eigen::SimplicialLDLT<SpMat> ldlt(A0);
    if (ldlt.info() != Eigen::Success)
      throw SolverError("ssn_penalized_solve: factorization failed", 0.0, 0);
    state.y = embed(ldlt.solve(li));
  }

  if (gamma_violations) gamma_violations->clear();
  int total_newton = 0;
  double last_inc = 0.0;
  for (double gamma : sched.gamma_values) {
    state.gamma = gamma;
    double prev_inc = std::numeric_limits<double>::infinity();
    int grow_streak = 0;
    for (int it = 0; it < sched.newton_max; ++it) {
      state.active_elements = active_elements(mesh, state.y, spec.y_b);
      auto [M, r] = newton_step_assemble(mesh, state, spec);
      Eigen::SimplicialLDLT<SpMat> fact(M);
      if (fact.info() != Eigen::Success)
        throw SolverError("ssn_penalized_solve: Newton matrix not SPD at gamma " +
                              std::to_string(gamma),
                          0.0, it);
      FeFunction y_next = embed(fact.solve(r));
      const Eigen::VectorXd d = y_next.values - state.y.values;
      last_inc = std::sqrt(quad_form(K, d) + quad_form(B, d));
      state.y = std::move(y_next);
      ++total_newton;

      if (last_inc > prev_inc) {
        if (++grow_streak >= 5)
          throw SolverError("ssn_penalized_solve: Newton diverging at gamma " +
                                std::to_string(gamma) + ", iteration " +
                                std::to_string(it),
                            last_inc, it);
      } else {
        grow_streak = 0;
      }
      prev_inc = last_inc;
      if (last_inc < sched.newton_tol) break;
    }
    if (gamma_violations)
      gamma_violations->push_back(gradient_violation(mesh, state.y, spec.y_b));
  }

  FeSolutionBundle out;
  out.y_u_h = state.y;
  out.y_h = state.y;
  out.multiplier = Eigen::VectorXd::Zero(static_cast<int>(interior.size()));
  out.iterations = total_newton;
  out.final_residual = last_inc;
  out.gradient_violation = gradient_violation(mesh, state.y, spec.y_b);
  return out;
}

}  // namespace evi
