#include "evi/fem.hpp"

#include <cmath>
#include <string>

#include "evi/error.hpp"

namespace evi {

Eigen::Matrix3d local_stiffness(const std::array<double, 2>& p0,
                                const std::array<double, 2>& p1,
                                const std::array<double, 2>& p2) {
  const double area =
      0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]));
  // grad(phi_i) = rot(p_{i+1} - p_{i+2}) / (2 area), rot(v) = (v_y, -v_x)
  Eigen::Matrix<double, 3, 2> g;
  const std::array<const std::array<double, 2>*, 3> p = {&p0, &p1, &p2};
  for (int i = 0; i < 3; ++i) {
    const auto& a = *p[(i + 1) % 3];
    const auto& b = *p[(i + 2) % 3];
    g(i, 0) = (a[1] - b[1]) / (2.0 * area);
    g(i, 1) = (b[0] - a[0]) / (2.0 * area);
  }
  return area * (g * g.transpose());
}

Eigen::Matrix3d local_mass(double area) {
  Eigen::Matrix3d m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return (area / 12.0) * m;
}

Eigen::Matrix2d local_edge_mass(double length) {
  Eigen::Matrix2d m;
  m << 2, 1, 1, 2;
  return (length / 6.0) * m;
}

namespace {

template <class LocalFn>
SpMat assemble_p1(const Mesh& mesh, LocalFn local) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Matrix3d loc = local(t, tri);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(tri[a], tri[b], loc(a, b));
  }
  SpMat A(mesh.node_count(), mesh.node_count());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace

SpMat assemble_stiffness(const Mesh& mesh) {
  return assemble_p1(mesh, [&](int, const std::array<int, 3>& tri) {
    return local_stiffness(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
  });
}

SpMat assemble_mass(const Mesh& mesh) {
  return assemble_p1(mesh, [&](int t, const std::array<int, 3>&) {
    return local_mass(mesh.tri_area(t));
  });
}

SpMat assemble_form(const Mesh& mesh, BilinearKind kind) {
  SpMat A = assemble_stiffness(mesh);
  if (kind == BilinearKind::GradGradPlusMass) A += assemble_mass(mesh);
  return A;
}

SpMat assemble_boundary_mass(const Mesh& mesh) {
  const auto& loop = mesh.boundary_loop;
  const int nb = static_cast<int>(loop.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nb * 4);
  for (int k = 0; k < nb; ++k) {
    const int a = k;
    const int b = (k + 1) % nb;
    const auto& pa = mesh.nodes[loop[a]];
    const auto& pb = mesh.nodes[loop[b]];
    const double len = std::hypot(pb[0] - pa[0], pb[1] - pa[1]);
    const Eigen::Matrix2d loc = local_edge_mass(len);
    trip.emplace_back(a, a, loc(0, 0));
    trip.emplace_back(a, b, loc(0, 1));
    trip.emplace_back(b, a, loc(1, 0));
    trip.emplace_back(b, b, loc(1, 1));
  }
  SpMat M(nb, nb);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarField& g) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.node_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double w = mesh.tri_area(t) / 6.0;
    double gm[3];  // midpoints of edges (0,1), (1,2), (2,0)
    for (int e = 0; e < 3; ++e) {
      const auto& a = mesh.nodes[tri[e]];
      const auto& b = mesh.nodes[tri[(e + 1) % 3]];
      gm[e] = g(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
      if (!std::isfinite(gm[e]))
        throw EvaluationError("assemble_load: non-finite value at quadrature point");
    }
    f[tri[0]] += w * (gm[0] + gm[2]);
    f[tri[1]] += w * (gm[1] + gm[0]);
    f[tri[2]] += w * (gm[2] + gm[1]);
  }
  return f;
}

FeFunction interpolate_nodal(const Mesh& mesh, const ScalarField& g) {
  Eigen::VectorXd v(mesh.node_count());
  for (int k = 0; k < mesh.node_count(); ++k) {
    v[k] = g(mesh.nodes[k][0], mesh.nodes[k][1]);
    if (!std::isfinite(v[k]))
      throw EvaluationError("interpolate_nodal: non-finite value at node");
  }
  return FeFunction(mesh, std::move(v));
}

namespace {

// P1 value at local coordinates (lx, ly) of a lattice cell split along the
// bottom-left -> top-right diagonal.
double cell_interp(const Mesh& coarse, int I, int J, double lx, double ly,
                   const Eigen::VectorXd& v) {
  const int bl = coarse.node_at(I, J);
  const int br = coarse.node_at(I + 1, J);
  const int tr = coarse.node_at(I + 1, J + 1);
  const int tl = coarse.node_at(I, J + 1);
  if (lx >= ly) {
    if (bl < 0 || br < 0 || tr < 0)
      throw StructureError("prolong: point outside coarse mesh");
    return v[bl] * (1.0 - lx) + v[br] * (lx - ly) + v[tr] * ly;
  }
  if (bl < 0 || tr < 0 || tl < 0)
    throw StructureError("prolong: point outside coarse mesh");
  return v[bl] * (1.0 - ly) + v[tr] * lx + v[tl] * (ly - lx);
}

bool cell_exists(const Mesh& m, int I, int J) {
  return I >= 0 && J >= 0 && I < m.cells && J < m.cells && m.node_at(I, J) >= 0 &&
         m.node_at(I + 1, J) >= 0 && m.node_at(I + 1, J + 1) >= 0 &&
         m.node_at(I, J + 1) >= 0;
}

}  // namespace

FeFunction prolong(const FeFunction& u, const Mesh& fine) {
  const Mesh& coarse = *u.mesh;
  if (fine.domain != coarse.domain || fine.level <= coarse.level)
    throw StructureError("prolong: fine mesh is not a refinement descendant");
  const int delta = fine.level - coarse.level;
  const int scale = 1 << delta;

  Eigen::VectorXd out(fine.node_count());
  for (int k = 0; k < fine.node_count(); ++k) {
    const int i = fine.node_lattice[k][0];
    const int j = fine.node_lattice[k][1];
    int I = i / scale;
    int J = j / scale;
    int ri = i - I * scale;
    int rj = j - J * scale;
    if (I == coarse.cells) { --I; ri = scale; }
    if (J == coarse.cells) { --J; rj = scale; }
    // On the LShape a node exactly on the re-entrant edge can have its
    // floor cell inside the cut-out; step to the neighbouring kept cell.
    if (!cell_exists(coarse, I, J)) {
      if (ri == 0 && cell_exists(coarse, I - 1, J)) { --I; ri = scale; }
      else if (rj == 0 && cell_exists(coarse, I, J - 1)) { --J; rj = scale; }
    }
    out[k] = cell_interp(coarse, I, J, double(ri) / scale, double(rj) / scale, u.values);
  }
  return FeFunction(fine, std::move(out));
}

double evaluate(const FeFunction& u, double x, double y) {
  const Mesh& m = *u.mesh;
  const double gx = (x - m.x0) / m.h;
  const double gy = (y - m.y0) / m.h;
  int I = static_cast<int>(std::floor(gx));
  int J = static_cast<int>(std::floor(gy));
  I = std::max(0, std::min(I, m.cells - 1));
  J = std::max(0, std::min(J, m.cells - 1));
  if (!cell_exists(m, I, J)) {
    if (gx - I <= 0.0 && cell_exists(m, I - 1, J)) --I;
    else if (gy - J <= 0.0 && cell_exists(m, I, J - 1)) --J;
  }
  return cell_interp(m, I, J, gx - I, gy - J, u.values);
}

double quad_form(const SpMat& M, const Eigen::VectorXd& v) {
  return v.dot(M * v);
}

double fe_norm(const FeFunction& u, NormKind kind) {
  const Mesh& m = *u.mesh;
  switch (kind) {
    case NormKind::L2:
      return std::sqrt(std::max(0.0, quad_form(assemble_mass(m), u.values)));
    case NormKind::H1Semi:
      return std::sqrt(std::max(0.0, quad_form(assemble_stiffness(m), u.values)));
    case NormKind::H1: {
      const double s = quad_form(assemble_stiffness(m), u.values) +
                       quad_form(assemble_mass(m), u.values);
      return std::sqrt(std::max(0.0, s));
    }
    case NormKind::L2Gamma: {
      const Eigen::VectorXd t = extract_trace(u);
      return std::sqrt(std::max(0.0, quad_form(assemble_boundary_mass(m), t)));
    }
  }
  return 0.0;
}

Eigen::VectorXd extract_trace(const FeFunction& u) {
  const auto& loop = u.mesh->boundary_loop;
  Eigen::VectorXd t(loop.size());
  for (std::size_t k = 0; k < loop.size(); ++k) t[k] = u.values[loop[k]];
  return t;
}

double l2_error_vs(const FeFunction& u, const ScalarField& g) {
  const Mesh& m = *u.mesh;
  double acc = 0.0;
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const double w = m.tri_area(t) / 3.0;
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      const double mx = 0.5 * (m.nodes[a][0] + m.nodes[b][0]);
      const double my = 0.5 * (m.nodes[a][1] + m.nodes[b][1]);
      const double uh = 0.5 * (u.values[a] + u.values[b]);
      const double d = uh - g(mx, my);
      acc += w * d * d;
    }
  }
  return std::sqrt(acc);
}

double h1semi_error_vs(const FeFunction& u, const VecField& grad_g) {
  const Mesh& m = *u.mesh;
  double acc = 0.0;
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangles[t];
    const double area = m.tri_area(t);
    // constant gradient of u_h on this triangle
    double gux = 0.0, guy = 0.0;
    for (int i = 0; i < 3; ++i) {
      const auto& a = m.nodes[tri[(i + 1) % 3]];
      const auto& b = m.nodes[tri[(i + 2) % 3]];
      gux += u.values[tri[i]] * (a[1] - b[1]) / (2.0 * area);
      guy += u.values[tri[i]] * (b[0] - a[0]) / (2.0 * area);
    }
    const double w = area / 3.0;
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      const auto gg = grad_g(0.5 * (m.nodes[a][0] + m.nodes[b][0]),
                             0.5 * (m.nodes[a][1] + m.nodes[b][1]));
      const double dx = gux - gg[0], dy = guy - gg[1];
      acc += w * (dx * dx + dy * dy);
    }
  }
  return std::sqrt(acc);
}

SpMat extract_submatrix(const SpMat& A, const std::vector<int>& rows,
                        const std::vector<int>& cols) {
  std::vector<int> rowmap(A.rows(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) rowmap[rows[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (SpMat::InnerIterator it(A, cols[c]); it; ++it) {
      const int r = rowmap[it.row()];
      if (r >= 0) trip.emplace_back(r, static_cast<int>(c), it.value());
    }
  }
  SpMat S(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

Eigen::VectorXd solve_spd(const SpMat& A, const Eigen::VectorXd& rhs,
                          const std::vector<int>* fixed,
                          const Eigen::VectorXd* fixed_values, double tol,
                          int max_iter) {
  const int n = static_cast<int>(A.rows());
  if (rhs.size() != n) throw StructureError("solve_spd: dimension mismatch");

  auto run_cg = [&](const SpMat& M, const Eigen::VectorXd& b,
                    const Eigen::VectorXd* guess) {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(tol);
    if (max_iter > 0) cg.setMaxIterations(max_iter);
    cg.compute(M);
    Eigen::VectorXd x;
    if (guess) x = cg.solveWithGuess(b, *guess);
    else x = cg.solve(b);
    if (cg.info() != Eigen::Success)
      throw SolverError("solve_spd: cg did not converge, relative residual " +
                            std::to_string(cg.error()),
                        cg.error(), static_cast<int>(cg.iterations()));
    return x;
  };

  if (!fixed || fixed->empty()) return run_cg(A, rhs, nullptr);

  std::vector<char> is_fixed(n, 0);
  for (int i : *fixed) is_fixed[i] = 1;
  std::vector<int> free_ids;
  free_ids.reserve(n);
  for (int i = 0; i < n; ++i)
    if (!is_fixed[i]) free_ids.push_back(i);

  Eigen::VectorXd full = Eigen::VectorXd::Zero(n);
  if (fixed_values) {
    for (std::size_t k = 0; k < fixed->size(); ++k) full[(*fixed)[k]] = (*fixed_values)[k];
  }
  const Eigen::VectorXd coupling = A * full;
  Eigen::VectorXd b_free(free_ids.size());
  for (std::size_t k = 0; k < free_ids.size(); ++k)
    b_free[k] = rhs[free_ids[k]] - coupling[free_ids[k]];

  const SpMat A_ff = extract_submatrix(A, free_ids, free_ids);
  const Eigen::VectorXd x_free = run_cg(A_ff, b_free, nullptr);
  for (std::size_t k = 0; k < free_ids.size(); ++k) full[free_ids[k]] = x_free[k];
  return full;
}

void spmv(const SpRM& A, const double* x, double* y) {
  const int rows = static_cast<int>(A.rows());
  const int* outer = A.outerIndexPtr();
  const int* inner = A.innerIndexPtr();
  const double* val = A.valuePtr();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = outer[r]; k < outer[r + 1]; ++k) s += val[k] * x[inner[k]];
    y[r] = s;
  }
}

}  // namespace evi
