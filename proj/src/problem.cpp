#include "evi/problem.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "evi/error.hpp"

namespace evi {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

double zero_field(double, double) { return 0.0; }

// Corner-singularity target for the LShape case.  theta runs counter-
// clockwise from the positive x-axis in [0, 3*pi/2]; the value is zeroed
// within 1e-12 of the corner and clamped to +-1e6 so load integrals stay
// finite across the tan singularity at theta = 3*pi/4.
double lshape_target(double x, double y, bool use_tan) {
  const double r = std::hypot(x, y);
  if (r < 1e-12) return 0.0;
  double theta = std::atan2(y, x);
  if (theta < 0.0) theta += 2.0 * kPi;
  const double ang = 2.0 * theta / 3.0;
  double v = std::pow(r, -1.0 / 3.0) * (use_tan ? std::tan(ang) : std::sin(ang));
  if (v > 1e6) v = 1e6;
  if (v < -1e6) v = -1e6;
  return v;
}

ScalarField constant(double c) {
  return [c](double, double) { return c; };
}

std::map<std::string, ProblemSpec> make_registry() {
  std::map<std::string, ProblemSpec> reg;
  auto add = [&](ProblemKind kind, const std::string& id, Domain dom, double alpha,
                 ScalarField yd, double yb) {
    ProblemSpec s;
    s.kind = kind;
    s.domain = dom;
    s.alpha = alpha;
    s.y_d = std::move(yd);
    s.y_b = constant(yb);
    s.f = zero_field;
    s.case_id = id;
    reg[kind_name(kind) + ":" + id] = std::move(s);
  };

  const auto us = Domain::UnitSquare;
  add(ProblemKind::Distributed, "1", us, 1e-4,
      [](double x, double y) { return std::sin(4.0 * kPi * x * y) + 1.5; }, 1.0);
  add(ProblemKind::Distributed, "2", us, 1e-3,
      [](double x, double y) { return std::sin(2.0 * kPi * x * y); }, 0.1);
  add(ProblemKind::Distributed, "3", us, 0.1,
      [](double x, double y) { return 10.0 * (std::sin(2.0 * x) + y); }, 0.01);
  add(ProblemKind::Distributed, "4", us, 0.1,
      [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }, 0.1);
  add(ProblemKind::Distributed, "5", Domain::LShape, 0.1,
      [](double x, double y) { return lshape_target(x, y, true); }, 0.5);
  add(ProblemKind::Distributed, "5s", Domain::LShape, 0.1,
      [](double x, double y) { return lshape_target(x, y, false); }, 0.5);

  add(ProblemKind::DirichletBC, "1", us, 0.01,
      [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }, 0.4);
  add(ProblemKind::DirichletBC, "2", us, 1e-3,
      [](double x, double y) { return std::sin(2.0 * kPi * x * y); }, 0.1);
  add(ProblemKind::DirichletBC, "3", us, 0.1,
      [](double x, double y) { return 10.0 * (std::sin(2.0 * x) + y); }, 0.01);

  add(ProblemKind::NeumannBC, "1", us, 0.01,
      [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); }, 0.4);

  add(ProblemKind::GradientConstrained, "1", us, 0.1,
      [](double x, double y) { return 2.0 * std::sin(kPi * x) * std::sin(kPi * y); },
      1.0);
  return reg;
}

const std::map<std::string, ProblemSpec>& registry() {
  static const std::map<std::string, ProblemSpec> reg = make_registry();
  return reg;
}

}  // namespace

std::string kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::Distributed: return "distributed";
    case ProblemKind::DirichletBC: return "dirichlet";
    case ProblemKind::NeumannBC: return "neumann";
    case ProblemKind::GradientConstrained: return "gradient";
  }
  return "?";
}

ProblemSpec get_case(const std::string& key) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw LookupError("unknown case \"" + key + "\"");
  return it->second;
}

ProblemSpec get_case(ProblemKind kind, const std::string& case_id) {
  return get_case(kind_name(kind) + ":" + case_id);
}

std::vector<std::string> list_cases() {
  std::vector<std::string> out;
  for (const auto& [key, spec] : registry()) out.push_back(key);
  return out;
}

FeFunction compute_yf(const ProblemSpec& spec, const Mesh& mesh) {
  const Eigen::VectorXd load = assemble_load(mesh, spec.f);
  if (spec.kind == ProblemKind::NeumannBC) {
    const SpMat A = assemble_form(mesh, BilinearKind::GradGradPlusMass);
    return FeFunction(mesh, solve_spd(A, load));
  }
  const SpMat K = assemble_stiffness(mesh);
  const std::vector<int> bnd(mesh.boundary_loop.begin(), mesh.boundary_loop.end());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bnd.size());
  return FeFunction(mesh, solve_spd(K, load, &bnd, &zero));
}

void StencilOp::apply(const double* x, double* y, std::vector<double>& pad) const {
  const std::size_t w = static_cast<std::size_t>(m) + 2;  // zero ghost ring
  if (pad.size() != w * w) pad.assign(w * w, 0.0);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j) {
    double* row = pad.data() + static_cast<std::size_t>(j + 1) * w + 1;
    const double* src = x + static_cast<std::size_t>(j) * m;
    for (int i = 0; i < m; ++i) row[i] = src[i];
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j) {
    const double* r0 = pad.data() + static_cast<std::size_t>(j) * w + 1;      // below
    const double* r1 = pad.data() + static_cast<std::size_t>(j + 1) * w + 1;  // this
    const double* r2 = pad.data() + static_cast<std::size_t>(j + 2) * w + 1;  // above
    double* out = y + static_cast<std::size_t>(j) * m;
    for (int i = 0; i < m; ++i) {
      out[i] = c_center * r1[i] + c_axis * (r1[i - 1] + r1[i + 1] + r0[i] + r2[i]) +
               c_skew * (r0[i - 1] + r2[i + 1]);
    }
  }
}

namespace {

// stencil row apply reading the vector in place, zero outside the lattice
inline void stencil_row(const StencilOp& st, const double* below, const double* cur,
                        const double* above, double* out) {
  const int m = st.m;
  const double cc = st.c_center, ca = st.c_axis, cs = st.c_skew;
  auto at = [m](const double* row, int i) { return (row && i >= 0 && i < m) ? row[i] : 0.0; };
  if (m == 1) {
    out[0] = cc * cur[0] + ca * (at(below, 0) + at(above, 0));
    return;
  }
  out[0] = cc * cur[0] + ca * (cur[1] + at(below, 0) + at(above, 0)) + cs * at(above, 1);
  if (below && above) {
    for (int i = 1; i < m - 1; ++i)
      out[i] = cc * cur[i] + ca * (cur[i - 1] + cur[i + 1] + below[i] + above[i]) +
               cs * (below[i - 1] + above[i + 1]);
  } else if (below) {
    for (int i = 1; i < m - 1; ++i)
      out[i] = cc * cur[i] + ca * (cur[i - 1] + cur[i + 1] + below[i]) + cs * below[i - 1];
  } else if (above) {
    for (int i = 1; i < m - 1; ++i)
      out[i] = cc * cur[i] + ca * (cur[i - 1] + cur[i + 1] + above[i]) + cs * above[i + 1];
  } else {
    for (int i = 1; i < m - 1; ++i)
      out[i] = cc * cur[i] + ca * (cur[i - 1] + cur[i + 1]);
  }
  out[m - 1] = cc * cur[m - 1] + ca * (cur[m - 2] + at(below, m - 1) + at(above, m - 1)) +
               cs * at(below, m - 2);
}

}  // namespace

void StencilOp::pg_pass1(const double* x, const double* offset, const double* ub,
                         double c, double* gs, double* e, double& res2,
                         double& e2) const {
  double acc_r = 0.0, acc_e = 0.0;
#pragma omp parallel reduction(+ : acc_r, acc_e)
  {
    std::vector<double> wrow(m);
#pragma omp for schedule(static)
    for (int j = 0; j < m; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * m;
      stencil_row(*this, j > 0 ? x + off - m : nullptr, x + off,
                  j < m - 1 ? x + off + m : nullptr, wrow.data());
      for (int i = 0; i < m; ++i) {
        const std::size_t k = off + i;
        const double gu = wrow[i] + offset[k];
        const double xe = x[k];
        const double eu = xe - std::min(xe - gu, ub[k]);
        acc_r += eu * eu;
        const double g = c * gu;
        gs[k] = g;
        const double ee = xe - std::min(xe - g, ub[k]);
        e[k] = ee;
        acc_e += ee * ee;
      }
    }
  }
  res2 = acc_r;
  e2 = acc_e;
}

void StencilOp::pg_pass2(const double* e, const double* gs, double c, double* d,
                         double& t2) const {
  double acc_t = 0.0;
#pragma omp parallel reduction(+ : acc_t)
  {
    std::vector<double> wrow(m);
#pragma omp for schedule(static)
    for (int j = 0; j < m; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * m;
      stencil_row(*this, j > 0 ? e + off - m : nullptr, e + off,
                  j < m - 1 ? e + off + m : nullptr, wrow.data());
      for (int i = 0; i < m; ++i) {
        const std::size_t k = off + i;
        const double cw = c * wrow[i];
        d[k] = cw + gs[k];
        const double t = cw + e[k];
        acc_t += t * t;
      }
    }
  }
  t2 = acc_t;
}

int ViSystem::constrained_count() const {
  int c = 0;
  for (int i = 0; i < n_state(); ++i)
    if (is_constrained(i)) ++c;
  return c;
}

void ViSystem::apply(const double* x, double* y, std::vector<double>& pad) const {
  const int ns = n_state();
  if (stencil) {
    stencil->apply(x, y, pad);
  } else {
    spmv(A, x, y);
  }
  if (n_adjoint() > 0) {
    // y_state -= C^T p;  y_adj = C y
    Eigen::Map<const Eigen::VectorXd> xp(x + ns, n_adjoint());
    Eigen::Map<Eigen::VectorXd> ys(y, ns);
    ys.noalias() -= CT * xp;
    spmv(C, x, y + ns);
  }
}

void ViSystem::applyT(const double* x, double* y, std::vector<double>& pad) const {
  const int ns = n_state();
  if (stencil) {
    stencil->apply(x, y, pad);  // state block is symmetric
  } else {
    spmv(A, x, y);
  }
  if (n_adjoint() > 0) {
    Eigen::Map<const Eigen::VectorXd> xp(x + ns, n_adjoint());
    Eigen::Map<Eigen::VectorXd> ys(y, ns);
    ys.noalias() += CT * xp;
    Eigen::Map<const Eigen::VectorXd> xs(x, ns);
    Eigen::Map<Eigen::VectorXd> yp(y + ns, n_adjoint());
    yp.noalias() = -(C * xs);
  }
}

Eigen::VectorXd ViSystem::applyS(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(size());
  std::vector<double> pad;
  apply(x.data(), y.data(), pad);
  return y;
}

Eigen::VectorXd ViSystem::applyST(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(size());
  std::vector<double> pad;
  applyT(x.data(), y.data(), pad);
  return y;
}

Eigen::MatrixXd ViSystem::dense() const {
  const int n = size();
  Eigen::MatrixXd D(n, n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int c = 0; c < n; ++c) {
    e[c] = 1.0;
    D.col(c) = applyS(e);
    e[c] = 0.0;
  }
  return D;
}

double ViSystem::abs_row_sum_max() const {
  double best = 0.0;
  const int ns = n_state();
  std::vector<double> row_abs(size(), 0.0);
  if (stencil) {
    for (int i = 0; i < ns; ++i) row_abs[i] = stencil->abs_row_sum_max();
  } else {
    for (int r = 0; r < ns; ++r) {
      double s = 0.0;
      for (SpRM::InnerIterator it(A, r); it; ++it) s += std::abs(it.value());
      row_abs[r] = s;
    }
  }
  if (n_adjoint() > 0) {
    for (int r = 0; r < ns; ++r) {
      double s = 0.0;
      for (SpRM::InnerIterator it(CT, r); it; ++it) s += std::abs(it.value());
      row_abs[r] += s;
    }
    for (int r = 0; r < n_adjoint(); ++r) {
      double s = 0.0;
      for (SpRM::InnerIterator it(C, r); it; ++it) s += std::abs(it.value());
      row_abs[ns + r] = s;
    }
  }
  for (double v : row_abs) best = std::max(best, v);
  return best;
}

void ViSystem::project(Eigen::VectorXd& x) const {
  const int ns = n_state();
  for (int i = 0; i < ns; ++i)
    if (x[i] > upper[i]) x[i] = upper[i];
}

FeFunction ViSystem::state_function(const Eigen::VectorXd& x) const {
  FeFunction u = FeFunction::zero(*mesh);
  for (int i = 0; i < n_state(); ++i) u.values[state_nodes[i]] = x[i];
  return u;
}

FeFunction ViSystem::adjoint_function(const Eigen::VectorXd& x) const {
  FeFunction p = FeFunction::zero(*mesh);
  for (int i = 0; i < n_adjoint(); ++i) p.values[adjoint_nodes[i]] = x[n_state() + i];
  return p;
}

ViSystem build_vi_system(const ProblemSpec& spec, const Mesh& mesh,
                         const FeFunction& yf, const BuildOptions& opts) {
  if (spec.kind == ProblemKind::GradientConstrained)
    throw StructureError(
        "build_vi_system: gradient-constrained problems use the penalized "
        "Newton solver");

  ViSystem sys;
  sys.kind = spec.kind;
  sys.mesh = &mesh;
  sys.yf = yf;
  sys.alpha = spec.alpha;

  const SpMat B = assemble_mass(mesh);
  const Eigen::VectorXd f_vec = assemble_load(mesh, spec.y_d) - B * yf.values;
  Eigen::VectorXd psi(mesh.node_count());
  for (int k = 0; k < mesh.node_count(); ++k)
    psi[k] = spec.y_b(mesh.nodes[k][0], mesh.nodes[k][1]) - yf.values[k];

  if (spec.kind == ProblemKind::Distributed) {
    sys.state_nodes = mesh.interior_nodes();
    const int ni = static_cast<int>(sys.state_nodes.size());
    const bool want_stencil =
        opts.stencil != BuildOptions::Stencil::Off && mesh.domain == Domain::UnitSquare;
    if (want_stencil) {
      StencilOp st;
      st.m = mesh.cells - 1;
      const double h2 = mesh.h * mesh.h;
      st.c_center = 4.0 * spec.alpha + h2 / 2.0;
      st.c_axis = -spec.alpha + h2 / 12.0;
      st.c_skew = h2 / 12.0;
      sys.stencil = st;
    }
    if (!sys.stencil) {
      const SpMat K = assemble_stiffness(mesh);
      const SpMat S_full = spec.alpha * K + B;
      sys.A = extract_submatrix(S_full, sys.state_nodes, sys.state_nodes);
    }
    sys.offset.resize(ni);
    sys.upper.resize(ni);
    for (int i = 0; i < ni; ++i) {
      sys.offset[i] = -f_vec[sys.state_nodes[i]];
      sys.upper[i] = psi[sys.state_nodes[i]];
    }
    return sys;
  }

  // boundary control: saddle system over (all nodes, interior nodes)
  const SpMat L = assemble_form(mesh, spec.form());
  const int n = mesh.node_count();
  sys.state_nodes.resize(n);
  for (int k = 0; k < n; ++k) sys.state_nodes[k] = k;
  sys.adjoint_nodes = mesh.interior_nodes();

  const SpMat A_full = spec.alpha * L + B;
  sys.A = A_full;
  std::vector<int> all(n);
  for (int k = 0; k < n; ++k) all[k] = k;
  const SpMat C_cm = extract_submatrix(L, sys.adjoint_nodes, all);
  sys.C = C_cm;
  sys.CT = SpMat(C_cm.transpose());

  const int ni = static_cast<int>(sys.adjoint_nodes.size());
  sys.offset.resize(n + ni);
  sys.upper.resize(n + ni);
  for (int k = 0; k < n; ++k) {
    sys.offset[k] = -f_vec[k];
    sys.upper[k] = psi[k];
  }
  for (int k = 0; k < ni; ++k) {
    sys.offset[n + k] = 0.0;
    sys.upper[n + k] = std::numeric_limits<double>::infinity();
  }
  return sys;
}

}  // namespace evi
