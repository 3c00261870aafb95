#include "evi/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace evi {

std::string solver_name(SolverChoice s) {
  switch (s) {
    case SolverChoice::Pg: return "pg";
    case SolverChoice::Pdhg: return "pdhg";
    case SolverChoice::Ssn: return "ssn";
  }
  return "?";
}

std::vector<std::optional<double>> compute_orders(const std::vector<double>& errors) {
  std::vector<std::optional<double>> orders(errors.size());
  for (std::size_t k = 1; k < errors.size(); ++k)
    orders[k] = std::log2(errors[k - 1] / errors[k]);
  return orders;
}

FeSolutionBundle solve_level(const ProblemSpec& spec, const Mesh& mesh,
                             SolverChoice solver, const SolverConfig& cfg,
                             const Eigen::VectorXd* warm, SolveStats* stats) {
  if (spec.kind == ProblemKind::GradientConstrained) {
    if (solver != SolverChoice::Ssn)
      throw LookupError("gradient-constrained problems require the ssn solver");
    return ssn_penalized_solve(spec, mesh);
  }
  if (solver == SolverChoice::Ssn)
    throw LookupError("ssn solver only applies to gradient-constrained problems");

  const FeFunction yf = compute_yf(spec, mesh);
  const ViSystem sys = build_vi_system(spec, mesh, yf);
  if (solver == SolverChoice::Pdhg) return pdhg_solve(sys, cfg, stats);

  SolveStats local;
  SolveStats* st = stats ? stats : &local;
  const Eigen::VectorXd x = projection_gradient_x(sys, cfg, st, warm);
  return make_bundle(sys, x, st->iterations, st->final_residual);
}

namespace {

// Initial guess for the next mesh: prolong the state (and adjoint) and
// sample at the system's dof nodes.
Eigen::VectorXd warm_start_vector(const FeSolutionBundle& prev, const ProblemSpec& spec,
                                  const Mesh& fine) {
  const FeFunction yu = prolong(prev.y_u_h, fine);
  const bool saddle =
      spec.kind == ProblemKind::DirichletBC || spec.kind == ProblemKind::NeumannBC;
  if (!saddle) {
    const std::vector<int> interior = fine.interior_nodes();
    Eigen::VectorXd x(interior.size());
    for (std::size_t k = 0; k < interior.size(); ++k) x[k] = yu.values[interior[k]];
    return x;
  }
  const int n = fine.node_count();
  const std::vector<int> interior = fine.interior_nodes();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n + interior.size());
  x.head(n) = yu.values;
  if (prev.p_h) {
    const FeFunction p = prolong(*prev.p_h, fine);
    for (std::size_t k = 0; k < interior.size(); ++k) x[n + k] = p.values[interior[k]];
  }
  return x;
}

// Boundary functions ride along as full nodal fields (zero inside), so the
// 2D prolongation restricted to the boundary is the 1D interpolation on
// the refined boundary polygon.
Eigen::VectorXd prolong_boundary(const Mesh& coarse, const Eigen::VectorXd& bvals,
                                 const Mesh& fine) {
  FeFunction carrier = FeFunction::zero(coarse);
  for (std::size_t k = 0; k < coarse.boundary_loop.size(); ++k)
    carrier.values[coarse.boundary_loop[k]] = bvals[k];
  const FeFunction on_fine = prolong(carrier, fine);
  return extract_trace(on_fine);
}

}  // namespace

StudyResult run_convergence_study(const ProblemSpec& spec, const std::vector<int>& levels,
                                  int ref_level, SolverChoice solver,
                                  const SolverConfig& cfg) {
  if (levels.empty()) throw BoundsError("run_convergence_study: empty level range");
  if (!std::is_sorted(levels.begin(), levels.end()))
    throw BoundsError("run_convergence_study: levels must be ascending");
  if (ref_level < levels.back() + 1)
    throw BoundsError("run_convergence_study: ref_level must exceed max(levels)");

  ConvergenceTable table;
  table.case_key = kind_name(spec.kind) + ":" + spec.case_id;
  table.alpha = spec.alpha;
  table.ref_level = ref_level;
  table.solver = solver_name(solver);
  table.tol = cfg.tol;

  const bool interior_dofs = spec.kind == ProblemKind::Distributed ||
                             spec.kind == ProblemKind::GradientConstrained;

  std::vector<std::shared_ptr<const Mesh>> meshes;
  for (int lv : levels) meshes.push_back(std::make_shared<Mesh>(build_mesh(spec.domain, lv)));
  auto ref_mesh = std::make_shared<const Mesh>(build_mesh(spec.domain, ref_level));

  std::vector<FeSolutionBundle> bundles;
  Eigen::VectorXd warm;
  bool have_warm = false;
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    try {
      bundles.push_back(solve_level(spec, *meshes[k], solver, cfg,
                                    have_warm ? &warm : nullptr));
    } catch (const SolverError& err) {
      throw StudyError("study aborted: level " + std::to_string(levels[k]) + ": " +
                           err.what(),
                       table);
    }
    if (k + 1 < meshes.size() && solver != SolverChoice::Ssn) {
      warm = warm_start_vector(bundles.back(), spec, *meshes[k + 1]);
      have_warm = true;
    }
  }

  FeSolutionBundle ref_bundle;
  try {
    Eigen::VectorXd ref_warm;
    const Eigen::VectorXd* rw = nullptr;
    if (solver != SolverChoice::Ssn) {
      ref_warm = warm_start_vector(bundles.back(), spec, *ref_mesh);
      rw = &ref_warm;
    }
    ref_bundle = solve_level(spec, *ref_mesh, solver, cfg, rw);
  } catch (const SolverError& err) {
    throw StudyError(std::string("study aborted: reference level: ") + err.what(), table);
  }

  const SpMat K_ref = assemble_stiffness(*ref_mesh);
  const SpMat B_ref = assemble_mass(*ref_mesh);
  const SpMat Mg_ref = assemble_boundary_mass(*ref_mesh);

  bool on_boundary = false;
  const Eigen::VectorXd u_ref = recover_control(spec, *ref_mesh, ref_bundle, &on_boundary);

  std::vector<double> es_l2, es_h1, es_u;
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    const FeFunction y_fine = prolong(bundles[k].y_h, *ref_mesh);
    const Eigen::VectorXd e = y_fine.values - ref_bundle.y_h.values;
    es_l2.push_back(std::sqrt(std::max(0.0, quad_form(B_ref, e))));
    es_h1.push_back(std::sqrt(std::max(0.0, quad_form(K_ref, e))));

    bool ob = false;
    const Eigen::VectorXd u_k = recover_control(spec, *meshes[k], bundles[k], &ob);
    if (ob) {
      const Eigen::VectorXd u_on_ref = prolong_boundary(*meshes[k], u_k, *ref_mesh);
      const Eigen::VectorXd du = u_on_ref - u_ref;
      es_u.push_back(std::sqrt(std::max(0.0, quad_form(Mg_ref, du))));
    } else {
      FeFunction uc = FeFunction::zero(*meshes[k]);
      uc.values = u_k;
      const Eigen::VectorXd du = prolong(uc, *ref_mesh).values - u_ref;
      es_u.push_back(std::sqrt(std::max(0.0, quad_form(B_ref, du))));
    }
  }

  const auto ord_u = compute_orders(es_u);
  const auto ord_l2 = compute_orders(es_l2);
  const auto ord_h1 = compute_orders(es_h1);
  for (std::size_t k = 0; k < meshes.size(); ++k) {
    TableRow row;
    row.level = levels[k];
    row.dofs = interior_dofs ? meshes[k]->interior_count() : meshes[k]->node_count();
    row.err_u = es_u[k];
    row.err_y_l2 = es_l2[k];
    row.err_y_h1 = es_h1[k];
    row.order_u = ord_u[k];
    row.order_y_l2 = ord_l2[k];
    row.order_y_h1 = ord_h1[k];
    table.rows.push_back(row);
  }

  StudyResult out;
  out.table = std::move(table);
  out.finest_mesh = meshes.back();
  out.finest = std::move(bundles.back());
  out.control_on_boundary = on_boundary;
  bool ob = false;
  out.finest_control = recover_control(spec, *out.finest_mesh, out.finest, &ob);
  return out;
}

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.5e", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
  return v ? fmt6(*v) : std::string();
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw Error("cannot open for writing: " + file.string());
  return os;
}

}  // namespace

void write_table_csv(const ConvergenceTable& table, const std::filesystem::path& file) {
  std::ofstream os = open_out(file);
  os << "level,dofs,err_u,order_u,err_y_l2,order_y_l2,err_y_h1,order_y_h1\n";
  for (const auto& r : table.rows) {
    os << r.level << ',' << r.dofs << ',' << fmt6(r.err_u) << ',' << fmt_opt(r.order_u)
       << ',' << fmt6(r.err_y_l2) << ',' << fmt_opt(r.order_y_l2) << ','
       << fmt6(r.err_y_h1) << ',' << fmt_opt(r.order_y_h1) << '\n';
  }
  if (!os) throw Error("write failed: " + file.string());
}

void write_fields_csv(const Mesh& mesh, const FeSolutionBundle& bundle,
                      const Eigen::VectorXd& control, bool control_on_boundary,
                      const std::filesystem::path& out_dir) {
  {
    std::ofstream os = open_out(out_dir / "state.csv");
    os << "x,y,value\n";
    char buf[120];
    for (int k = 0; k < mesh.node_count(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", mesh.nodes[k][0],
                    mesh.nodes[k][1], bundle.y_h.values[k]);
      os << buf;
    }
  }
  {
    std::ofstream os = open_out(out_dir / "control.csv");
    os << "x,y,value\n";
    char buf[120];
    if (control_on_boundary) {
      for (std::size_t k = 0; k < mesh.boundary_loop.size(); ++k) {
        const auto& p = mesh.nodes[mesh.boundary_loop[k]];
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", p[0], p[1], control[k]);
        os << buf;
      }
    } else {
      for (int k = 0; k < mesh.node_count(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g\n", mesh.nodes[k][0],
                      mesh.nodes[k][1], control[k]);
        os << buf;
      }
    }
  }
}

void write_history_csv(const SolveStats& stats, const std::filesystem::path& file) {
  std::ofstream os = open_out(file);
  os << "iteration,residual\n";
  for (const auto& [it, res] : stats.history) os << it << ',' << fmt6(res) << '\n';
}

void write_outputs(const ConvergenceTable& table, const StudyResult* fields,
                   const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_table_csv(table, out_dir / "table.csv");
  if (fields)
    write_fields_csv(*fields->finest_mesh, fields->finest, fields->finest_control,
                     fields->control_on_boundary, out_dir);
}

}  // namespace evi
