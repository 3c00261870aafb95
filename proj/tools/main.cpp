// Command-line front end: solve a single case, run a convergence study,
// or cross-check the projection-gradient solver against the enumerative
// active-set oracle on a small mesh.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "evi/study.hpp"

namespace {

using namespace evi;

struct Options {
  std::string problem;
  int level = -1;
  std::string levels;  // "A..B"
  int ref = -1;
  std::string solver = "auto";
  double tol = 5.0e-8;
  double pdhg_gamma = -1.0;
  double pdhg_s = 1.0;
  std::string out = "out";
  bool dump_fields = false;
  bool residual_history = false;
};

std::vector<int> parse_levels(const std::string& text) {
  const auto pos = text.find("..");
  if (pos == std::string::npos)
    throw CLI::ValidationError("--levels", "expected A..B, got \"" + text + "\"");
  const int a = std::stoi(text.substr(0, pos));
  const int b = std::stoi(text.substr(pos + 2));
  if (b < a) throw CLI::ValidationError("--levels", "range is empty");
  std::vector<int> out;
  for (int l = a; l <= b; ++l) out.push_back(l);
  return out;
}

SolverChoice pick_solver(const std::string& name, const ProblemSpec& spec) {
  if (name == "auto")
    return spec.kind == ProblemKind::GradientConstrained ? SolverChoice::Ssn
                                                         : SolverChoice::Pg;
  if (name == "pg") return SolverChoice::Pg;
  if (name == "pdhg") return SolverChoice::Pdhg;
  if (name == "ssn") return SolverChoice::Ssn;
  throw LookupError("unknown solver \"" + name + "\"");
}

void check_solver_kind(SolverChoice s, const ProblemSpec& spec) {
  const bool grad = spec.kind == ProblemKind::GradientConstrained;
  if (grad && s != SolverChoice::Ssn)
    throw LookupError("gradient-constrained cases require --solver ssn");
  if (!grad && s == SolverChoice::Ssn)
    throw LookupError("--solver ssn only applies to gradient cases");
  if (s == SolverChoice::Pdhg && spec.kind != ProblemKind::DirichletBC &&
      spec.kind != ProblemKind::NeumannBC)
    throw LookupError("--solver pdhg only applies to boundary-control cases");
}

void print_registry(std::ostream& os) {
  os << "registered cases:\n";
  for (const auto& key : list_cases()) os << "  " << key << "\n";
}

void print_table(const ConvergenceTable& t) {
  std::printf("# case %s  alpha %g  solver %s  tol %g  ref level %d\n",
              t.case_key.c_str(), t.alpha, t.solver.c_str(), t.tol, t.ref_level);
  std::printf("%5s %9s %12s %8s %12s %8s %12s %8s\n", "level", "dofs", "err_u", "ord",
              "err_y_L2", "ord", "err_y_H1", "ord");
  auto ord = [](const std::optional<double>& v) {
    return v ? *v : std::nan("");
  };
  for (const auto& r : t.rows)
    std::printf("%5d %9ld %12.5e %8.4f %12.5e %8.4f %12.5e %8.4f\n", r.level, r.dofs,
                r.err_u, ord(r.order_u), r.err_y_l2, ord(r.order_y_l2), r.err_y_h1,
                ord(r.order_y_h1));
}

int run_solve(const Options& opt) {
  const ProblemSpec spec = get_case(opt.problem);
  const SolverChoice solver = pick_solver(opt.solver, spec);
  check_solver_kind(solver, spec);
  const int level = opt.level >= 0 ? opt.level : 3;

  SolverConfig cfg;
  cfg.tol = opt.tol;
  cfg.pdhg_prox_gamma = opt.pdhg_gamma;
  cfg.pdhg_prox_s = opt.pdhg_s;
  cfg.record_history = opt.residual_history;

  const Mesh mesh = build_mesh(spec.domain, level);
  SolveStats stats;
  const FeSolutionBundle bundle = solve_level(spec, mesh, solver, cfg, nullptr, &stats);

  std::printf("case %s  level %d  nodes %d  solver %s\n", opt.problem.c_str(), level,
              mesh.node_count(), solver_name(solver).c_str());
  std::printf("iterations %d  final residual %.3e\n", bundle.iterations,
              bundle.final_residual);
  if (spec.kind == ProblemKind::GradientConstrained) {
    std::printf("max gradient violation %.3e\n", bundle.gradient_violation);
  } else {
    const FeFunction yf = compute_yf(spec, mesh);
    const ViSystem sys = build_vi_system(spec, mesh, yf);
    Eigen::VectorXd x(sys.size());
    for (int i = 0; i < sys.n_state(); ++i) x[i] = bundle.y_u_h.values[sys.state_nodes[i]];
    for (int i = 0; i < sys.n_adjoint(); ++i)
      x[sys.n_state() + i] = bundle.p_h ? bundle.p_h->values[sys.adjoint_nodes[i]] : 0.0;
    const KktReport rep = check_kkt(sys, x);
    std::printf("kkt: feasibility %.3e  stationarity %.3e  complementarity %.3e  "
                "multiplier sign %.3e\n",
                rep.feasibility_violation, rep.stationarity_residual, rep.complementarity,
                rep.multiplier_sign_violation);
  }

  const std::filesystem::path out_dir(opt.out);
  if (opt.dump_fields) {
    std::filesystem::create_directories(out_dir);
    bool on_boundary = false;
    const Eigen::VectorXd control = recover_control(spec, mesh, bundle, &on_boundary);
    write_fields_csv(mesh, bundle, control, on_boundary, out_dir);
    std::printf("wrote %s and %s\n", (out_dir / "state.csv").c_str(),
                (out_dir / "control.csv").c_str());
  }
  if (opt.residual_history) {
    std::filesystem::create_directories(out_dir);
    write_history_csv(stats, out_dir / "residuals.csv");
    std::printf("wrote %s\n", (out_dir / "residuals.csv").c_str());
  }
  return 0;
}

int run_study(const Options& opt) {
  const ProblemSpec spec = get_case(opt.problem);
  const SolverChoice solver = pick_solver(opt.solver, spec);
  check_solver_kind(solver, spec);
  if (opt.levels.empty()) throw CLI::ValidationError("--levels", "required for study");
  const std::vector<int> levels = parse_levels(opt.levels);
  const int ref = opt.ref >= 0 ? opt.ref : levels.back() + 1;

  SolverConfig cfg;
  cfg.tol = opt.tol;
  cfg.pdhg_prox_gamma = opt.pdhg_gamma;
  cfg.pdhg_prox_s = opt.pdhg_s;

  const std::filesystem::path out_dir(opt.out);
  try {
    const StudyResult result = run_convergence_study(spec, levels, ref, solver, cfg);
    print_table(result.table);
    write_outputs(result.table, opt.dump_fields ? &result : nullptr, out_dir);
    std::printf("wrote %s\n", (out_dir / "table.csv").c_str());
  } catch (const StudyError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    write_outputs(err.partial, nullptr, out_dir);
    std::fprintf(stderr, "partial table written to %s\n",
                 (out_dir / "table.csv").c_str());
    return 3;
  }
  return 0;
}

int run_verify(const Options& opt) {
  const ProblemSpec spec = get_case(opt.problem);
  if (spec.kind == ProblemKind::GradientConstrained)
    throw LookupError("verify compares VI solvers; gradient cases are not supported");
  const int level = opt.level >= 0 ? opt.level : 0;
  const Mesh mesh = build_mesh(spec.domain, level);

  SolverConfig cfg;
  cfg.tol = opt.tol;
  cfg.pdhg_prox_gamma = opt.pdhg_gamma;
  cfg.pdhg_prox_s = opt.pdhg_s;

  const FeFunction yf = compute_yf(spec, mesh);
  const ViSystem sys = build_vi_system(spec, mesh, yf);
  SolveStats stats;
  const Eigen::VectorXd x_pg = projection_gradient_x(sys, cfg, &stats);
  const Eigen::VectorXd x_or = active_set_oracle_x(sys);
  const double diff = (x_pg - x_or).lpNorm<Eigen::Infinity>();
  const KktReport rep = check_kkt(sys, x_pg);

  std::printf("case %s  level %d  constrained dofs %d\n", opt.problem.c_str(), level,
              sys.constrained_count());
  std::printf("pg iterations %d  residual %.3e\n", stats.iterations,
              stats.final_residual);
  std::printf("|x_pg - x_oracle|_inf = %.3e\n", diff);
  std::printf("kkt: feasibility %.3e  stationarity %.3e  complementarity %.3e  "
              "multiplier sign %.3e\n",
              rep.feasibility_violation, rep.stationarity_residual, rep.complementarity,
              rep.multiplier_sign_violation);
  const bool ok = diff <= 1e-6 && rep.stationarity_residual < 10.0 * cfg.tol;
  std::printf("%s\n", ok ? "agreement: OK" : "agreement: FAILED");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite element solver for state-constrained elliptic optimal "
               "control via second-order variational inequalities"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool with_levels) {
    sub->add_option("--problem", opt.problem, "case key, e.g. distributed:2")
        ->required();
    sub->add_option("--level", opt.level, "mesh level");
    if (with_levels) {
      sub->add_option("--levels", opt.levels, "level range A..B");
      sub->add_option("--ref", opt.ref, "reference level (default max+1)");
    }
    sub->add_option("--solver", opt.solver, "pg | pdhg | ssn (default: pg, ssn for gradient)");
    sub->add_option("--tol", opt.tol, "solver tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--pdhg-gamma", opt.pdhg_gamma, "pdhg primal prox weight");
    sub->add_option("--pdhg-s", opt.pdhg_s, "pdhg dual prox weight");
    sub->add_option("--out", opt.out, "output directory");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve one case on one mesh");
  add_common(solve, false);
  solve->add_flag("--dump-fields", opt.dump_fields, "write state.csv / control.csv");
  solve->add_flag("--residual-history", opt.residual_history,
                  "write residuals.csv (iteration, residual)");

  CLI::App* study = app.add_subcommand("study", "convergence study over levels");
  add_common(study, true);
  study->add_flag("--dump-fields", opt.dump_fields,
                  "also write finest-level state.csv / control.csv");

  CLI::App* verify = app.add_subcommand("verify", "projection gradient vs. oracle");
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (solve->parsed()) return run_solve(opt);
    if (study->parsed()) return run_study(opt);
    if (verify->parsed()) return run_verify(opt);
  } catch (const LookupError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    print_registry(std::cerr);
    return 2;
  } catch (const BoundsError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
