#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evi/error.hpp"
#include "evi/recovery.hpp"
#include "evi/solvers.hpp"
#include "evi/ssn.hpp"

namespace evi {

enum class SolverChoice { Pg, Pdhg, Ssn };

std::string solver_name(SolverChoice s);

struct TableRow {
  int level = 0;
  long dofs = 0;
  double err_u = 0.0, err_y_l2 = 0.0, err_y_h1 = 0.0;
  std::optional<double> order_u, order_y_l2, order_y_h1;
};

struct ConvergenceTable {
  std::vector<TableRow> rows;
  std::string case_key;
  double alpha = 0.0;
  int ref_level = 0;
  std::string solver;
  double tol = 0.0;
};

/// Thrown when a solve inside a study fails; carries the rows completed
/// before the failure.
struct StudyError : Error {
  ConvergenceTable partial;
  StudyError(const std::string& msg, ConvergenceTable table)
      : Error(msg), partial(std::move(table)) {}
};

struct StudyResult {
  ConvergenceTable table;
  std::shared_ptr<const Mesh> finest_mesh;
  FeSolutionBundle finest;         // solution on *finest_mesh
  Eigen::VectorXd finest_control;  // nodal values, or boundary values for
  bool control_on_boundary = false;  // boundary-control problems
};

/// Orders log2(e_{k-1} / e_k) with an empty first entry.
std::vector<std::optional<double>> compute_orders(const std::vector<double>& errors);

/// Solve one case on one mesh with the chosen solver.  `warm` (optional)
/// is an initial guess in system coordinates; `out_x` receives the raw
/// solution vector when non-null.
FeSolutionBundle solve_level(const ProblemSpec& spec, const Mesh& mesh,
                             SolverChoice solver, const SolverConfig& cfg,
                             const Eigen::VectorXd* warm = nullptr,
                             SolveStats* stats = nullptr);

/// Level sweep against a once-solved fine reference: each coarse solution
/// is prolonged to the reference mesh and the errors are measured with
/// the reference-mesh matrices (state L2 and H1-seminorm, control L2 on
/// the domain or boundary per problem kind).  Coarser solves warm-start
/// finer ones; the reference warm-starts from the finest level.
StudyResult run_convergence_study(const ProblemSpec& spec, const std::vector<int>& levels,
                                  int ref_level, SolverChoice solver,
                                  const SolverConfig& cfg = {});

void write_table_csv(const ConvergenceTable& table, const std::filesystem::path& file);
void write_fields_csv(const Mesh& mesh, const FeSolutionBundle& bundle,
                      const Eigen::VectorXd& control, bool control_on_boundary,
                      const std::filesystem::path& out_dir);
void write_history_csv(const SolveStats& stats, const std::filesystem::path& file);

/// table.csv plus state.csv/control.csv when `fields` is non-null.
void write_outputs(const ConvergenceTable& table, const StudyResult* fields,
                   const std::filesystem::path& out_dir);

}  // namespace evi
