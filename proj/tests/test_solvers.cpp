#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "evi/error.hpp"
#include "evi/solvers.hpp"

using namespace evi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// small box-constrained instance without any mesh attached
ViSystem diag_system(const std::vector<double>& diag, const std::vector<double>& b,
                     const std::vector<double>& upper) {
  const int n = static_cast<int>(diag.size());
  ViSystem sys;
  sys.kind = ProblemKind::Distributed;
  sys.state_nodes.resize(n);
  for (int i = 0; i < n; ++i) sys.state_nodes[i] = i;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
  SpMat A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  sys.A = A;
  sys.offset = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
  sys.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(), n);
  return sys;
}

ViSystem case_system(const std::string& key, int level, const Mesh*& mesh_out) {
  static std::vector<std::unique_ptr<Mesh>> keep_alive;
  const ProblemSpec spec = get_case(key);
  keep_alive.push_back(std::make_unique<Mesh>(build_mesh(spec.domain, level)));
  const Mesh& mesh = *keep_alive.back();
  mesh_out = &mesh;
  return build_vi_system(spec, mesh, compute_yf(spec, mesh));
}

}  // namespace

TEST_CASE("scalar instance: minimize x^2/2 subject to x <= -1") {
  const ViSystem sys = diag_system({1.0}, {0.0}, {-1.0});
  SolverConfig cfg;
  const Eigen::VectorXd x = projection_gradient_x(sys, cfg);
  CHECK(x[0] == doctest::Approx(-1.0).epsilon(1e-10));

  const Eigen::VectorXd xo = active_set_oracle_x(sys);
  CHECK(xo[0] == -1.0);
  const Eigen::VectorXd g = sys.applyS(xo) + sys.offset;
  CHECK(g[0] == doctest::Approx(-1.0).epsilon(1e-14));  // multiplier estimate
}

TEST_CASE("decoupled clamp of the unconstrained minimizer") {
  const ViSystem sys = diag_system({2.0, 2.0}, {-2.0, -2.0}, {0.5, kInf});
  const Eigen::VectorXd x = projection_gradient_x(sys, SolverConfig{});
  CHECK(x[0] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("unconstrained instance reaches S X = -b") {
  const ViSystem sys = diag_system({2.0, 3.0}, {-2.0, -3.0}, {kInf, kInf});
  const Eigen::VectorXd x = projection_gradient_x(sys, SolverConfig{});
  CHECK((sys.applyS(x) + sys.offset).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-7));

  const Eigen::VectorXd xo = active_set_oracle_x(sys);
  CHECK(xo[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(xo[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kkt report fields") {
  const ViSystem sys = diag_system({1.0, 1.0}, {-2.0, 0.0}, {1.0, kInf});

  // unconstrained minimizer of the constrained problem: residual is 1
  Eigen::VectorXd bad(2);
  bad << 2.0, 0.0;
  const KktReport rb = check_kkt(sys, bad);
  CHECK(rb.feasibility_violation == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rb.stationarity_residual == doctest::Approx(1.0).epsilon(1e-14));

  // the solution: clean report
  Eigen::VectorXd good(2);
  good << 1.0, 0.0;
  const KktReport rg = check_kkt(sys, good);
  CHECK(rg.feasibility_violation == 0.0);
  CHECK(rg.stationarity_residual == 0.0);
  CHECK(rg.complementarity == 0.0);
  CHECK(rg.multiplier_sign_violation == 0.0);

  // a point above the bound reports the overshoot
  Eigen::VectorXd over(2);
  over << 2.0, 0.0;
  CHECK(check_kkt(sys, over).feasibility_violation == doctest::Approx(1.0));

  Eigen::VectorXd wrong_size(3);
  CHECK_THROWS_AS(check_kkt(sys, wrong_size), StructureError);
}

TEST_CASE("solved instances pass the kkt check at 10x tolerance") {
  const Mesh* mesh = nullptr;
  for (const char* key : {"distributed:2", "dirichlet:1"}) {
    const ViSystem sys = case_system(key, 1, mesh);
    SolverConfig cfg;
    const Eigen::VectorXd x = projection_gradient_x(sys, cfg);
    const KktReport rep = check_kkt(sys, x);
    CHECK(rep.feasibility_violation <= 1e-12);
    CHECK(rep.stationarity_residual < 10 * cfg.tol);
    CHECK(rep.complementarity < 10 * cfg.tol);
    CHECK(rep.multiplier_sign_violation < 10 * cfg.tol);
  }
}

TEST_CASE("projection keeps every iterate feasible, exactly") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 2, mesh);
  const Eigen::VectorXd x = projection_gradient_x(sys, SolverConfig{});
  for (int i = 0; i < sys.n_state(); ++i) CHECK(x[i] <= sys.upper[i]);
}

TEST_CASE("restart from the solution terminates immediately") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 2, mesh);
  SolverConfig cfg;
  SolveStats st;
  const Eigen::VectorXd x = projection_gradient_x(sys, cfg, &st);
  CHECK(st.iterations > 0);
  SolveStats st2;
  projection_gradient_x(sys, cfg, &st2, &x);
  CHECK(st2.iterations == 0);
}

TEST_CASE("scaling covariance: c(S, b) has the same solution") {
  const ProblemSpec spec = get_case("distributed:2");
  const Mesh mesh = build_mesh(spec.domain, 1);
  BuildOptions opts;
  opts.stencil = BuildOptions::Stencil::Off;
  ViSystem sys = build_vi_system(spec, mesh, compute_yf(spec, mesh), opts);
  const Eigen::VectorXd x1 = projection_gradient_x(sys, SolverConfig{});
  const SpRM scaled(100.0 * sys.A);
  sys.A = scaled;
  sys.offset *= 100.0;
  const Eigen::VectorXd x2 = projection_gradient_x(sys, SolverConfig{});
  CHECK((x1 - x2).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("oracle equivalence on every small paper case") {
  struct Entry {
    const char* key;
    int level;
  };
  // the largest meshes with at most 16 constrained dofs
  const Entry entries[] = {{"distributed:1", 1}, {"distributed:2", 1},
                           {"distributed:3", 1}, {"distributed:4", 1},
                           {"distributed:5", 0}, {"distributed:5s", 0},
                           {"dirichlet:1", 0},   {"dirichlet:2", 0},
                           {"dirichlet:3", 0},   {"neumann:1", 0}};
  for (const auto& e : entries) {
    CAPTURE(e.key);
    const Mesh* mesh = nullptr;
    const ViSystem sys = case_system(e.key, e.level, mesh);
    CHECK(sys.constrained_count() <= 16);
    SolverConfig cfg;
    cfg.tol = 1e-9;
    const Eigen::VectorXd x_pg = projection_gradient_x(sys, cfg);
    const Eigen::VectorXd x_or = active_set_oracle_x(sys);
    // state dofs; the discrete adjoint of a saddle system may be non-unique
    // on meshes this small
    const double diff =
        (x_pg.head(sys.n_state()) - x_or.head(sys.n_state())).lpNorm<Eigen::Infinity>();
    CHECK(diff <= 1e-6);
    const KktReport rep = check_kkt(sys, x_or);
    CHECK(rep.stationarity_residual < 1e-9);
    CHECK(rep.feasibility_violation <= 1e-12);
  }
}

TEST_CASE("oracle rejects instances over the enumeration limit") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 2, mesh);  // 49 constrained dofs
  CHECK_THROWS_AS(active_set_oracle_x(sys), SizeError);
}

TEST_CASE("iteration cap raises a solver error carrying the residual") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 3, mesh);
  SolverConfig cfg;
  cfg.max_iter = 2;
  try {
    projection_gradient_x(sys, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& err) {
    CHECK(err.residual > 0.0);
    CHECK(err.iterations == 2);
  }
}

TEST_CASE("discrete harmonicity of the converged boundary-control state") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("dirichlet:1", 2, mesh);
  const Eigen::VectorXd x = projection_gradient_x(sys, SolverConfig{});
  const Eigen::VectorXd y = x.head(sys.n_state());
  const Eigen::VectorXd harm = sys.C * y;
  double l_inf = 0.0;
  for (int r = 0; r < sys.C.rows(); ++r) {
    double s = 0.0;
    for (SpRM::InnerIterator it(sys.C, r); it; ++it) s += std::abs(it.value());
    l_inf = std::max(l_inf, s);
  }
  CHECK(harm.lpNorm<Eigen::Infinity>() <=
        1e-6 * y.lpNorm<Eigen::Infinity>() * l_inf);
}

TEST_CASE("bundles carry state, adjoint and multiplier") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("dirichlet:1", 1, mesh);
  const FeSolutionBundle bundle = projection_gradient_solve(sys, SolverConfig{});
  CHECK(bundle.y_h.values.size() == mesh->node_count());
  CHECK(bundle.p_h.has_value());
  CHECK(bundle.multiplier.size() == sys.n_state());
  CHECK(bundle.final_residual < 5e-8);
  // nodal feasibility of the full state
  for (int i = 0; i < sys.n_state(); ++i)
    CHECK(bundle.y_h.values[sys.state_nodes[i]] <= 0.4 + 1e-12);
  // multipliers are non-positive where constrained
  CHECK(bundle.multiplier.maxCoeff() < 10 * 5e-8);
}

TEST_CASE("pdhg matches projection gradient on a boundary-control case") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("dirichlet:1", 2, mesh);
  SolverConfig cfg;
  cfg.tol = 5e-9;  // both solvers well inside the 1e-6 comparison band
  const Eigen::VectorXd x_pg = projection_gradient_x(sys, cfg);
  const FeSolutionBundle pd = pdhg_solve(sys, cfg);
  const FeFunction y_pg = sys.state_function(x_pg);
  const Eigen::VectorXd d = pd.y_u_h.values - y_pg.values;
  const SpMat K = assemble_stiffness(*mesh);
  const SpMat B = assemble_mass(*mesh);
  const double h1 = std::sqrt(d.dot(K * d) + d.dot(B * d));
  CHECK(h1 < 1e-6);
  CHECK(pd.final_residual < cfg.tol);
}

TEST_CASE("pdhg with inactive bounds agrees with the dense saddle solve") {
  ProblemSpec spec = get_case("dirichlet:1");
  spec.y_b = [](double, double) { return 1e9; };  // never active
  const Mesh mesh = build_mesh(spec.domain, 1);
  const ViSystem sys = build_vi_system(spec, mesh, compute_yf(spec, mesh));
  const Eigen::MatrixXd S = sys.dense();
  const Eigen::VectorXd x_direct =
      Eigen::FullPivLU<Eigen::MatrixXd>(S).solve(-sys.offset);
  const FeSolutionBundle pd = pdhg_solve(sys, SolverConfig{});
  for (int i = 0; i < sys.n_state(); ++i)
    CHECK(std::abs(pd.y_u_h.values[sys.state_nodes[i]] - x_direct[i]) < 1e-5);
}

TEST_CASE("pdhg with a zero target returns zero") {
  ProblemSpec spec = get_case("dirichlet:1");
  spec.y_d = [](double, double) { return 0.0; };
  const Mesh mesh = build_mesh(spec.domain, 1);
  const ViSystem sys = build_vi_system(spec, mesh, compute_yf(spec, mesh));
  const FeSolutionBundle pd = pdhg_solve(sys, SolverConfig{});
  CHECK(pd.y_u_h.values.lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("pdhg requires adjoint dofs") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 1, mesh);
  CHECK_THROWS_AS(pdhg_solve(sys, SolverConfig{}), StructureError);
}

TEST_CASE("residual history is recorded when requested") {
  const Mesh* mesh = nullptr;
  const ViSystem sys = case_system("distributed:2", 1, mesh);
  SolverConfig cfg;
  cfg.record_history = true;
  SolveStats st;
  projection_gradient_x(sys, cfg, &st);
  REQUIRE(!st.history.empty());
  CHECK(st.history.size() == static_cast<std::size_t>(st.iterations) + 1);
  CHECK(st.history.back().second < cfg.tol);
  CHECK(st.history.front().second >= st.history.back().second);
}

TEST_CASE("divergence guard trips on a non-monotone operator") {
  ViSystem sys = diag_system({-1.0}, {0.0}, {kInf});
  SolverConfig cfg;
  cfg.max_iter = 100000;
  Eigen::VectorXd start(1);
  start << 1.0;
  CHECK_THROWS_AS(projection_gradient_x(sys, cfg, nullptr, &start), SolverError);
}
