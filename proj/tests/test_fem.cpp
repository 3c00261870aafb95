#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "evi/error.hpp"
#include "evi/fem.hpp"

using namespace evi;

namespace {
constexpr double kPi = std::numbers::pi;

double max_asymmetry(const SpMat& A) {
  const SpMat D = SpMat(A - SpMat(A.transpose()));
  double worst = 0.0;
  for (int c = 0; c < D.outerSize(); ++c)
    for (SpMat::InnerIterator it(D, c); it; ++it)
      worst = std::max(worst, std::abs(it.value()));
  return worst;
}
}  // namespace

TEST_CASE("local stiffness of the unit right triangle") {
  const Eigen::Matrix3d K = local_stiffness({0, 0}, {1, 0}, {0, 1});
  Eigen::Matrix3d expect;
  expect << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  expect *= 0.5;
  CHECK((K - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("local mass for area one half") {
  const Eigen::Matrix3d M = local_mass(0.5);
  Eigen::Matrix3d expect;
  expect << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expect /= 24.0;
  CHECK((M - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("local edge mass") {
  const double h = 0.25;
  const Eigen::Matrix2d M = local_edge_mass(h);
  CHECK(M(0, 0) == doctest::Approx(2 * h / 6).epsilon(1e-15));
  CHECK(M(0, 1) == doctest::Approx(h / 6).epsilon(1e-15));
}

TEST_CASE("assembled matrices: symmetry, kernel, positivity") {
  for (Domain dom : {Domain::UnitSquare, Domain::LShape}) {
    const Mesh m = build_mesh(dom, 1);
    const SpMat K = assemble_stiffness(m);
    const SpMat B = assemble_mass(m);
    CHECK(max_asymmetry(K) < 1e-14);
    CHECK(max_asymmetry(B) < 1e-14);

    // constants in the stiffness kernel
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.node_count());
    CHECK((K * ones).lpNorm<Eigen::Infinity>() < 1e-12);

    // 1^T B 1 = |Omega|
    CHECK(ones.dot(B * ones) == doctest::Approx(domain_area(dom)).epsilon(1e-12));

    std::mt19937 rng(7);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd v(m.node_count());
      for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
      CHECK(v.dot(K * v) >= -1e-12);
      CHECK(v.dot(B * v) > 0.0);
    }
  }
}

TEST_CASE("interpolant of x1 has unit H1 seminorm") {
  const Mesh m = build_mesh(Domain::UnitSquare, 1);
  const FeFunction u = interpolate_nodal(m, [](double x, double) { return x; });
  CHECK(fe_norm(u, NormKind::H1Semi) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norms of the constant function") {
  const Mesh m = build_mesh(Domain::UnitSquare, 1);
  const FeFunction one = interpolate_nodal(m, [](double, double) { return 1.0; });
  CHECK(fe_norm(one, NormKind::L2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fe_norm(one, NormKind::H1Semi) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fe_norm(one, NormKind::L2Gamma) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fe_norm(one, NormKind::H1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("boundary mass integrates the perimeter") {
  const Mesh us = build_mesh(Domain::UnitSquare, 0);
  const Mesh ls = build_mesh(Domain::LShape, 0);
  const Eigen::VectorXd e_us = Eigen::VectorXd::Ones(us.boundary_count());
  const Eigen::VectorXd e_ls = Eigen::VectorXd::Ones(ls.boundary_count());
  CHECK(e_us.dot(assemble_boundary_mass(us) * e_us) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(e_ls.dot(assemble_boundary_mass(ls) * e_ls) == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("load vector: partition of unity and quadrature exactness") {
  for (Domain dom : {Domain::UnitSquare, Domain::LShape}) {
    const Mesh m = build_mesh(dom, 1);
    const Eigen::VectorXd f1 = assemble_load(m, [](double, double) { return 1.0; });
    CHECK(f1.sum() == doctest::Approx(domain_area(dom)).epsilon(1e-12));

    const Eigen::VectorXd f0 = assemble_load(m, [](double, double) { return 0.0; });
    CHECK(f0.lpNorm<Eigen::Infinity>() == 0.0);

    // consistency with the exact mass matrix
    const Eigen::VectorXd viaB = assemble_mass(m) * Eigen::VectorXd::Ones(m.node_count());
    CHECK((f1 - viaB).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  const Mesh m = build_mesh(Domain::UnitSquare, 1);
  const Eigen::VectorXd fx = assemble_load(m, [](double x, double) { return x; });
  CHECK(fx.sum() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("load evaluation rejects non-finite data") {
  const Mesh m = build_mesh(Domain::UnitSquare, 0);
  CHECK_THROWS_AS(assemble_load(m, [](double x, double) { return 1.0 / (x - 0.25); }),
                  EvaluationError);
}

TEST_CASE("nodal interpolation") {
  const Mesh m = build_mesh(Domain::UnitSquare, 1);
  const FeFunction c = interpolate_nodal(m, [](double, double) { return 3.25; });
  CHECK(c.values.minCoeff() == 3.25);
  CHECK(c.values.maxCoeff() == 3.25);

  const FeFunction s = interpolate_nodal(m, [](double x, double y) { return x + y; });
  for (int k = 0; k < m.node_count(); ++k)
    if (m.nodes[k][0] == 0.5 && m.nodes[k][1] == 0.5) CHECK(s.values[k] == 1.0);

  // corner-singular field blows up at the origin node of the L-shape
  const Mesh ls = build_mesh(Domain::LShape, 0);
  auto singular = [](double x, double y) {
    const double r = std::hypot(x, y);
    double th = std::atan2(y, x);
    if (th < 0) th += 2 * kPi;
    return std::pow(r, -1.0 / 3.0) * std::tan(2.0 * th / 3.0);
  };
  CHECK_THROWS_AS(interpolate_nodal(ls, singular), EvaluationError);
}

TEST_CASE("prolongation is exact interpolation") {
  for (Domain dom : {Domain::UnitSquare, Domain::LShape}) {
    const Mesh coarse = build_mesh(dom, 1);
    const Mesh fine = build_mesh(dom, 2);

    const FeFunction c = interpolate_nodal(coarse, [](double, double) { return 2.5; });
    const FeFunction cf = prolong(c, fine);
    CHECK((cf.values.array() - 2.5).abs().maxCoeff() == 0.0);

    const FeFunction lin = interpolate_nodal(coarse, [](double x, double y) { return x - 2 * y; });
    const FeFunction linf = prolong(lin, fine);
    const FeFunction expect = interpolate_nodal(fine, [](double x, double y) { return x - 2 * y; });
    CHECK((linf.values - expect.values).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("prolongation preserves norms of the represented function") {
  for (Domain dom : {Domain::UnitSquare, Domain::LShape}) {
    const Mesh coarse = build_mesh(dom, 1);
    const Mesh fine = build_mesh(dom, 3);  // two levels up
    const FeFunction u = interpolate_nodal(
        coarse, [](double x, double y) { return std::sin(kPi * x) * (y + 0.3); });
    const FeFunction uf = prolong(u, fine);
    CHECK(fe_norm(uf, NormKind::H1Semi) ==
          doctest::Approx(fe_norm(u, NormKind::H1Semi)).epsilon(1e-12));
    CHECK(fe_norm(uf, NormKind::L2) ==
          doctest::Approx(fe_norm(u, NormKind::L2)).epsilon(1e-12));
  }
}

TEST_CASE("multi-level prolongation equals the chained one") {
  const Mesh m1 = build_mesh(Domain::LShape, 1);
  const Mesh m2 = build_mesh(Domain::LShape, 2);
  const Mesh m3 = build_mesh(Domain::LShape, 3);
  const FeFunction u = interpolate_nodal(
      m1, [](double x, double y) { return std::cos(x) * std::sin(2 * y); });
  const FeFunction direct = prolong(u, m3);
  const FeFunction chained = prolong(prolong(u, m2), m3);
  CHECK((direct.values - chained.values).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("prolongation rejects non-nested meshes") {
  const Mesh us = build_mesh(Domain::UnitSquare, 1);
  const Mesh ls = build_mesh(Domain::LShape, 2);
  const Mesh same = build_mesh(Domain::UnitSquare, 1);
  const FeFunction u = FeFunction::zero(us);
  CHECK_THROWS_AS(prolong(u, ls), StructureError);
  CHECK_THROWS_AS(prolong(u, same), StructureError);
}

TEST_CASE("solve_spd basics") {
  // identity system returns the right-hand side
  SpMat I(4, 4);
  I.setIdentity();
  Eigen::VectorXd b(4);
  b << 1, -2, 3, 0.5;
  CHECK((solve_spd(I, b) - b).lpNorm<Eigen::Infinity>() < 1e-12);

  // zero rhs with zero boundary gives the zero solution
  const Mesh m = build_mesh(Domain::UnitSquare, 2);
  const SpMat K = assemble_stiffness(m);
  const std::vector<int> bnd(m.boundary_loop.begin(), m.boundary_loop.end());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bnd.size());
  const Eigen::VectorXd x =
      solve_spd(K, Eigen::VectorXd::Zero(m.node_count()), &bnd, &zero);
  CHECK(x.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("solve_spd honors inhomogeneous fixed values") {
  const Mesh m = build_mesh(Domain::UnitSquare, 2);
  const SpMat K = assemble_stiffness(m);
  // harmonic extension of x1: the interior solve must reproduce x1 exactly
  const std::vector<int> bnd(m.boundary_loop.begin(), m.boundary_loop.end());
  Eigen::VectorXd bvals(bnd.size());
  for (std::size_t k = 0; k < bnd.size(); ++k) bvals[k] = m.nodes[bnd[k]][0];
  const Eigen::VectorXd x =
      solve_spd(K, Eigen::VectorXd::Zero(m.node_count()), &bnd, &bvals);
  for (int k = 0; k < m.node_count(); ++k)
    CHECK(x[k] == doctest::Approx(m.nodes[k][0]).epsilon(1e-9));
}

TEST_CASE("manufactured poisson solution converges at the expected orders") {
  auto exact = [](double x, double y) { return std::sin(kPi * x) * std::sin(kPi * y); };
  auto grad = [](double x, double y) -> std::array<double, 2> {
    return {kPi * std::cos(kPi * x) * std::sin(kPi * y),
            kPi * std::sin(kPi * x) * std::cos(kPi * y)};
  };
  auto rhs = [&](double x, double y) { return 2.0 * kPi * kPi * exact(x, y); };

  std::vector<double> el2, eh1;
  for (int lv = 1; lv <= 5; ++lv) {
    const Mesh m = build_mesh(Domain::UnitSquare, lv);
    const SpMat K = assemble_stiffness(m);
    const std::vector<int> bnd(m.boundary_loop.begin(), m.boundary_loop.end());
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bnd.size());
    const Eigen::VectorXd x = solve_spd(K, assemble_load(m, rhs), &bnd, &zero);
    const FeFunction u(m, x);
    el2.push_back(l2_error_vs(u, exact));
    eh1.push_back(h1semi_error_vs(u, grad));
  }
  for (std::size_t k = el2.size() - 3; k < el2.size(); ++k) {
    const double order_l2 = std::log2(el2[k - 1] / el2[k]);
    const double order_h1 = std::log2(eh1[k - 1] / eh1[k]);
    CHECK(order_l2 > 1.85);
    CHECK(order_l2 < 2.15);
    CHECK(order_h1 > 0.9);
    CHECK(order_h1 < 1.1);
  }
}

TEST_CASE("solve_spd reports non-convergence") {
  const Mesh m = build_mesh(Domain::UnitSquare, 3);
  const SpMat K = assemble_stiffness(m);
  const std::vector<int> bnd(m.boundary_loop.begin(), m.boundary_loop.end());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bnd.size());
  const Eigen::VectorXd load = assemble_load(m, [](double x, double y) { return x * y; });
  CHECK_THROWS_AS(solve_spd(K, load, &bnd, &zero, 1e-10, 2), SolverError);
}
