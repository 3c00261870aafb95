#include "evi/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <string>

#include "evi/error.hpp"

namespace evi {

namespace {
constexpr double kDivergenceCap = 1e12;
}

KktReport check_kkt(const ViSystem& sys, const Eigen::VectorXd& x) {
  if (x.size() != sys.size()) throw StructureError("check_kkt: dimension mismatch");
  const Eigen::VectorXd g = sys.applyS(x) + sys.offset;

  KktReport rep;
  Eigen::VectorXd proj = x - g;
  sys.project(proj);
  rep.stationarity_residual = (x - proj).norm();
  for (int i = 0; i < sys.n_state(); ++i) {
    if (!sys.is_constrained(i)) continue;
    rep.feasibility_violation = std::max(rep.feasibility_violation, x[i] - sys.upper[i]);
    const double lambda = g[i];
    rep.complementarity += std::abs(lambda * (sys.upper[i] - x[i]));
    rep.multiplier_sign_violation = std::max(rep.multiplier_sign_violation, lambda);
  }
  rep.feasibility_violation = std::max(rep.feasibility_violation, 0.0);
  rep.multiplier_sign_violation = std::max(rep.multiplier_sign_violation, 0.0);
  return rep;
}

Eigen::VectorXd projection_gradient_x(const ViSystem& sys, const SolverConfig& cfg,
                                      SolveStats* stats, const Eigen::VectorXd* warm) {
  if (cfg.tol <= 0.0) throw BoundsError("projection_gradient: tol must be positive");
  const int n = sys.size();
  const int ns = sys.n_state();
  const int na = sys.n_adjoint();
  Eigen::VectorXd x = warm ? *warm : Eigen::VectorXd::Zero(n);
  if (x.size() != n) throw StructureError("projection_gradient: warm-start size mismatch");
  sys.project(x);

  // Congruence rescaling of the adjoint block balances the skew coupling
  // against the damping of the state block; the solution set is mapped by
  // P -> P / beta and restored on exit.
  double beta = 1.0;
  const ViSystem* work = &sys;
  ViSystem scaled;
  if (na > 0) {
    if (cfg.adjoint_scale > 0.0) {
      beta = cfg.adjoint_scale;
    } else {
      auto max_row_abs = [](const SpRM& M) {
        double best = 0.0;
        for (int r = 0; r < M.rows(); ++r) {
          double s = 0.0;
          for (SpRM::InnerIterator it(M, r); it; ++it) s += std::abs(it.value());
          best = std::max(best, s);
        }
        return best;
      };
      const double row_a = max_row_abs(sys.A);
      const double row_c = max_row_abs(sys.C);
      beta = row_c > 0.0 ? 0.3 * std::sqrt(row_a / row_c) : 1.0;
    }
    scaled = sys;
    scaled.C = SpRM(beta * sys.C);
    scaled.CT = SpRM(beta * sys.CT);
    work = &scaled;
    x.tail(na) /= beta;
  }

  const double norm_s = work->abs_row_sum_max();
  const double c = (norm_s > 0.0 ? 1.0 / norm_s : 1.0) * cfg.step_scale;
  const Eigen::VectorXd& ub = work->upper;

  // the pure-stencil case runs the fused memory-lean passes
  const StencilOp* st = (na == 0 && work->stencil) ? &*work->stencil : nullptr;

  Eigen::VectorXd gs(n), e(n), d(n);
  Eigen::VectorXd w, gu, eu, t;
  if (!st) {
    w.resize(n);
    gu.resize(n);
    eu.resize(n);
    t.resize(n);
  }
  std::vector<double> pad;

  if (stats) {
    stats->history.clear();
    if (cfg.record_history) stats->history.reserve(1024);
  }

  auto finish = [&](Eigen::VectorXd v) {
    if (na > 0) v.tail(na) *= beta;
    return v;
  };

  double last_res = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it <= cfg.max_iter; ++it) {
    double res, e_sq;
    if (st) {
      double res2 = 0.0;
      st->pg_pass1(x.data(), work->offset.data(), ub.data(), c, gs.data(), e.data(),
                   res2, e_sq);
      res = std::sqrt(res2);
    } else {
      work->apply(x.data(), w.data(), pad);
      gu = w + work->offset;
      eu = x - (x - gu).cwiseMin(ub);
      // residual of the original, unscaled instance
      double res2 = eu.head(ns).squaredNorm();
      if (na > 0) res2 += eu.tail(na).squaredNorm() / (beta * beta);
      res = std::sqrt(res2);
    }
    last_res = res;
    if (stats) {
      stats->iterations = it;
      stats->final_residual = res;
      if (cfg.record_history) stats->history.emplace_back(it, res);
    }
    if (res < cfg.tol) return finish(x);
    if (!std::isfinite(res) || res > kDivergenceCap)
      throw SolverError("projection_gradient: diverged at iteration " +
                            std::to_string(it),
                        res, it);
    if (it == cfg.max_iter) break;

    double denom;
    if (st) {
      st->pg_pass2(e.data(), gs.data(), c, d.data(), denom);
    } else {
      gs = c * gu;
      e = x - (x - gs).cwiseMin(ub);
      e_sq = e.squaredNorm();
      work->applyT(e.data(), w.data(), pad);
      d = c * w + gs;
      t = c * w + e;
      denom = t.squaredNorm();
    }
    if (denom == 0.0)
      throw SolverError("projection_gradient: stalled step at iteration " +
                            std::to_string(it),
                        res, it);
    const double rho = e_sq / denom;
    x = (x - rho * d).cwiseMin(ub);
  }
  throw SolverError("projection_gradient: tolerance " + std::to_string(cfg.tol) +
                        " not reached in " + std::to_string(cfg.max_iter) +
                        " iterations (residual " + std::to_string(last_res) + ")",
                    last_res, cfg.max_iter);
}

FeSolutionBundle make_bundle(const ViSystem& sys, const Eigen::VectorXd& x,
                             int iterations, double residual) {
  FeSolutionBundle out;
  out.y_u_h = sys.state_function(x);
  out.y_h = FeFunction(*sys.mesh, out.y_u_h.values + sys.yf.values);
  if (sys.n_adjoint() > 0) out.p_h = sys.adjoint_function(x);
  const Eigen::VectorXd g = sys.applyS(x) + sys.offset;
  out.multiplier = Eigen::VectorXd::Zero(sys.n_state());
  for (int i = 0; i < sys.n_state(); ++i)
    if (sys.is_constrained(i)) out.multiplier[i] = g[i];
  out.iterations = iterations;
  out.final_residual = residual;
  return out;
}

FeSolutionBundle projection_gradient_solve(const ViSystem& sys, const SolverConfig& cfg,
                                           const Eigen::VectorXd* warm) {
  SolveStats stats;
  const Eigen::VectorXd x = projection_gradient_x(sys, cfg, &stats, warm);
  return make_bundle(sys, x, stats.iterations, stats.final_residual);
}

FeSolutionBundle pdhg_solve(const ViSystem& sys, const SolverConfig& cfg,
                            SolveStats* stats) {
  if (sys.n_adjoint() == 0)
    throw StructureError("pdhg_solve: system has no adjoint dofs (boundary control only)");
  const Mesh& mesh = *sys.mesh;
  const int ns = sys.n_state();
  const int na = sys.n_adjoint();
  // 10*alpha floored at 1: the prox weight must dominate the coupling for
  // the splitting to contract
  const double gamma =
      cfg.pdhg_prox_gamma >= 0.0 ? cfg.pdhg_prox_gamma : std::max(10.0 * sys.alpha, 1.0);
  const double s = cfg.pdhg_prox_s;

  const SpMat L = assemble_form(
      mesh, sys.kind == ProblemKind::NeumannBC ? BilinearKind::GradGradPlusMass
                                               : BilinearKind::GradGrad);

  // primal prox operator (alpha + gamma) a(.,.) + (.,.) over the full space
  ViSystem inner;
  inner.kind = ProblemKind::Distributed;
  inner.mesh = sys.mesh;
  inner.yf = sys.yf;
  inner.alpha = sys.alpha;
  inner.state_nodes = sys.state_nodes;
  inner.A = SpMat(SpMat(sys.A) + gamma * L);
  inner.upper = sys.upper.head(ns);
  inner.offset.resize(ns);

  // dual metric: interior grad-grad stiffness, factored once
  const SpMat K = assemble_stiffness(mesh);
  const SpMat K00 = extract_submatrix(K, sys.adjoint_nodes, sys.adjoint_nodes);
  Eigen::SimplicialLDLT<SpMat> dual_solver(K00);
  if (dual_solver.info() != Eigen::Success)
    throw SolverError("pdhg_solve: dual metric factorization failed", 0.0, 0);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(ns);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(na);
  Eigen::VectorXd x(ns + na);

  SolverConfig inner_cfg = cfg;
  inner_cfg.tol = cfg.tol / 10.0;
  inner_cfg.record_history = false;

  if (stats) stats->history.clear();
  for (int it = 0; it <= cfg.max_iter; ++it) {
    x.head(ns) = y;
    x.tail(na) = p;
    const Eigen::VectorXd g = sys.applyS(x) + sys.offset;
    Eigen::VectorXd proj = x - g;
    sys.project(proj);
    const double res = (x - proj).norm();
    if (stats) {
      stats->iterations = it;
      stats->final_residual = res;
      if (cfg.record_history) stats->history.emplace_back(it, res);
    }
    if (res < cfg.tol) return make_bundle(sys, x, it, res);
    if (!std::isfinite(res) || res > kDivergenceCap)
      throw SolverError("pdhg_solve: diverged at iteration " + std::to_string(it), res,
                        it);
    if (it == cfg.max_iter) break;

    // primal half step
    inner.offset = -(gamma * (L * y)) + sys.offset.head(ns);
    inner.offset.noalias() -= sys.CT * p;
    const Eigen::VectorXd y_next = projection_gradient_x(inner, inner_cfg, nullptr, &y);

    // dual half step: s (grad p+, grad v) = s (grad p, grad v) - a(2y+ - y, v)
    const Eigen::VectorXd rhs =
        K00 * p - (1.0 / s) * (sys.C * (2.0 * y_next - y));
    p = dual_solver.solve(rhs);
    y = y_next;
  }
  const double last = stats ? stats->final_residual : 0.0;
  throw SolverError("pdhg_solve: tolerance not reached in " +
                        std::to_string(cfg.max_iter) + " outer iterations",
                    last, cfg.max_iter);
}

Eigen::VectorXd active_set_oracle_x(const ViSystem& sys) {
  const int m = sys.constrained_count();
  if (m > 16)
    throw SizeError("active_set_oracle: " + std::to_string(m) +
                    " constrained dofs exceed the enumeration limit of 16");
  const int n = sys.size();
  const Eigen::MatrixXd S = sys.dense();
  const Eigen::VectorXd& b = sys.offset;

  std::vector<int> cidx;
  for (int i = 0; i < sys.n_state(); ++i)
    if (sys.is_constrained(i)) cidx.push_back(i);

  std::vector<int> others;  // free state dofs and adjoint rows
  {
    std::vector<char> isc(n, 0);
    for (int i : cidx) isc[i] = 1;
    for (int i = 0; i < n; ++i)
      if (!isc[i]) others.push_back(i);
  }

  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> unknown = others;
    std::vector<int> active;
    for (int k = 0; k < m; ++k) {
      if (mask & (1u << k)) active.push_back(cidx[k]);
      else unknown.push_back(cidx[k]);
    }
    const int nu = static_cast<int>(unknown.size());

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i : active) x[i] = sys.upper[i];

    if (nu > 0) {
      Eigen::MatrixXd M(nu, nu);
      Eigen::VectorXd rhs(nu);
      for (int r = 0; r < nu; ++r) {
        double acc = b[unknown[r]];
        for (int i : active) acc += S(unknown[r], i) * x[i];
        rhs[r] = -acc;
        for (int c = 0; c < nu; ++c) M(r, c) = S(unknown[r], unknown[c]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd xu = lu.solve(rhs);
      for (int r = 0; r < nu; ++r) x[unknown[r]] = xu[r];
    }

    bool ok = true;
    for (int i : unknown) {
      if (i < sys.n_state() && sys.is_constrained(i) && x[i] > sys.upper[i] + 1e-12) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    const Eigen::VectorXd g = S * x + b;
    for (int i : active) {
      if (g[i] > 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) return x;
  }
  throw Error("active_set_oracle: no feasible active set found");
}

FeSolutionBundle active_set_oracle(const ViSystem& sys) {
  const Eigen::VectorXd x = active_set_oracle_x(sys);
  const KktReport rep = check_kkt(sys, x);
  return make_bundle(sys, x, 0, rep.stationarity_residual);
}

}  // namespace evi
