#pragma once

#include <functional>
#include <vector>

#include "flexagg/types.hpp"

namespace flexagg::numerics {

struct LuSolveResult {
    Mat x;
    double condition_estimate = 0.0;  // 1 / rcond, infinity-norm based
    double residual = 0.0;            // max |A*x - b| over all right-hand sides
};

/// Solves A X = B with partially pivoted LU. Throws SingularMatrix when a
/// pivot falls below 1e-13 * ||A||_inf.
LuSolveResult lu_solve(const Mat& a, const Mat& b);

struct NewtonOptions {
    double tol = 1e-10;      // on ||f(x)||_inf
    int max_iterations = 50;
    double fd_step = 1e-6;   // central-difference Jacobian step
    int max_halvings = 25;
};

struct NewtonResult {
    Vec2 x = Vec2::Zero();
    double residual = kInf;  // ||f(x)||_inf at the returned iterate
    int iterations = 0;
    bool converged = false;
};

/// Damped Newton on a 2-vector map with finite-difference Jacobian. The map
/// may signal an unevaluable point by returning non-finite components; the
/// line search backs off. Never throws; inspect `converged`.
NewtonResult newton_2d(const std::function<Vec2(const Vec2&)>& f, const Vec2& x0,
                       const NewtonOptions& opts = {});

/// minimize 1/2 z'Hz + g'z  s.t.  a_ineq z <= b_ineq, a_eq z = b_eq.
struct QpProblem {
    Mat h;
    Vec g;
    Mat a_ineq;  // may have zero rows
    Vec b_ineq;
    Mat a_eq;    // may have zero rows
    Vec b_eq;
};

struct QpSolution {
    Vec z;
    std::vector<int> active_set;  // indices of active inequality rows
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

struct QpOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    int max_iterations = 0;  // 0 = automatic (scales with problem size)
};

/// Dense primal active-set solver for convex QPs. Throws Infeasible when
/// phase 1 cannot reach the constraints, Unbounded on a free descent ray.
QpSolution qp_solve(const QpProblem& p, const QpOptions& opts = {});

/// Same solver, started from a point already satisfying the constraints
/// (within `opts.feas_tol`); skips the slack phase.
QpSolution qp_solve_from(const QpProblem& p, const Vec& z0, const QpOptions& opts = {});

}  // namespace flexagg::numerics
