#include "flexagg/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace flexagg::numerics {

LuSolveResult lu_solve(const Mat& a, const Mat& b) {
    if (a.rows() != a.cols()) {
        throw SingularMatrix("lu_solve needs a square matrix, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    if (a.rows() != b.rows()) {
        throw SingularMatrix("dimension mismatch: A is " + std::to_string(a.rows()) +
                             "x" + std::to_string(a.cols()) + ", B has " +
                             std::to_string(b.rows()) + " rows");
    }
    LuSolveResult res;
    if (a.rows() == 0) {
        res.x = Mat::Zero(0, b.cols());
        res.condition_estimate = 1.0;
        return res;
    }
    const double a_norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    Eigen::PartialPivLU<Mat> lu(a);
    const double pivot_min = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(pivot_min > 1e-13 * a_norm)) {
        throw SingularMatrix("matrix is singular to working precision (pivot " +
                             std::to_string(pivot_min) + ", norm " +
                             std::to_string(a_norm) + ")");
    }
    res.x = lu.solve(b);
    const double rcond = lu.rcond();
    res.condition_estimate = rcond > 0 ? 1.0 / rcond : kInf;
    if (b.size() > 0) {
        res.residual = (a * res.x - b).cwiseAbs().maxCoeff();
    }
    return res;
}

namespace {

bool finite2(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

}  // namespace

NewtonResult newton_2d(const std::function<Vec2(const Vec2&)>& f, const Vec2& x0,
                       const NewtonOptions& opts) {
    NewtonResult res;
    res.x = x0;
    Vec2 fx = f(x0);
    if (!finite2(fx)) return res;  // unevaluable start
    res.residual = fx.cwiseAbs().maxCoeff();

    for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
        if (res.residual <= opts.tol) {
            res.converged = true;
            return res;
        }
        // Central-difference Jacobian, falling back to one-sided when the map
        // is unevaluable on one side.
        Mat2 jac;
        bool jac_ok = true;
        for (int j = 0; j < 2 && jac_ok; ++j) {
            Vec2 hi = res.x, lo = res.x;
            hi[j] += opts.fd_step;
            lo[j] -= opts.fd_step;
            Vec2 f_hi = f(hi);
            Vec2 f_lo = f(lo);
            if (finite2(f_hi) && finite2(f_lo)) {
                jac.col(j) = (f_hi - f_lo) / (2.0 * opts.fd_step);
            } else if (finite2(f_hi)) {
                jac.col(j) = (f_hi - fx) / opts.fd_step;
            } else if (finite2(f_lo)) {
                jac.col(j) = (fx - f_lo) / opts.fd_step;
            } else {
                jac_ok = false;
            }
        }
        if (!jac_ok) return res;

        const double det = jac(0, 0) * jac(1, 1) - jac(0, 1) * jac(1, 0);
        const double scale = jac.cwiseAbs().maxCoeff();
        Vec2 step;
        if (std::abs(det) > 1e-14 * (scale * scale + 1e-300)) {
            step[0] = (-fx[0] * jac(1, 1) + fx[1] * jac(0, 1)) / det;
            step[1] = (-fx[1] * jac(0, 0) + fx[0] * jac(1, 0)) / det;
        } else {
            // Near-singular Jacobian: fall back to a scaled gradient step.
            Vec2 grad = jac.transpose() * fx;
            double denom = grad.squaredNorm();
            if (denom < 1e-300) return res;
            step = -grad * (fx.squaredNorm() / denom);
        }

        // Backtracking on the residual norm.
        double alpha = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            Vec2 trial = res.x + alpha * step;
            Vec2 f_trial = f(trial);
            if (finite2(f_trial)) {
                double r_trial = f_trial.cwiseAbs().maxCoeff();
                if (r_trial < res.residual) {
                    res.x = trial;
                    fx = f_trial;
                    res.residual = r_trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) return res;  // stalled
    }
    res.converged = res.residual <= opts.tol;
    return res;
}

namespace {

struct KktStep {
    Vec p;
    Vec lambda;  // multipliers for the working-set rows (equalities first)
};

// Solves the equality-constrained subproblem: keep rows of `a_w` active,
// minimize the quadratic from the current point z. Regularizes when the KKT
// matrix is singular (H only positive semidefinite or dependent rows).
KktStep solve_kkt(const Mat& h, const Vec& grad, const Mat& a_w) {
    const int n = static_cast<int>(h.rows());
    const int mw = static_cast<int>(a_w.rows());
    Mat kkt = Mat::Zero(n + mw, n + mw);
    kkt.topLeftCorner(n, n) = h;
    if (mw > 0) {
        kkt.topRightCorner(n, mw) = a_w.transpose();
        kkt.bottomLeftCorner(mw, n) = a_w;
    }
    Vec rhs = Vec::Zero(n + mw);
    rhs.head(n) = -grad;

    Mat sol;
    try {
        sol = lu_solve(kkt, rhs).x;
    } catch (const SingularMatrix&) {
        const double h_scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        kkt.topLeftCorner(n, n) += 1e-10 * h_scale * Mat::Identity(n, n);
        if (mw > 0) {
            kkt.bottomRightCorner(mw, mw) -= 1e-12 * Mat::Identity(mw, mw);
        }
        sol = lu_solve(kkt, rhs).x;
    }
    KktStep s;
    s.p = sol.col(0).head(n);
    s.lambda = sol.col(0).tail(mw);
    return s;
}

}  // namespace

QpSolution qp_solve(const QpProblem& prob, const QpOptions& opts) {
    const int n = static_cast<int>(prob.h.rows());
    const int m_in = static_cast<int>(prob.a_ineq.rows());
    const int m_eq = static_cast<int>(prob.a_eq.rows());
    if (prob.h.cols() != n || static_cast<int>(prob.g.size()) != n) {
        throw ConfigError("qp_solve: inconsistent H/g dimensions");
    }
    if ((m_in > 0 && prob.a_ineq.cols() != n) || (m_eq > 0 && prob.a_eq.cols() != n)) {
        throw ConfigError("qp_solve: constraint column count != " + std::to_string(n));
    }

    // Feasible start: least-squares on the equalities, then a slack phase if
    // any inequality is violated.
    Vec z = Vec::Zero(n);
    if (m_eq > 0) {
        z = prob.a_eq.colPivHouseholderQr().solve(prob.b_eq);
        double eq_res = (prob.a_eq * z - prob.b_eq).cwiseAbs().maxCoeff();
        if (eq_res > std::max(opts.feas_tol, 1e-9 * (1.0 + prob.b_eq.cwiseAbs().maxCoeff()))) {
            throw Infeasible("equality constraints are inconsistent (residual " +
                             std::to_string(eq_res) + ")");
        }
    }
    double worst = 0.0;
    if (m_in > 0) worst = (prob.a_ineq * z - prob.b_ineq).maxCoeff();
    if (worst > opts.feas_tol) {
        // Auxiliary strictly convex QP in (z, t): pull t below feas_tol while
        // staying on the equalities; a_i'z - t <= b_i relaxes every row.
        QpProblem aux;
        const int na = n + 1;
        aux.h = Mat::Zero(na, na);
        aux.h.topLeftCorner(n, n) = 1e-6 * Mat::Identity(n, n);
        aux.h(n, n) = 1.0;
        aux.g = Vec::Zero(na);
        aux.g.head(n) = -1e-6 * z;
        aux.g[n] = 1.0;
        aux.a_ineq = Mat::Zero(m_in, na);
        aux.a_ineq.leftCols(n) = prob.a_ineq;
        aux.a_ineq.col(n).setConstant(-1.0);
        aux.b_ineq = prob.b_ineq;
        if (m_eq > 0) {
            aux.a_eq = Mat::Zero(m_eq, na);
            aux.a_eq.leftCols(n) = prob.a_eq;
            aux.b_eq = prob.b_eq;
        }
        QpSolution phase1;
        {
            // Recursive call is safe: the start below is already feasible.
            QpProblem shifted = aux;
            Vec start = Vec::Zero(na);
            start.head(n) = z;
            start[n] = worst + 1.0;
            // Shift variables so the recursive solve starts at the origin of
            // a feasible problem: substitute z = start + y.
            shifted.g += aux.h * start;
            shifted.b_ineq -= aux.a_ineq * start;
            if (m_eq > 0) shifted.b_eq -= aux.a_eq * start;
            QpSolution inner = qp_solve_from(shifted, Vec::Zero(na), opts);
            phase1 = inner;
            phase1.z = start + inner.z;
        }
        if (phase1.z[n] > opts.feas_tol) {
            throw Infeasible("no point satisfies the constraints (best slack " +
                             std::to_string(phase1.z[n]) + ")");
        }
        z = phase1.z.head(n);
    }
    return qp_solve_from(prob, z, opts);
}

QpSolution qp_solve_from(const QpProblem& prob, const Vec& z0, const QpOptions& opts) {
    const int n = static_cast<int>(prob.h.rows());
    const int m_in = static_cast<int>(prob.a_ineq.rows());
    const int m_eq = static_cast<int>(prob.a_eq.rows());
    const int cap = opts.max_iterations > 0 ? opts.max_iterations
                                            : 50 * (n + m_in + m_eq + 1);

    Vec z = z0;
    std::vector<int> work;  // active inequality rows
    QpSolution sol;

    for (int it = 0; it < cap; ++it) {
        sol.iterations = it + 1;
        const int mw = m_eq + static_cast<int>(work.size());
        Mat a_w(mw, n);
        for (int i = 0; i < m_eq; ++i) a_w.row(i) = prob.a_eq.row(i);
        for (size_t i = 0; i < work.size(); ++i) {
            a_w.row(m_eq + static_cast<int>(i)) = prob.a_ineq.row(work[i]);
        }

        const Vec grad = prob.h * z + prob.g;
        KktStep step = solve_kkt(prob.h, grad, a_w);
        const double p_norm = step.p.size() > 0 ? step.p.cwiseAbs().maxCoeff() : 0.0;
        const double z_scale = 1.0 + z.cwiseAbs().maxCoeff();

        if (p_norm <= opts.opt_tol * z_scale) {
            // Stationary on the working set: check multiplier signs.
            int drop = -1;
            double most_negative = -opts.opt_tol;
            for (size_t i = 0; i < work.size(); ++i) {
                double lam = step.lambda[m_eq + static_cast<int>(i)];
                if (lam < most_negative) {
                    most_negative = lam;
                    drop = static_cast<int>(i);
                }
            }
            if (drop < 0) {
                sol.z = z;
                sol.active_set = work;
                std::sort(sol.active_set.begin(), sol.active_set.end());
                sol.objective = 0.5 * z.dot(prob.h * z) + prob.g.dot(z);
                Vec stat = grad;
                if (mw > 0) stat += a_w.transpose() * step.lambda;
                sol.kkt_residual = stat.cwiseAbs().maxCoeff();
                return sol;
            }
            work.erase(work.begin() + drop);
            continue;
        }

        // Unbounded ray: no curvature, strict descent, and nothing blocks.
        const Vec dir = step.p / p_norm;
        const double curvature = dir.dot(prob.h * dir);
        double alpha = 1.0;
        int blocking = -1;
        for (int i = 0; i < m_in; ++i) {
            if (std::find(work.begin(), work.end(), i) != work.end()) continue;
            const double advance = prob.a_ineq.row(i).dot(step.p);
            if (advance <= 1e-13 * z_scale) continue;
            const double room = std::max(0.0, prob.b_ineq[i] - prob.a_ineq.row(i).dot(z));
            const double a_i = room / advance;
            if (a_i < alpha) {
                alpha = a_i;
                blocking = i;
            }
        }
        if (blocking < 0 && alpha >= 1.0 && curvature < 1e-12 &&
            grad.dot(dir) < -opts.opt_tol) {
            throw Unbounded("objective decreases along an unconstrained ray");
        }
        z += alpha * step.p;
        if (blocking >= 0) work.push_back(blocking);
    }
    throw NoConvergence("active-set iteration cap reached (" + std::to_string(cap) + ")");
}

}  // namespace flexagg::numerics
