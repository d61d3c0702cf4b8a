#include "flexagg/distflow.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "flexagg/numerics.hpp"

namespace flexagg::distflow {

double PowerFlowSolution::loss_p(const RadialNetwork& net) const {
    double s = 0.0;
    for (int k = 0; k < net.n_line(); ++k) s += net.branches[k].r * l[k];
    return s;
}

double PowerFlowSolution::loss_q(const RadialNetwork& net) const {
    double s = 0.0;
    for (int k = 0; k < net.n_line(); ++k) s += net.branches[k].x * l[k];
    return s;
}

namespace {

// Max violation over the full DistFlow equation set at the current state.
double equation_residual(const RadialNetwork& net, const PowerFlowSolution& s,
                         Denominator denom) {
    const int n = net.n_bus;
    const int m = net.n_line();
    double worst = std::abs(s.u[0] - 1.0);

    Vec balance_p = -net.demand_p;
    Vec balance_q = -net.demand_q;
    balance_p[net.der.bus] += s.der_p;
    balance_q[net.der.bus] += s.der_q;
    balance_p[0] += s.p_pcc;
    balance_q[0] += s.q_pcc;
    for (int k = 0; k < m; ++k) {
        const Branch& br = net.branches[k];
        balance_p[br.from] -= s.p_l[k];
        balance_q[br.from] -= s.q_l[k];
        balance_p[br.to] += s.p_l[k] - br.r * s.l[k];
        balance_q[br.to] += s.q_l[k] - br.x * s.l[k];

        const double z2 = br.r * br.r + br.x * br.x;
        const double drop = s.u[br.to] - s.u[br.from] +
                            2.0 * (br.r * s.p_l[k] + br.x * s.q_l[k]) - z2 * s.l[k];
        worst = std::max(worst, std::abs(drop));

        const double d = denom == Denominator::kSendingEnd
                             ? s.u[br.from]
                             : s.u[br.from] - s.u[br.to];
        const double cur = s.l[k] * d - (s.p_l[k] * s.p_l[k] + s.q_l[k] * s.q_l[k]);
        worst = std::max(worst, std::abs(cur));
    }
    for (int i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(balance_p[i]));
        worst = std::max(worst, std::abs(balance_q[i]));
    }
    return worst;
}

}  // namespace

PowerFlowSolution try_sweep_solve(const RadialNetwork& net, const Vec2& der,
                                  const SweepOptions& opts) {
    const int n = net.n_bus;
    const int m = net.n_line();
    PowerFlowSolution sol;
    sol.u = Vec::Ones(n);
    sol.p_l = Vec::Zero(m);
    sol.q_l = Vec::Zero(m);
    sol.l = Vec::Zero(m);
    sol.der_p = der[0];
    sol.der_q = der[1];

    Vec inj_p = -net.demand_p;
    Vec inj_q = -net.demand_q;
    inj_p[net.der.bus] += der[0];
    inj_q[net.der.bus] += der[1];

    for (int it = 1; it <= opts.max_iterations; ++it) {
        sol.iterations = it;
        // Backward: sending-end flows from the leaves toward the PCC. The
        // branch list is parent-before-child, so reverse order visits every
        // child line before the line feeding it.
        Vec acc_p = -inj_p;  // running "demand below + losses below" per bus
        Vec acc_q = -inj_q;
        for (int k = m - 1; k >= 0; --k) {
            const Branch& br = net.branches[k];
            sol.p_l[k] = acc_p[br.to] + br.r * sol.l[k];
            sol.q_l[k] = acc_q[br.to] + br.x * sol.l[k];
            acc_p[br.from] += sol.p_l[k];
            acc_q[br.from] += sol.q_l[k];
        }

        // Forward: voltage drops from the pinned PCC outward.
        double du_max = 0.0;
        for (int k = 0; k < m; ++k) {
            const Branch& br = net.branches[k];
            const double z2 = br.r * br.r + br.x * br.x;
            const double u_new = sol.u[br.from] -
                                 2.0 * (br.r * sol.p_l[k] + br.x * sol.q_l[k]) +
                                 z2 * sol.l[k];
            du_max = std::max(du_max, std::abs(u_new - sol.u[br.to]));
            sol.u[br.to] = u_new;
        }

        // Squared-current update.
        double dl_max = 0.0;
        bool bad = false;
        for (int k = 0; k < m; ++k) {
            const Branch& br = net.branches[k];
            const double d = opts.denominator == Denominator::kSendingEnd
                                 ? sol.u[br.from]
                                 : sol.u[br.from] - sol.u[br.to];
            if (!(d > 1e-12) || !std::isfinite(d)) {
                bad = true;
                break;
            }
            const double l_new =
                (sol.p_l[k] * sol.p_l[k] + sol.q_l[k] * sol.q_l[k]) / d;
            dl_max = std::max(dl_max, std::abs(l_new - sol.l[k]));
            sol.l[k] = l_new;
        }
        if (bad || !sol.u.allFinite() || !sol.l.allFinite()) {
            sol.converged = false;
            sol.residual = kInf;
            return sol;
        }
        if (std::max(du_max, dl_max) < opts.tol) {
            sol.converged = true;
            break;
        }
    }

    // Root balance: imports cover local net demand plus root-leaving flows.
    sol.p_pcc = -inj_p[0];
    sol.q_pcc = -inj_q[0];
    for (int k = 0; k < m; ++k) {
        if (net.branches[k].from == 0) {
            sol.p_pcc += sol.p_l[k];
            sol.q_pcc += sol.q_l[k];
        }
    }
    sol.residual = equation_residual(net, sol, opts.denominator);
    if (sol.converged && !(sol.residual < 1e-6)) sol.converged = false;
    return sol;
}

PowerFlowSolution sweep_solve(const RadialNetwork& net, const Vec2& der,
                              const SweepOptions& opts) {
    PowerFlowSolution sol = try_sweep_solve(net, der, opts);
    if (!sol.converged) {
        throw NoConvergence("sweep did not converge after " +
                            std::to_string(sol.iterations) +
                            " iterations (residual " + std::to_string(sol.residual) +
                            ")");
    }
    return sol;
}

std::string to_string(ViolationTag tag) {
    switch (tag) {
        case ViolationTag::kVoltageLow: return "voltage-low";
        case ViolationTag::kVoltageHigh: return "voltage-high";
        case ViolationTag::kPccP: return "pcc-p";
        case ViolationTag::kPccQ: return "pcc-q";
        case ViolationTag::kDerP: return "der-p";
        case ViolationTag::kDerQ: return "der-q";
        case ViolationTag::kUnreachable: return "unreachable";
    }
    return "unknown";
}

std::vector<Violation> check_feasible(const PowerFlowSolution& sol,
                                      const RadialNetwork& net, double tol) {
    std::vector<Violation> out;
    for (int i = 0; i < net.n_bus; ++i) {
        if (sol.u[i] < net.u_min[i] - tol) {
            out.push_back({ViolationTag::kVoltageLow, i, net.u_min[i] - sol.u[i]});
        } else if (sol.u[i] > net.u_max[i] + tol) {
            out.push_back({ViolationTag::kVoltageHigh, i, sol.u[i] - net.u_max[i]});
        }
    }
    auto band = [&](double v, const Interval& b, ViolationTag lo_hi) {
        if (v < b.lo - tol) out.push_back({lo_hi, -1, b.lo - v});
        if (v > b.hi + tol) out.push_back({lo_hi, -1, v - b.hi});
    };
    band(sol.p_pcc, net.pcc_p, ViolationTag::kPccP);
    band(sol.q_pcc, net.pcc_q, ViolationTag::kPccQ);
    band(sol.der_p, net.der.p, ViolationTag::kDerP);
    band(sol.der_q, net.der.q, ViolationTag::kDerQ);
    return out;
}

geometry::FlexPolygon convex_hull(std::span<const Vec2> points) {
    std::vector<Vec2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Vec2& a, const Vec2& b) {
                              return a.x() == b.x() && a.y() == b.y();
                          }),
              pts.end());
    geometry::FlexPolygon hull;
    if (pts.size() < 3) {
        hull.vertices = pts;
        return hull;
    }
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
    };
    std::vector<Vec2> h(2 * pts.size());
    size_t k = 0;
    for (const auto& p : pts) {  // lower chain
        while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
        h[k++] = p;
    }
    const size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {  // upper chain
        while (k >= lower && cross(h[k - 2], h[k - 1], *it) <= 0) --k;
        h[k++] = *it;
    }
    h.resize(k - 1);  // last point repeats the first
    hull.vertices = std::move(h);
    return hull;
}

ExactFlexCloud exact_flex_cloud(const RadialNetwork& net, int resolution,
                                const SweepOptions& opts, int threads) {
    if (resolution < 2) throw ConfigError("exact_flex_cloud: resolution must be >= 2");
    ExactFlexCloud cloud;
    auto axis = [&](const Interval& b) {
        std::vector<double> pts;
        if (b.degenerate(0.0)) {
            pts.push_back(b.lo);
            return pts;
        }
        pts.reserve(resolution);
        for (int i = 0; i < resolution; ++i) {
            pts.push_back(b.lo + (b.hi - b.lo) * i / (resolution - 1));
        }
        return pts;
    };
    const std::vector<double> ps = axis(net.der.p);
    const std::vector<double> qs = axis(net.der.q);
    cloud.grid_p = static_cast<int>(ps.size());
    cloud.grid_q = static_cast<int>(qs.size());
    const size_t total = ps.size() * qs.size();
    cloud.samples.resize(total);

    auto run = [&](size_t begin, size_t end) {
        for (size_t idx = begin; idx < end; ++idx) {
            const size_t i = idx / qs.size();
            const size_t j = idx % qs.size();
            CloudSample& s = cloud.samples[idx];
            s.der = Vec2(ps[i], qs[j]);
            PowerFlowSolution sol = try_sweep_solve(net, s.der, opts);
            s.converged = sol.converged;
            s.iterations = sol.iterations;
            s.residual = sol.residual;
            if (sol.converged) {
                s.exchange = Vec2(sol.p_pcc, sol.q_pcc);
                s.violations = check_feasible(sol, net);
                s.feasible = s.violations.empty();
            } else {
                s.exchange = Vec2(0.0, 0.0);
                s.violations = {{ViolationTag::kUnreachable, -1, sol.residual}};
            }
        }
    };

    int nthreads = threads > 0 ? threads
                               : static_cast<int>(std::thread::hardware_concurrency());
    nthreads = std::clamp<int>(nthreads, 1, 16);
    if (nthreads <= 1 || total < 64) {
        run(0, total);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (total + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const size_t b = t * chunk;
            const size_t e = std::min(total, b + chunk);
            if (b >= e) break;
            pool.emplace_back(run, b, e);
        }
        for (auto& th : pool) th.join();
    }

    std::vector<Vec2> feasible;
    feasible.reserve(total);
    for (const auto& s : cloud.samples) {
        if (s.feasible) feasible.push_back(s.exchange);
    }
    cloud.hull = convex_hull(feasible);
    return cloud;
}

InvertResult invert_pcc(const RadialNetwork& net, const Vec2& target,
                        const SweepOptions& opts, double tol) {
    auto f = [&](const Vec2& der) -> Vec2 {
        PowerFlowSolution sol = try_sweep_solve(net, der, opts);
        if (!sol.converged) {
            return Vec2(std::nan(""), std::nan(""));
        }
        return Vec2(sol.p_pcc - target[0], sol.q_pcc - target[1]);
    };
    numerics::NewtonOptions nopts;
    nopts.tol = tol;
    Vec2 start(net.der.p.mid(), net.der.q.mid());
    if (!std::isfinite(start[0])) start[0] = 0.0;
    if (!std::isfinite(start[1])) start[1] = 0.0;
    auto res = numerics::newton_2d(f, start, nopts);

    InvertResult out;
    out.der = res.x;
    out.converged = res.converged;
    out.residual = res.residual;
    out.solution = try_sweep_solve(net, res.x, opts);
    return out;
}

}  // namespace flexagg::distflow
