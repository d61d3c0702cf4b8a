#include "flexagg/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "flexagg/numerics.hpp"

namespace flexagg::coordination {

std::string to_string(Method m) {
    switch (m) {
        case Method::kReference: return "reference";
        case Method::kLds: return "lds";
        case Method::kSlc: return "slc";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "reference") return Method::kReference;
    if (s == "lds") return Method::kLds;
    if (s == "slc") return Method::kSlc;
    throw ConfigError("unknown method '" + s + "' (want reference|lds|slc)");
}

std::vector<FeederAttachment> attach_feeders(const matpower::RawCase& tso_case,
                                             const AttachThresholds& thresholds) {
    if (!(thresholds.low <= thresholds.high)) {
        throw ConfigError("attachment thresholds must satisfy low <= high");
    }
    std::vector<const matpower::BusRow*> buses;
    for (const auto& b : tso_case.bus_rows) buses.push_back(&b);
    std::sort(buses.begin(), buses.end(),
              [](const auto* a, const auto* b) { return a->bus_id < b->bus_id; });
    std::vector<FeederAttachment> out;
    for (const auto* b : buses) {
        if (b->type_code == 3) continue;  // the slack bus keeps no feeder
        FeederAttachment att;
        att.tso_bus_id = b->bus_id;
        if (b->pd_mw > thresholds.high) {
            att.feeder_kind = "case118zh";
        } else if (b->pd_mw >= thresholds.low) {
            att.feeder_kind = "case10ba";
        } else {
            att.feeder_kind = "case33mg";
        }
        out.push_back(att);
    }
    return out;
}

TsoModel build_tso_model(const matpower::RawCase& tso_case,
                         std::vector<FeederAttachment> attachments) {
    TsoModel tso;
    tso.n_bus = static_cast<int>(tso_case.bus_rows.size());
    tso.base_mva = tso_case.base_mva;
    std::map<int, int> id_to_index;
    tso.orig_bus_id.resize(tso.n_bus);
    tso.demand_p = Vec::Zero(tso.n_bus);
    for (int i = 0; i < tso.n_bus; ++i) {
        const auto& b = tso_case.bus_rows[i];
        id_to_index[b.bus_id] = i;
        tso.orig_bus_id[i] = b.bus_id;
        tso.demand_p[i] = b.pd_mw / tso.base_mva;
        if (b.type_code == 3) tso.slack_bus = i;
    }
    for (const auto& br : tso_case.branch_rows) {
        if (br.status == 0) continue;
        DcLine line;
        line.from = id_to_index.at(br.from_bus);
        line.to = id_to_index.at(br.to_bus);
        line.susceptance = br.x_pu != 0.0 ? 1.0 / br.x_pu : 0.0;
        tso.lines.push_back(line);
    }
    for (size_t i = 0; i < tso_case.gen_rows.size(); ++i) {
        const auto& g = tso_case.gen_rows[i];
        TsoGenerator gen;
        gen.bus = id_to_index.at(g.bus_id);
        gen.p = {g.pmin_mw / tso.base_mva, g.pmax_mw / tso.base_mva};
        if (i < tso_case.gencost_rows.size()) {
            const auto& c = tso_case.gencost_rows[i];
            gen.cost = {c.c2, c.c1, c.c0};
        }
        if (gen.cost.c2 < 0) {
            throw ConfigError("generator at bus " + std::to_string(g.bus_id) +
                              " has concave cost (c2 < 0)");
        }
        tso.generators.push_back(gen);
    }
    for (auto& att : attachments) {
        auto it = id_to_index.find(att.tso_bus_id);
        if (it == id_to_index.end()) {
            throw ConfigError("attachment references unknown bus " +
                              std::to_string(att.tso_bus_id));
        }
        att.tso_bus = it->second;
        tso.demand_p[att.tso_bus] = 0.0;  // the feeder replaces the lumped load
    }
    tso.attachments = std::move(attachments);
    return tso;
}

namespace {

// Lossless DER setpoint implied by a planned exchange (per-feeder balance).
Vec2 state_map_der(const RadialNetwork& net, const Vec2& u) {
    return Vec2(net.total_demand_p() - u[0], net.total_demand_q() - u[1]);
}

double der_cost_at(const RadialNetwork& net, double der_p_pu) {
    return net.der.cost.eval(der_p_pu * net.base_mva);
}

struct MasterSolution {
    Vec gen_p;                 // TSO p.u.
    std::vector<Vec2> planned; // feeder p.u.
};

// One solve of the convex master QP at fixed per-feeder loss estimates.
MasterSolution solve_master(const TsoModel& tso, const std::vector<FeederSpec>& feeders,
                            const std::vector<Vec2>& loss, Method method,
                            const CoordinationOptions& opts) {
    const int n_g = static_cast<int>(tso.generators.size());
    const int n_f = static_cast<int>(feeders.size());
    const int dim = n_g + 2 * n_f;
    const double base = tso.base_mva;

    numerics::QpProblem qp;
    qp.h = Mat::Zero(dim, dim);
    qp.g = Vec::Zero(dim);

    for (int i = 0; i < n_g; ++i) {
        const QuadCost& c = tso.generators[i].cost;
        qp.h(i, i) = 2.0 * c.c2 * base * base;
        qp.g[i] = c.c1 * base;
    }
    int facet_rows = 0;
    for (const auto& f : feeders) facet_rows += static_cast<int>(f.facets.size());
    qp.a_ineq = Mat::Zero(2 * n_g + facet_rows, dim);
    qp.b_ineq = Vec::Zero(2 * n_g + facet_rows);
    for (int i = 0; i < n_g; ++i) {
        qp.a_ineq(2 * i, i) = 1.0;
        qp.b_ineq[2 * i] = tso.generators[i].p.hi;
        qp.a_ineq(2 * i + 1, i) = -1.0;
        qp.b_ineq[2 * i + 1] = -tso.generators[i].p.lo;
    }

    // Single DC balance: with every line limit infinite the network collapses
    // to one power-conservation row; imports enter at the feeder scale.
    qp.a_eq = Mat::Zero(1, dim);
    qp.b_eq = Vec::Zero(1);
    for (int i = 0; i < n_g; ++i) qp.a_eq(0, i) = 1.0;
    qp.b_eq[0] = tso.demand_p.sum();

    int row = 2 * n_g;
    for (int f = 0; f < n_f; ++f) {
        const FeederSpec& spec = feeders[f];
        const RadialNetwork& net = spec.net;
        const double scale = net.base_mva / base;
        const int up = n_g + 2 * f;
        const int uq = up + 1;

        qp.a_eq(0, up) = -scale;
        qp.b_eq[0] += scale * loss[f][0];

        // DER cost in the planned variable: p_g(u) = D_p - u_p (in MW terms).
        const double d_mw = net.total_demand_p() * net.base_mva;
        const double to_mw = net.base_mva;
        const QuadCost& c = net.der.cost;
        // c2 (d - t u)^2 + c1 (d - t u): quadratic coefficients in u_p.
        qp.h(up, up) += 2.0 * c.c2 * to_mw * to_mw;
        qp.g[up] += -2.0 * c.c2 * d_mw * to_mw - c.c1 * to_mw;

        // Reactive interface penalty on the delivered exchange (Mvar scale).
        const double lam_q = method == Method::kLds ? 0.0 : loss[f][1];
        qp.h(uq, uq) += 2.0 * opts.reactive_weight * to_mw * to_mw;
        qp.g[uq] += 2.0 * opts.reactive_weight * to_mw * to_mw * lam_q;

        if (spec.facets.empty()) {
            throw DegeneratePolygon("feeder " + std::to_string(f) + " (" + net.name +
                                    ") has an empty flexibility polygon");
        }
        for (const auto& h : spec.facets) {
            qp.a_ineq(row, up) = h.normal[0];
            qp.a_ineq(row, uq) = h.normal[1];
            qp.b_ineq[row] = h.offset;
            ++row;
        }
    }

    numerics::QpSolution sol = numerics::qp_solve(qp);
    MasterSolution out;
    out.gen_p = sol.z.head(n_g);
    out.planned.resize(n_f);
    for (int f = 0; f < n_f; ++f) {
        out.planned[f] = Vec2(sol.z[n_g + 2 * f], sol.z[n_g + 2 * f + 1]);
    }
    return out;
}

// Reference dispatch for one price scenario: dense search over the exact
// cloud followed by shrinking local DER grids around the incumbent.
DispatchResult reference_search(const TsoModel& tso, const FeederSpec& feeder,
                                const PriceSweepOptions& opts) {
    const RadialNetwork& net = feeder.net;
    const CoordinationOptions& copts = opts.coordination;
    const double base = net.base_mva;
    auto objective = [&](double der_p, double p_pcc, double q_pcc) {
        return opts.tso_cost.eval(p_pcc * base) + net.der.cost.eval(der_p * base) +
               copts.reactive_weight * (q_pcc * base) * (q_pcc * base);
    };

    distflow::ExactFlexCloud local_cloud;
    const distflow::ExactFlexCloud* cloud = &feeder.cloud;
    if (cloud->samples.empty()) {
        local_cloud = distflow::exact_flex_cloud(net, opts.reference_resolution,
                                                 copts.sweep);
        cloud = &local_cloud;
    }

    bool found = false;
    Vec2 best_der = Vec2::Zero();
    Vec2 best_u = Vec2::Zero();
    double best_obj = kInf;
    for (const auto& s : cloud->samples) {
        if (!s.feasible) continue;
        const double obj = objective(s.der[0], s.exchange[0], s.exchange[1]);
        if (obj < best_obj) {
            best_obj = obj;
            best_der = s.der;
            best_u = s.exchange;
            found = true;
        }
    }
    if (!found) {
        throw Infeasible("reference search found no feasible sample on " + net.name);
    }

    // Local refinement: 9x9 windows shrinking around the incumbent.
    double half_p = net.der.p.width() / std::max(1, cloud->grid_p - 1);
    double half_q = net.der.q.width() / std::max(1, cloud->grid_q - 1);
    const int pts = 9;
    for (int pass = 0; pass < 4; ++pass) {
        for (int i = 0; i < pts; ++i) {
            for (int j = 0; j < pts; ++j) {
                Vec2 der(best_der[0] + half_p * (2.0 * i / (pts - 1) - 1.0),
                         best_der[1] + half_q * (2.0 * j / (pts - 1) - 1.0));
                der[0] = std::clamp(der[0], net.der.p.lo, net.der.p.hi);
                der[1] = std::clamp(der[1], net.der.q.lo, net.der.q.hi);
                auto sol = distflow::try_sweep_solve(net, der, copts.sweep);
                if (!sol.converged || !distflow::check_feasible(sol, net).empty()) {
                    continue;
                }
                const double obj = objective(der[0], sol.p_pcc, sol.q_pcc);
                if (obj < best_obj) {
                    best_obj = obj;
                    best_der = der;
                    best_u = Vec2(sol.p_pcc, sol.q_pcc);
                }
            }
        }
        half_p *= 0.25;
        half_q *= 0.25;
    }

    DispatchResult res;
    res.method = Method::kReference;
    res.fixed_point_iterations = 4;
    res.generator_p = Vec::Constant(1, best_u[0] * net.base_mva / tso.base_mva);

    FeederDispatch fd;
    fd.feeder_kind = net.name;
    fd.tso_bus_id = tso.attachments.at(0).tso_bus_id;
    fd.planned = best_u;
    fd.delivered = best_u;
    fd.der_planned = best_der;
    auto inv = distflow::invert_pcc(net, fd.delivered, copts.sweep);
    fd.reachable = inv.converged;
    fd.der_realized = inv.converged ? inv.der : best_der;
    if (inv.converged) {
        fd.violations = distflow::check_feasible(inv.solution, net);
    } else {
        fd.violations.push_back({distflow::ViolationTag::kUnreachable, -1, inv.residual});
    }
    fd.cost = der_cost_at(net, fd.der_realized[0]);
    res.cost_total = opts.tso_cost.eval(best_u[0] * base) + fd.cost +
                     copts.reactive_weight * (fd.delivered[1] * base) *
                         (fd.delivered[1] * base);
    res.feeders.push_back(std::move(fd));
    return res;
}

}  // namespace

DispatchResult coordinate(const TsoModel& tso, const std::vector<FeederSpec>& feeders,
                          Method method, const CoordinationOptions& opts) {
    const int n_f = static_cast<int>(feeders.size());
    if (static_cast<int>(tso.attachments.size()) != n_f) {
        throw ConfigError("coordinate: " + std::to_string(tso.attachments.size()) +
                          " attachments for " + std::to_string(n_f) + " feeders");
    }

    std::vector<Vec2> loss(n_f, Vec2::Zero());
    std::vector<Vec2> delivered(n_f, Vec2::Zero());
    MasterSolution master;
    DispatchResult result;
    result.method = method;

    const int cap = method == Method::kLds ? 1 : opts.fixed_point_cap;
    double gap = kInf;
    for (int it = 1; it <= cap; ++it) {
        result.fixed_point_iterations = it;
        master = solve_master(tso, feeders, loss, method, opts);

        gap = 0.0;
        for (int f = 0; f < n_f; ++f) {
            const Vec2& u = master.planned[f];
            Vec2 new_loss = Vec2::Zero();
            if (method == Method::kSlc) {
                new_loss[0] = loss_compensation::p_loss(feeders[f].loss, u);
                new_loss[1] = loss_compensation::q_loss(feeders[f].loss, u);
            } else if (method == Method::kReference) {
                const Vec2 der = state_map_der(feeders[f].net, u);
                auto flow = distflow::try_sweep_solve(feeders[f].net, der, opts.sweep);
                if (!flow.converged) {
                    throw NoConvergence(
                        "reference loss evaluation diverged on feeder " +
                        std::to_string(f) + " at u = (" + std::to_string(u[0]) + ", " +
                        std::to_string(u[1]) + ")");
                }
                new_loss = Vec2(flow.p_pcc - u[0], flow.q_pcc - u[1]);
            }
            const Vec2 new_delivered = u + new_loss;
            gap = std::max(gap, (new_delivered - delivered[f]).cwiseAbs().maxCoeff());
            delivered[f] = new_delivered;
            loss[f] = new_loss;
        }
        if (method == Method::kLds) {
            result.fixed_point_gap = 0.0;
            break;
        }
        if (it > 1 && gap < opts.fixed_point_tol) {
            result.fixed_point_gap = gap;
            break;
        }
        if (it == cap) {
            throw FixedPointStall("loss fixed point stalled after " +
                                  std::to_string(cap) + " iterations (gap " +
                                  std::to_string(gap) + ")");
        }
    }

    result.generator_p = master.gen_p;
    result.cost_total = 0.0;
    const double base = tso.base_mva;
    for (size_t i = 0; i < tso.generators.size(); ++i) {
        result.cost_total += tso.generators[i].cost.eval(master.gen_p[i] * base);
    }

    result.feeders.resize(n_f);
    for (int f = 0; f < n_f; ++f) {
        FeederDispatch& fd = result.feeders[f];
        const RadialNetwork& net = feeders[f].net;
        fd.feeder_kind = net.name;
        fd.tso_bus_id = tso.attachments[f].tso_bus_id;
        fd.planned = master.planned[f];
        fd.delivered = delivered[f];
        fd.der_planned = state_map_der(net, fd.planned);

        auto inv = distflow::invert_pcc(net, fd.delivered, opts.sweep);
        fd.reachable = inv.converged;
        fd.der_realized = inv.der;
        if (inv.converged) {
            fd.violations = distflow::check_feasible(inv.solution, net);
        } else {
            fd.violations.push_back(
                {distflow::ViolationTag::kUnreachable, -1, inv.residual});
            fd.der_realized = fd.der_planned;
        }
        fd.cost = der_cost_at(net, fd.der_realized[0]);
        result.cost_total += fd.cost;
        result.cost_total += opts.reactive_weight *
                             (fd.delivered[1] * net.base_mva) *
                             (fd.delivered[1] * net.base_mva);
    }
    return result;
}

void apply_reference_gaps(DispatchResult& result, const DispatchResult& reference) {
    if (result.feeders.size() != reference.feeders.size()) {
        throw ConfigError("apply_reference_gaps: feeder count mismatch");
    }
    const double denom = std::max(std::abs(reference.cost_total), 1e-12);
    result.cost_gap = (result.cost_total - reference.cost_total) / denom;
    for (size_t f = 0; f < result.feeders.size(); ++f) {
        const double ref = std::max(std::abs(reference.feeders[f].cost), 1e-12);
        result.feeders[f].cost_gap =
            std::abs(result.feeders[f].cost - reference.feeders[f].cost) / ref;
    }
}

std::vector<double> default_price_multipliers() {
    // 7 log-spaced multipliers spanning 1/8x .. 8x of the TSO marginal price.
    std::vector<double> m(7);
    for (int i = 0; i < 7; ++i) m[i] = std::pow(2.0, i - 3);
    return m;
}

PriceSweepOptions default_price_sweep_options(const RadialNetwork& net) {
    const double demand_mw = std::max(net.total_demand_p() * net.base_mva, 1e-6);
    const double span_mw = std::max(net.der.p.hi * net.base_mva, 1e-6);
    PriceSweepOptions opts;
    opts.tso_cost = {18.0 / demand_mw, 20.0, 0.0};
    opts.der_base_cost = {18.0 / span_mw, 3.0, 0.0};
    return opts;
}

std::vector<DispatchResult> price_sweep_dispatch(const FeederSpec& feeder, Method method,
                                                 const PriceSweepOptions& opts) {
    if (feeder.polygon.empty()) {
        throw DegeneratePolygon("price sweep needs a nonempty flexibility polygon");
    }
    std::vector<double> multipliers = opts.der_price_multipliers.empty()
                                          ? default_price_multipliers()
                                          : opts.der_price_multipliers;

    // Single-bus TSO shell: one aggregate generator priced at tso_cost.
    matpower::RawCase shell;
    shell.name = "aggregate_tso";
    shell.base_mva = feeder.net.base_mva;
    shell.bus_rows.push_back({1, 3, 0.0, 0.0, 1.1, 0.9});
    shell.bus_rows.push_back({2, 1, 0.0, 0.0, 1.1, 0.9});
    shell.branch_rows.push_back({1, 2, 0.0, 1e-3, 1});
    const double span = 4.0 * std::max(1.0, feeder.net.total_demand_p()) *
                        feeder.net.base_mva;
    shell.gen_rows.push_back({1, span, -span, span, -span});
    shell.gencost_rows.push_back({2, opts.tso_cost.c2, opts.tso_cost.c1,
                                  opts.tso_cost.c0});
    std::vector<FeederAttachment> plan(1);
    plan[0].tso_bus_id = 2;
    plan[0].feeder_kind = feeder.net.name;
    TsoModel tso = build_tso_model(shell, plan);

    std::vector<DispatchResult> out;
    out.reserve(multipliers.size());
    for (double m : multipliers) {
        FeederSpec scenario = feeder;
        scenario.net.der.cost = {opts.der_base_cost.c2, opts.der_base_cost.c1 * m,
                                 opts.der_base_cost.c0};
        DispatchResult res;
        if (method == Method::kReference) {
            res = reference_search(tso, scenario, opts);
        } else {
            res = coordinate(tso, {scenario}, method, opts.coordination);
        }
        out.push_back(std::move(res));
    }
    return out;
}

PostVerifyReport post_verify(const std::vector<FeederSpec>& feeders,
                             const std::vector<Vec2>& delivered_exchanges,
                             const distflow::SweepOptions& sweep, double count_tol) {
    if (feeders.size() != delivered_exchanges.size()) {
        throw ConfigError("post_verify: exchange count mismatch");
    }
    PostVerifyReport report;
    std::map<std::string, int> tags;
    for (size_t f = 0; f < feeders.size(); ++f) {
        PostVerifyEntry entry;
        entry.feeder = static_cast<int>(f);
        auto inv = distflow::invert_pcc(feeders[f].net, delivered_exchanges[f], sweep);
        entry.reachable = inv.converged;
        entry.der = inv.der;
        entry.cost = der_cost_at(feeders[f].net, inv.der[0]);
        if (inv.converged) {
            entry.violations = distflow::check_feasible(inv.solution, feeders[f].net);
        } else {
            entry.violations.push_back(
                {distflow::ViolationTag::kUnreachable, -1, inv.residual});
        }
        for (const auto& v : entry.violations) {
            report.max_magnitude = std::max(report.max_magnitude, v.magnitude);
            if (v.magnitude > count_tol) {
                ++report.total_violations;
                ++tags[distflow::to_string(v.tag)];
            }
        }
        report.entries.push_back(std::move(entry));
    }
    report.tag_counts.assign(tags.begin(), tags.end());
    return report;
}

}  // namespace flexagg::coordination
