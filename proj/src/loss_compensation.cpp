#include "flexagg/loss_compensation.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace flexagg::loss_compensation {

Vec estimate_voltages(const RadialNetwork& net, const LossMapOptions& opts,
                      std::vector<std::string>* warnings) {
    const int m = net.n_line();
    Vec u_bus(net.n_bus);
    if (opts.estimate == VoltageEstimate::kSweep) {
        distflow::SweepOptions sweep;
        sweep.denominator = opts.denominator;
        auto sol = distflow::sweep_solve(net, Vec2::Zero(), sweep);
        u_bus = sol.u;
    } else {
        auto inc = build_incidence(net);
        auto model = lindistflow::assemble(net, inc);
        // Zero DER injection under the lossless balance means the exchange
        // equals total demand; the state map then yields the linear voltages.
        Vec2 u_total(net.total_demand_p(), net.total_demand_q());
        Vec x = lindistflow::state_at(model, u_total);
        u_bus = x.head(net.n_bus);
    }
    for (int i = 0; i < net.n_bus; ++i) {
        if (u_bus[i] < net.u_min[i] - 1e-9 || u_bus[i] > net.u_max[i] + 1e-9) {
            if (warnings) {
                warnings->push_back("zero-injection voltage at bus " +
                                    std::to_string(net.orig_bus_id[i]) +
                                    " outside its band; estimate kept");
            }
            break;
        }
    }
    Vec u_hat(m);
    for (int k = 0; k < m; ++k) u_hat[k] = u_bus[net.branches[k].from];
    return u_hat;
}

QuadLossMap build_maps(const RadialNetwork& net, const lindistflow::FlowMaps& flows,
                       const Vec& u_hat) {
    const int m = net.n_line();
    if (u_hat.size() != m) {
        throw ConfigError("build_maps: u_hat has " + std::to_string(u_hat.size()) +
                          " entries for " + std::to_string(m) + " lines");
    }
    QuadLossMap map;
    map.u_hat = u_hat;
    for (int k = 0; k < m; ++k) {
        if (!(u_hat[k] > 0)) {
            throw ConfigError("build_maps: nonpositive voltage estimate on line " +
                              std::to_string(k));
        }
        const double wp = net.branches[k].r / u_hat[k];
        const double wq = net.branches[k].x / u_hat[k];
        const Vec2 ap = flows.a_p.row(k).transpose();
        const Vec2 aq = flows.a_q.row(k).transpose();
        const double bp = flows.b_p[k];
        const double bq = flows.b_q[k];
        // w * [(ap.u + bp)^2 + (aq.u + bq)^2] contributes
        //   H += 2w(ap ap' + aq aq'), g += 2w(bp ap + bq aq), c += w(bp^2+bq^2).
        const Mat2 outer = ap * ap.transpose() + aq * aq.transpose();
        const Vec2 lin = bp * ap + bq * aq;
        const double cst = bp * bp + bq * bq;
        map.h_p += 2.0 * wp * outer;
        map.g_p += 2.0 * wp * lin;
        map.c_p += wp * cst;
        map.h_q += 2.0 * wq * outer;
        map.g_q += 2.0 * wq * lin;
        map.c_q += wq * cst;
    }
    return map;
}

QuadLossMap build_maps(const RadialNetwork& net, const lindistflow::LinDistModel& model,
                       const LossMapOptions& opts) {
    std::vector<std::string> warnings;
    Vec u_hat = estimate_voltages(net, opts, &warnings);
    QuadLossMap map = build_maps(net, lindistflow::flow_maps(model), u_hat);
    map.warnings = std::move(warnings);
    return map;
}

double p_loss(const QuadLossMap& map, const Vec2& u) {
    return 0.5 * u.dot(map.h_p * u) + map.g_p.dot(u) + map.c_p;
}

double q_loss(const QuadLossMap& map, const Vec2& u) {
    return 0.5 * u.dot(map.h_q * u) + map.g_q.dot(u) + map.c_q;
}

Vec2 compensate(const QuadLossMap& map, const Vec2& u) {
    return u + Vec2(p_loss(map, u), q_loss(map, u));
}

geometry::FlexPolygon compensate_polygon(const QuadLossMap& map,
                                         const geometry::FlexPolygon& u_lds,
                                         double max_edge) {
    if (u_lds.empty()) return u_lds;
    geometry::FlexPolygon dense = geometry::densify_boundary(u_lds, max_edge);
    geometry::FlexPolygon out;
    out.closed = dense.closed;
    out.vertices.reserve(dense.vertices.size());
    for (const auto& v : dense.vertices) out.vertices.push_back(compensate(map, v));
    return out;
}

numerics::NewtonResult pre_image(const QuadLossMap& map, const Vec2& target) {
    auto f = [&](const Vec2& u) -> Vec2 { return compensate(map, u) - target; };
    return numerics::newton_2d(f, target);
}

std::vector<double> wire_payload(const QuadLossMap& map) {
    return {map.h_p(0, 0), map.h_p(0, 1), map.h_p(1, 1), map.g_p[0], map.g_p[1],
            map.c_p,       map.h_q(0, 0), map.h_q(0, 1), map.h_q(1, 1), map.g_q[0],
            map.g_q[1],    map.c_q};
}

QuadLossMap from_wire_payload(const std::vector<double>& payload) {
    if (payload.size() != 12) {
        throw ConfigError("loss-map payload must have 12 scalars, got " +
                          std::to_string(payload.size()));
    }
    QuadLossMap map;
    map.h_p << payload[0], payload[1], payload[1], payload[2];
    map.g_p << payload[3], payload[4];
    map.c_p = payload[5];
    map.h_q << payload[6], payload[7], payload[7], payload[8];
    map.g_q << payload[9], payload[10];
    map.c_q = payload[11];
    return map;
}

std::string to_json(const QuadLossMap& map) {
    nlohmann::json j;
    j["payload"] = wire_payload(map);
    return j.dump();
}

QuadLossMap from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("payload")) throw ConfigError("loss-map JSON lacks 'payload'");
    return from_wire_payload(j["payload"].get<std::vector<double>>());
}

}  // namespace flexagg::loss_compensation
