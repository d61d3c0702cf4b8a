#include "flexagg/lindistflow.hpp"

#include "flexagg/numerics.hpp"

namespace flexagg::lindistflow {

std::string StateIndex::label(int row) const {
    if (row < n_bus) return "U[" + std::to_string(row) + "]";
    if (row < n_bus + n_line) return "P_l[" + std::to_string(row - n_bus) + "]";
    if (row < n_bus + 2 * n_line) return "Q_l[" + std::to_string(row - n_bus - n_line) + "]";
    if (row == pg_row()) return "p_g";
    if (row == qg_row()) return "q_g";
    return "?[" + std::to_string(row) + "]";
}

LinDistModel assemble(const RadialNetwork& net, const Incidence& inc) {
    LinDistModel m;
    m.index = StateIndex{net.n_bus, net.n_line()};
    const int n = net.n_bus;
    const int l = net.n_line();
    const int dim = m.index.size();

    Vec r(l), x(l);
    for (int k = 0; k < l; ++k) {
        r[k] = net.branches[k].r;
        x[k] = net.branches[k].x;
    }

    m.a = Mat::Zero(dim, dim);
    m.b_cpl = Mat::Zero(dim, 2);
    m.b_const = Vec::Zero(dim);

    // Row 0: pin the PCC squared voltage to 1.
    m.a.block(0, 0, 1, n) = inc.e1.transpose();
    m.b_const[0] = 1.0;

    // Rows 1..l: voltage drop along each line, C U - 2R P_l - 2X Q_l = 0.
    m.a.block(1, 0, l, n) = inc.c;
    m.a.block(1, n, l, l) = -2.0 * r.asDiagonal().toDenseMatrix();
    m.a.block(1, n + l, l, l) = -2.0 * x.asDiagonal().toDenseMatrix();

    // Rows 1+l .. l+n: active balance, -C' P_l + C_g p_g + e1 p_pcc = P_d.
    const int pa = 1 + l;
    m.a.block(pa, n, n, l) = -inc.c.transpose();
    m.a.block(pa, n + 2 * l, n, 1) = inc.c_gen;
    m.b_cpl.block(pa, 0, n, 1) = inc.e1;
    m.b_const.segment(pa, n) = net.demand_p;

    // Rows 1+l+n .. end: reactive balance.
    const int qa = 1 + l + n;
    m.a.block(qa, n + l, n, l) = -inc.c.transpose();
    m.a.block(qa, n + 2 * l + 1, n, 1) = inc.c_gen;
    m.b_cpl.block(qa, 1, n, 1) = inc.e1;
    m.b_const.segment(qa, n) = net.demand_q;

    Mat rhs(dim, 3);
    rhs.leftCols(2) = m.b_cpl;
    rhs.col(2) = m.b_const;
    auto solved = numerics::lu_solve(m.a, rhs);
    m.a_inv_b_cpl = solved.x.leftCols(2);
    m.a_inv_b = solved.x.col(2);
    m.condition_estimate = solved.condition_estimate;
    return m;
}

Vec state_at(const LinDistModel& model, const Vec2& u) {
    return model.a_inv_b - model.a_inv_b_cpl * u;
}

std::pair<Vec, Vec> state_bounds(const LinDistModel& model, const RadialNetwork& net) {
    const auto& ix = model.index;
    Vec lo = Vec::Constant(ix.size(), -kInf);
    Vec hi = Vec::Constant(ix.size(), kInf);
    for (int i = 0; i < ix.n_bus; ++i) {
        lo[ix.u_row(i)] = net.u_min[i];
        hi[ix.u_row(i)] = net.u_max[i];
    }
    lo[ix.pg_row()] = net.der.p.lo;
    hi[ix.pg_row()] = net.der.p.hi;
    lo[ix.qg_row()] = net.der.q.lo;
    hi[ix.qg_row()] = net.der.q.hi;
    return {lo, hi};
}

FlowMaps flow_maps(const LinDistModel& model) {
    const auto& ix = model.index;
    FlowMaps f;
    f.a_p = -model.a_inv_b_cpl.middleRows(ix.pl_row(0), ix.n_line);
    f.b_p = model.a_inv_b.segment(ix.pl_row(0), ix.n_line);
    f.a_q = -model.a_inv_b_cpl.middleRows(ix.ql_row(0), ix.n_line);
    f.b_q = model.a_inv_b.segment(ix.ql_row(0), ix.n_line);
    return f;
}

std::vector<geometry::HalfSpace> flexibility_halfspaces(const LinDistModel& model,
                                                        const RadialNetwork& net) {
    auto [lo, hi] = state_bounds(model, net);
    std::vector<geometry::HalfSpace> out;
    const int dim = model.index.size();
    out.reserve(2 * dim + 4);
    for (int i = 0; i < dim; ++i) {
        const Vec2 mi = model.a_inv_b_cpl.row(i).transpose();
        const double offset_i = model.a_inv_b[i];
        // x_i(u) = offset_i - mi . u, want lo <= x_i(u) <= hi.
        if (mi.cwiseAbs().maxCoeff() < 1e-14) {
            // Constant state: either always inside its band or never.
            if (offset_i > hi[i] + 1e-12 || offset_i < lo[i] - 1e-12) {
                out.push_back({Vec2(1.0, 0.0), -1e30});  // empties the clip
            }
            continue;
        }
        if (std::isfinite(hi[i])) out.push_back({-mi, hi[i] - offset_i});
        if (std::isfinite(lo[i])) out.push_back({mi, offset_i - lo[i]});
    }
    out.push_back({Vec2(1.0, 0.0), net.pcc_p.hi});
    out.push_back({Vec2(-1.0, 0.0), -net.pcc_p.lo});
    out.push_back({Vec2(0.0, 1.0), net.pcc_q.hi});
    out.push_back({Vec2(0.0, -1.0), -net.pcc_q.lo});
    return out;
}

geometry::FlexPolygon flexibility_polygon(const LinDistModel& model,
                                          const RadialNetwork& net,
                                          const geometry::BoundingBox* seed_override) {
    geometry::BoundingBox seed{net.pcc_p, net.pcc_q};
    if (seed_override) seed = *seed_override;
    auto hs = flexibility_halfspaces(model, net);
    return geometry::intersect_halfspaces(hs, seed);
}

}  // namespace flexagg::lindistflow
