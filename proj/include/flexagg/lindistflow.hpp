#pragma once

#include <string>
#include <utility>

#include "flexagg/geometry.hpp"
#include "flexagg/network.hpp"
#include "flexagg/types.hpp"

namespace flexagg::lindistflow {

/// Row layout of the state vector x = [U; P_l; Q_l; p_g; q_g].
struct StateIndex {
    int n_bus = 0;
    int n_line = 0;

    int u_row(int bus) const { return bus; }
    int pl_row(int line) const { return n_bus + line; }
    int ql_row(int line) const { return n_bus + n_line + line; }
    int pg_row() const { return n_bus + 2 * n_line; }
    int qg_row() const { return n_bus + 2 * n_line + 1; }
    int size() const { return n_bus + 2 * n_line + 2; }

    std::string label(int row) const;  // e.g. "U[3]", "P_l[0]", "p_g"
};

/// Linearized feeder model  A x + B u - b = 0  with u = (p_pcc, q_pcc),
/// plus the cached affine state map  x(u) = a_inv_b - a_inv_B u.
struct LinDistModel {
    StateIndex index;
    Mat a;        // size() x size()
    Mat b_cpl;    // size() x 2 coupling matrix
    Vec b_const;  // size()
    Mat a_inv_b_cpl;  // A^-1 B
    Vec a_inv_b;      // A^-1 b
    double condition_estimate = 0.0;
};

/// Per-line affine flow maps P_l(u) = a_p u + b_p, Q_l(u) = a_q u + b_q.
struct FlowMaps {
    Mat a_p;  // n_line x 2
    Vec b_p;
    Mat a_q;
    Vec b_q;
};

/// Assembles the block system and verifies invertibility by LU (throws
/// SingularMatrix otherwise).
LinDistModel assemble(const RadialNetwork& net, const Incidence& inc);

/// x(u); one cached matrix-vector product.
Vec state_at(const LinDistModel& model, const Vec2& u);

/// Per-state bounds (+/- infinity where the model places none, i.e. on the
/// line flows). Ordered like the state vector.
std::pair<Vec, Vec> state_bounds(const LinDistModel& model, const RadialNetwork& net);

FlowMaps flow_maps(const LinDistModel& model);

/// Half-space description of the flexibility set: two rows per finitely
/// bounded state plus the PCC box.
std::vector<geometry::HalfSpace> flexibility_halfspaces(const LinDistModel& model,
                                                        const RadialNetwork& net);

/// The lossless flexibility polygon (empty polygon when bounds conflict).
/// `seed_override`, when non-null, replaces the PCC-box clipping seed.
geometry::FlexPolygon flexibility_polygon(const LinDistModel& model,
                                          const RadialNetwork& net,
                                          const geometry::BoundingBox* seed_override = nullptr);

}  // namespace flexagg::lindistflow
