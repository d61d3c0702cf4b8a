#pragma once

#include <string>
#include <vector>

#include "flexagg/distflow.hpp"
#include "flexagg/geometry.hpp"
#include "flexagg/lindistflow.hpp"
#include "flexagg/network.hpp"
#include "flexagg/numerics.hpp"
#include "flexagg/types.hpp"

namespace flexagg::loss_compensation {

/// Quadratic loss maps
///   p_loss(u) = 1/2 u'H_p u + g_p'u + c_p,
///   q_loss(u) = 1/2 u'H_q u + g_q'u + c_q.
/// The 12 scalars (H_p, g_p, c_p, H_q, g_q, c_q) are the only values a DSO
/// ships besides the polygon; u_hat stays local.
struct QuadLossMap {
    Mat2 h_p = Mat2::Zero();
    Vec2 g_p = Vec2::Zero();
    double c_p = 0.0;
    Mat2 h_q = Mat2::Zero();
    Vec2 g_q = Vec2::Zero();
    double c_q = 0.0;
    Vec u_hat;  // per-line squared-voltage estimates used in construction
    std::vector<std::string> warnings;
};

enum class VoltageEstimate {
    kSweep,        // DistFlow sweep at zero injection (default)
    kLinDistFlow,  // linear state map at zero injection (ablation)
};

struct LossMapOptions {
    VoltageEstimate estimate = VoltageEstimate::kSweep;
    distflow::Denominator denominator = distflow::Denominator::kSendingEnd;
};

/// Per-line squared-voltage estimates at p_g = q_g = 0, frozen for all u.
/// When the zero-injection state violates voltage bounds a warning is
/// appended to `warnings` (if given) and the estimate is used regardless.
Vec estimate_voltages(const RadialNetwork& net, const LossMapOptions& opts = {},
                      std::vector<std::string>* warnings = nullptr);

/// Exact symbolic expansion of the per-line quadratic losses into the
/// aggregate 12-coefficient form; no fitting involved.
QuadLossMap build_maps(const RadialNetwork& net, const lindistflow::FlowMaps& flows,
                       const Vec& u_hat);

/// Convenience: estimate voltages, take flow maps, expand.
QuadLossMap build_maps(const RadialNetwork& net, const lindistflow::LinDistModel& model,
                       const LossMapOptions& opts = {});

double p_loss(const QuadLossMap& map, const Vec2& u);
double q_loss(const QuadLossMap& map, const Vec2& u);

/// u + (p_loss(u), q_loss(u)).
Vec2 compensate(const QuadLossMap& map, const Vec2& u);

/// Image of the polygon boundary under `compensate`, densified so the image
/// resolves curvature. The image need not be convex and is not re-hulled.
geometry::FlexPolygon compensate_polygon(const QuadLossMap& map,
                                         const geometry::FlexPolygon& u_lds,
                                         double max_edge);

/// Newton pre-image of `target` under (id + loss); membership in the
/// compensated set means the pre-image lies in the lossless polygon.
numerics::NewtonResult pre_image(const QuadLossMap& map, const Vec2& target);

/// Exactly 12 scalars, fixed order:
/// Hp00 Hp01 Hp11 gp0 gp1 cp Hq00 Hq01 Hq11 gq0 gq1 cq.
std::vector<double> wire_payload(const QuadLossMap& map);
QuadLossMap from_wire_payload(const std::vector<double>& payload);

std::string to_json(const QuadLossMap& map);
QuadLossMap from_json(const std::string& text);

}  // namespace flexagg::loss_compensation
