#pragma once

#include <span>
#include <string>
#include <vector>

#include "flexagg/geometry.hpp"
#include "flexagg/network.hpp"
#include "flexagg/types.hpp"

namespace flexagg::distflow {

/// Denominator of the squared-current update l = (P^2 + Q^2) / denom.
enum class Denominator {
    kSendingEnd,  // U at the sending bus (default)
    kDifference,  // U_from - U_to (literal matrix-form reading, audit only)
};

struct SweepOptions {
    Denominator denominator = Denominator::kSendingEnd;
    double tol = 1e-10;
    int max_iterations = 100;
};

struct PowerFlowSolution {
    Vec u;    // squared voltages per bus, p.u.^2
    Vec p_l;  // sending-end active flows per line, p.u.
    Vec q_l;
    Vec l;    // squared currents per line, p.u.
    double p_pcc = 0.0;
    double q_pcc = 0.0;
    double der_p = 0.0;  // DER setpoint the solve was run at
    double der_q = 0.0;
    double residual = 0.0;  // max DistFlow equation violation
    int iterations = 0;
    bool converged = false;

    double loss_p(const RadialNetwork& net) const;  // R' L
    double loss_q(const RadialNetwork& net) const;  // X' L
};

/// Forward-backward sweep at a fixed DER setpoint. Non-convergence is
/// reported in the result; see sweep_solve for the throwing variant.
PowerFlowSolution try_sweep_solve(const RadialNetwork& net, const Vec2& der,
                                  const SweepOptions& opts = {});

/// As try_sweep_solve but throws NoConvergence (with the last residual in
/// the message) when the iteration diverges or hits the cap.
PowerFlowSolution sweep_solve(const RadialNetwork& net, const Vec2& der,
                              const SweepOptions& opts = {});

enum class ViolationTag {
    kVoltageLow,
    kVoltageHigh,
    kPccP,
    kPccQ,
    kDerP,
    kDerQ,
    kUnreachable,  // exchange target no power flow can realize
};

std::string to_string(ViolationTag tag);

struct Violation {
    ViolationTag tag;
    int index = -1;      // bus or line id (internal), -1 when not applicable
    double magnitude = 0.0;
};

/// Bound checks on a converged solution; empty list means feasible.
std::vector<Violation> check_feasible(const PowerFlowSolution& sol,
                                      const RadialNetwork& net, double tol = 1e-9);

struct CloudSample {
    Vec2 der = Vec2::Zero();
    Vec2 exchange = Vec2::Zero();
    bool converged = false;
    bool feasible = false;
    std::vector<Violation> violations;
    int iterations = 0;
    double residual = 0.0;
};

struct ExactFlexCloud {
    std::vector<CloudSample> samples;      // row-major over the DER grid
    geometry::FlexPolygon hull;            // convex hull of feasible exchanges
    int grid_p = 0;                        // grid points along the DER p axis
    int grid_q = 0;
};

/// Exact flexibility oracle: sweep-solves a resolution x resolution DER grid
/// (axes with zero-width bounds collapse to one point), classifies each
/// sample, and hulls the feasible exchange points. Per-point failures are
/// data, not errors. Deterministic regardless of `threads`.
ExactFlexCloud exact_flex_cloud(const RadialNetwork& net, int resolution,
                                const SweepOptions& opts = {}, int threads = 0);

/// Andrew monotone-chain convex hull (counter-clockwise).
geometry::FlexPolygon convex_hull(std::span<const Vec2> points);

struct InvertResult {
    Vec2 der = Vec2::Zero();
    PowerFlowSolution solution;
    bool converged = false;
    double residual = kInf;  // ||exchange(der) - target||_inf
};

/// Newton inversion of der -> exchange; recovers the DER setpoint that
/// realizes `target` at the PCC. Non-convergence (unreachable target) is
/// reported in the result together with the best iterate.
InvertResult invert_pcc(const RadialNetwork& net, const Vec2& target,
                        const SweepOptions& opts = {}, double tol = 1e-8);

}  // namespace flexagg::distflow
