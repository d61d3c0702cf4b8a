#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flexagg/distflow.hpp"
#include "flexagg/geometry.hpp"
#include "flexagg/loss_compensation.hpp"
#include "flexagg/matpower.hpp"
#include "flexagg/network.hpp"
#include "flexagg/types.hpp"

namespace flexagg::coordination {

enum class Method { kReference, kLds, kSlc };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct DcLine {
    int from = 0;  // 0-based TSO bus index
    int to = 0;
    double susceptance = 0.0;  // 1/x, p.u.
    double flow_limit = kInf;  // p.u.; infinity = unconstrained
};

struct TsoGenerator {
    int bus = 0;
    Interval p;  // p.u.
    QuadCost cost;
};

struct FeederAttachment {
    int tso_bus = 0;         // 0-based internal index
    int tso_bus_id = 0;      // original case numbering
    std::string feeder_kind; // template case name, e.g. "case33mg"
};

/// DC transmission model plus the feeder attachment plan.
struct TsoModel {
    int n_bus = 0;
    int slack_bus = 0;
    std::vector<DcLine> lines;
    std::vector<TsoGenerator> generators;
    Vec demand_p;  // p.u.; zeroed at attachment buses (feeder replaces load)
    double base_mva = 100.0;
    std::vector<FeederAttachment> attachments;
    std::vector<int> orig_bus_id;
};

/// Thresholds in MW on the original bus demand.
struct AttachThresholds {
    double low = 5.0;
    double high = 15.0;
};

/// Feeder assignment for every non-slack bus of the transmission case:
/// Pd > high -> the large feeder, low <= Pd <= high -> the medium one,
/// Pd < low (including zero) -> the small one. Deterministic by bus id.
std::vector<FeederAttachment> attach_feeders(const matpower::RawCase& tso_case,
                                             const AttachThresholds& thresholds = {});

TsoModel build_tso_model(const matpower::RawCase& tso_case,
                         std::vector<FeederAttachment> attachments);

/// Everything a DSO publishes for coordination, plus (oracle side) the
/// network itself for reference dispatch and post-verification.
struct FeederSpec {
    RadialNetwork net;
    geometry::FlexPolygon polygon;            // lossless flexibility set
    std::vector<geometry::HalfSpace> facets;  // half-space form of the polygon
    loss_compensation::QuadLossMap loss;
    distflow::ExactFlexCloud cloud;           // exact oracle samples
};

struct CoordinationOptions {
    double fixed_point_tol = 1e-8;
    int fixed_point_cap = 20;
    double reactive_weight = 0.05;  // interface penalty w_q * q_pcc^2 (TSO p.u.)
    distflow::SweepOptions sweep;
};

struct FeederDispatch {
    std::string feeder_kind;
    int tso_bus_id = 0;
    Vec2 planned = Vec2::Zero();    // u_lds decided by the master problem (feeder p.u.)
    Vec2 delivered = Vec2::Zero();  // exchange the TSO accounts for (feeder p.u.)
    Vec2 der_planned = Vec2::Zero();   // state-map DER setpoint at `planned`
    Vec2 der_realized = Vec2::Zero();  // post-verification inversion result
    double cost = 0.0;       // DER cost at the realized setpoint
    double cost_gap = 0.0;   // |cost - cost_ref| / max(|cost_ref|, eps)
    std::vector<distflow::Violation> violations;  // post-verification
    bool reachable = true;
};

struct DispatchResult {
    Method method = Method::kLds;
    std::vector<FeederDispatch> feeders;
    Vec generator_p;        // TSO generator outputs, p.u.
    double cost_total = 0.0;   // realized total (TSO gens + DERs + q penalty)
    double cost_gap = 0.0;     // (f - f*) / f* against the reference run
    int fixed_point_iterations = 0;
    double fixed_point_gap = 0.0;
};

/// Joint TSO dispatch over the aggregated feeder sets. The convex master QP
/// decides generator outputs and per-feeder lossless exchanges; slc and
/// reference wrap it in a loss fixed-point loop (quadratic map vs exact
/// power flow). Throws Infeasible / FixedPointStall.
DispatchResult coordinate(const TsoModel& tso, const std::vector<FeederSpec>& feeders,
                          Method method, const CoordinationOptions& opts = {});

struct PriceSweepOptions {
    QuadCost tso_cost{2.0, 10.0, 0.0};
    std::vector<double> der_price_multipliers;  // scale factors on tso c1
    QuadCost der_base_cost{1.0, 10.0, 0.0};     // c1 scaled per scenario
    CoordinationOptions coordination;
    int reference_resolution = 101;  // exact-cloud grid for reference search
};

std::vector<double> default_price_multipliers();  // 7 log-spaced, 1/8 .. 8

/// Demand-normalized sweep economics: the TSO quadratic term scales with
/// 1/total demand and the DER term with 1/DER span, so every feeder traces
/// the same operating-fraction profile across the multiplier range and the
/// DER optimum stays interior at both sweep extremes.
PriceSweepOptions default_price_sweep_options(const RadialNetwork& net);

/// Single-feeder dispatch across a DER price sweep. One DispatchResult per
/// price, post-verified. Reference scenarios use dense search over the
/// exact cloud with a local refinement pass.
std::vector<DispatchResult> price_sweep_dispatch(const FeederSpec& feeder,
                                                 Method method,
                                                 const PriceSweepOptions& opts = {});

/// Fills per-feeder and total cost gaps of `result` against a reference run
/// of the same scenario (matching feeder order required).
void apply_reference_gaps(DispatchResult& result, const DispatchResult& reference);

struct PostVerifyEntry {
    int feeder = 0;
    Vec2 der = Vec2::Zero();
    double cost = 0.0;
    std::vector<distflow::Violation> violations;
    bool reachable = true;
};

struct PostVerifyReport {
    std::vector<PostVerifyEntry> entries;
    std::vector<std::pair<std::string, int>> tag_counts;  // sorted by tag name
    int total_violations = 0;
    double max_magnitude = 0.0;
};

/// Recovers every feeder's internal state from its fixed delivered exchange
/// and aggregates constraint violations by tag.
PostVerifyReport post_verify(const std::vector<FeederSpec>& feeders,
                             const std::vector<Vec2>& delivered_exchanges,
                             const distflow::SweepOptions& sweep = {},
                             double count_tol = 1e-3);

}  // namespace flexagg::coordination
