#pragma once

#include <string>
#include <vector>

#include "flexagg/types.hpp"

namespace flexagg {

struct Branch {
    int from = 0;  // parent bus (0-based internal index)
    int to = 0;    // child bus
    double r = 0.0;  // p.u. resistance
    double x = 0.0;  // p.u. reactance
};

struct QuadCost {
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;

    double eval(double p) const { return (c2 * p + c1) * p + c0; }
};

struct Der {
    int bus = 0;
    Interval p;  // p.u. active injection bounds
    Interval q;  // p.u. reactive injection bounds
    QuadCost cost;
};

/// Radial feeder in per-unit. Internally buses are 0-based with the PCC at
/// index 0 and branches ordered parent-before-child; `orig_bus_id` maps back
/// to the source file's numbering.
struct RadialNetwork {
    std::string name;
    double base_mva = 1.0;
    int n_bus = 0;
    std::vector<Branch> branches;  // n_bus - 1 entries, topological order
    Vec demand_p;                  // per bus, p.u.
    Vec demand_q;
    Vec u_min;  // squared-voltage bounds, p.u.^2
    Vec u_max;
    Der der;
    Interval pcc_p;  // exchange bounds at the PCC, p.u.
    Interval pcc_q;
    std::vector<int> orig_bus_id;
    std::vector<std::string> warnings;

    int pcc_bus() const { return 0; }
    int n_line() const { return static_cast<int>(branches.size()); }
    double total_demand_p() const { return demand_p.sum(); }
    double total_demand_q() const { return demand_q.sum(); }
};

/// Result of the radiality check. `ok()` implies `branch_order` is a valid
/// parent-before-child ordering of branch indices rooted at the PCC.
struct RadialCheck {
    bool connected = true;
    bool acyclic = true;
    bool count_ok = true;                // n_bus == n_line + 1
    std::vector<int> offending_buses;    // unreachable or on a cycle
    std::vector<int> branch_order;       // indices into net.branches
    std::string message;

    bool ok() const { return connected && acyclic && count_ok; }
};

/// Checks connectedness, acyclicity and the bus/line count identity; on
/// success returns a topological branch ordering rooted at the PCC.
RadialCheck validate_radial(const RadialNetwork& net);

/// Connectivity matrices of the branch graph.
struct Incidence {
    Mat c_from;  // n_line x n_bus, 1 at sending bus
    Mat c_to;    // n_line x n_bus, 1 at receiving bus
    Mat c;       // c_from - c_to
    Mat c_gen;   // n_bus x 1, 1 at the DER bus
    Vec e1;      // n_bus, unit selector of the PCC
};

/// Builds the incidence matrices; requires a validated radial net.
Incidence build_incidence(const RadialNetwork& net);

}  // namespace flexagg
