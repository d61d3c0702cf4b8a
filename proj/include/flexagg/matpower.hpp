#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "flexagg/network.hpp"
#include "flexagg/types.hpp"

namespace flexagg::matpower {

struct BusRow {
    int bus_id = 0;
    int type_code = 1;  // 1 PQ, 2 PV, 3 slack
    double pd_mw = 0.0;
    double qd_mvar = 0.0;
    double vmax_pu = 0.0;  // 0 means "not given"
    double vmin_pu = 0.0;
};

struct BranchRow {
    int from_bus = 0;
    int to_bus = 0;
    double r_pu = 0.0;
    double x_pu = 0.0;
    int status = 1;
};

struct GenRow {
    int bus_id = 0;
    double pmax_mw = 0.0;
    double pmin_mw = 0.0;
    double qmax_mvar = 0.0;
    double qmin_mvar = 0.0;
};

struct GenCostRow {
    int model_code = 2;  // 2 = polynomial
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
};

/// Raw image of the subset of a MATPOWER case this project consumes.
struct RawCase {
    std::string name;
    double base_mva = 0.0;
    std::vector<BusRow> bus_rows;
    std::vector<BranchRow> branch_rows;
    std::vector<GenRow> gen_rows;
    std::vector<GenCostRow> gencost_rows;
    std::vector<std::string> warnings;  // ignored nonzero shunt/tap fields etc.
};

/// Parses MATPOWER case text (`mpc.baseMVA`, `mpc.bus`, `mpc.branch`, ...).
/// Throws MalformedMatrix (with line number) or MissingSection.
RawCase parse_case(std::string_view text);

/// Reads a case file from disk and parses it.
RawCase load_case(const std::string& path);

/// Serializes back to MATPOWER case text; parse_case(serialize_case(c))
/// reproduces `c` field for field.
std::string serialize_case(const RawCase& c);

struct DerSizing {
    double fraction_p = 0.5;  // DER p bounds = +/- fraction_p * total Pd
    double fraction_q = 0.5;  // DER q bounds = +/- fraction_q * total Qd
};

/// Builds the per-unit radial network: PCC relabeled to index 0, branches in
/// parent-before-child order, one DER at the deepest leaf (lowest original
/// bus id on ties). Throws NotRadial / NoLeaf.
RadialNetwork to_radial_network(const RawCase& c, const DerSizing& sizing = {});

}  // namespace flexagg::matpower
