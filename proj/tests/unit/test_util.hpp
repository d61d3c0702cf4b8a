#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "flexagg/lindistflow.hpp"
#include "flexagg/loss_compensation.hpp"
#include "flexagg/matpower.hpp"
#include "flexagg/network.hpp"

namespace flexagg::testutil {

inline std::string data_path(const std::string& name) {
    return std::string(FLEXAGG_DATA_DIR) + "/" + name;
}

inline RadialNetwork load_net(const std::string& name, double fraction = 0.5) {
    matpower::DerSizing sizing;
    sizing.fraction_p = fraction;
    sizing.fraction_q = fraction;
    return matpower::to_radial_network(matpower::load_case(data_path(name)), sizing);
}

/// Tutorial feeder: PCC -- (r=0.01, x=0.02) -- load bus with DER.
inline RadialNetwork two_bus(double pd = 0.5, double qd = 0.2, double u_lo = 0.81,
                             double u_hi = 1.21, double der_fraction = 0.5) {
    RadialNetwork net;
    net.name = "twobus";
    net.base_mva = 1.0;
    net.n_bus = 2;
    net.branches = {{0, 1, 0.01, 0.02}};
    net.demand_p = Vec::Zero(2);
    net.demand_q = Vec::Zero(2);
    net.demand_p[1] = pd;
    net.demand_q[1] = qd;
    net.u_min = Vec::Constant(2, u_lo);
    net.u_max = Vec::Constant(2, u_hi);
    net.u_min[0] = std::min(u_lo, 1.0);
    net.u_max[0] = std::max(u_hi, 1.0);
    net.der.bus = 1;
    net.der.p = {-der_fraction * pd, der_fraction * pd};
    net.der.q = {-der_fraction * qd, der_fraction * qd};
    net.pcc_p = {-2.0 * std::abs(pd) - 1.0, 2.0 * std::abs(pd) + 1.0};
    net.pcc_q = {-2.0 * std::abs(qd) - 1.0, 2.0 * std::abs(qd) + 1.0};
    net.orig_bus_id = {1, 2};
    return net;
}

/// Closed-form DistFlow fixed point of the two-bus feeder (root voltage 1,
/// sending-end current denominator): smaller root of
///   (r^2+x^2) l^2 + (2 r p0 + 2 x q0 - 1) l + (p0^2 + q0^2) = 0
/// with p0 = pd - pg, q0 = qd - qg.
struct TwoBusExact {
    double l, p_pcc, q_pcc, u2;
};

inline TwoBusExact two_bus_exact(double pd, double qd, double pg = 0.0,
                                 double qg = 0.0, double r = 0.01, double x = 0.02) {
    const double p0 = pd - pg;
    const double q0 = qd - qg;
    const double a = r * r + x * x;
    const double b = 2.0 * r * p0 + 2.0 * x * q0 - 1.0;
    const double c = p0 * p0 + q0 * q0;
    const double l = a == 0.0 ? -c / b : (-b - std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
    TwoBusExact out;
    out.l = l;
    out.p_pcc = p0 + r * l;
    out.q_pcc = q0 + x * l;
    out.u2 = 1.0 - 2.0 * (r * out.p_pcc + x * out.q_pcc) + a * l;
    return out;
}

inline lindistflow::LinDistModel model_of(const RadialNetwork& net) {
    return lindistflow::assemble(net, build_incidence(net));
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("flexagg_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

inline int run_cli(const std::string& args) {
    const std::string cmd = std::string(FLEXAGG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

}  // namespace flexagg::testutil
