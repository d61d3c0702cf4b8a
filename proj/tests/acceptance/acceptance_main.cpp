// Acceptance gate: one line per criterion, exit code = number of failures.
// Tolerances are pinned here and nowhere else.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "flexagg/coordination.hpp"
#include "flexagg/distflow.hpp"
#include "flexagg/geometry.hpp"
#include "flexagg/io.hpp"
#include "flexagg/lindistflow.hpp"
#include "flexagg/loss_compensation.hpp"
#include "flexagg/matpower.hpp"
#include "flexagg/network.hpp"

using namespace flexagg;
using Clock = std::chrono::steady_clock;

namespace {

const std::vector<std::string> kCases = {"case10ba.m", "case33mg.m", "case118zh.m"};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string data_path(const std::string& name) {
    return std::string(FLEXAGG_DATA_DIR) + "/" + name;
}

RadialNetwork load_net(const std::string& name) {
    matpower::DerSizing sizing;  // default 0.5 / 0.5
    return matpower::to_radial_network(matpower::load_case(data_path(name)), sizing);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Shared across criteria: every converged power-flow solution produced by
// this run, for the conservation gate.
struct SolutionStats {
    double max_residual = 0.0;
    long count = 0;

    void record(const distflow::PowerFlowSolution& sol) {
        if (!sol.converged) return;
        ++count;
        max_residual = std::max(max_residual, sol.residual);
    }
    void record(const distflow::CloudSample& s) {
        if (!s.converged) return;
        ++count;
        max_residual = std::max(max_residual, s.residual);
    }
};
SolutionStats g_solutions;

// Cached per-case artifacts so later criteria reuse earlier work.
struct CaseBundle {
    RadialNetwork net;
    lindistflow::LinDistModel model;
    geometry::FlexPolygon polygon;
    loss_compensation::QuadLossMap loss;
    distflow::ExactFlexCloud grid21;
};
std::map<std::string, CaseBundle> g_bundle;

CaseBundle& bundle(const std::string& name) {
    auto it = g_bundle.find(name);
    if (it != g_bundle.end()) return it->second;
    CaseBundle b;
    b.net = load_net(name);
    b.model = lindistflow::assemble(b.net, build_incidence(b.net));
    b.polygon = lindistflow::flexibility_polygon(b.model, b.net);
    b.loss = loss_compensation::build_maps(b.net, b.model);
    b.grid21 = distflow::exact_flex_cloud(b.net, 21);
    for (const auto& s : b.grid21.samples) g_solutions.record(s);
    return g_bundle.emplace(name, std::move(b)).first->second;
}

coordination::FeederSpec feeder_spec(const CaseBundle& b, int cloud_resolution = 0) {
    coordination::FeederSpec spec;
    spec.net = b.net;
    spec.polygon = b.polygon;
    spec.facets = geometry::polygon_facets(b.polygon);
    spec.loss = b.loss;
    if (cloud_resolution > 1) {
        spec.cloud = distflow::exact_flex_cloud(b.net, cloud_resolution);
        for (const auto& s : spec.cloud.samples) g_solutions.record(s);
    }
    return spec;
}

Outcome criterion_radiality() {
    Outcome out;
    std::string detail;
    for (const auto& name : kCases) {
        const auto t0 = Clock::now();
        auto& b = bundle(name);
        if (b.net.n_bus != b.net.n_line() + 1)
            return {false, name + ": n_bus != n_line + 1"};
        if (!std::isfinite(b.model.condition_estimate))
            return {false, name + ": A not invertible"};
        const double dt = seconds_since(t0);
        if (dt >= 1.0 && !detail.empty())  // first call pays the grid21 cache
            return {false, name + " took " + fmt(dt) + " s"};
        detail += (detail.empty() ? "" : ", ") + std::to_string(b.net.n_bus) + " buses";
    }
    return {true, "n = m + 1 and A invertible for all cases (" + detail + ")"};
}

Outcome criterion_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int k = 1; k <= 20; ++k) {
        const double pd = 0.05 * k;
        const double qd = 0.4 * pd;
        RadialNetwork net;
        net.name = "twobus";
        net.n_bus = 2;
        net.branches = {{0, 1, 0.01, 0.02}};
        net.demand_p = Vec::Zero(2);
        net.demand_q = Vec::Zero(2);
        net.demand_p[1] = pd;
        net.demand_q[1] = qd;
        net.u_min = Vec::Constant(2, 0.5);
        net.u_max = Vec::Constant(2, 1.5);
        net.der.bus = 1;
        net.orig_bus_id = {1, 2};

        // Independent closed form: smaller root of the scalar quadratic in l.
        const double r = 0.01, x = 0.02;
        const double a = r * r + x * x;
        const double bq = 2.0 * r * pd + 2.0 * x * qd - 1.0;
        const double c = pd * pd + qd * qd;
        const double l = (-bq - std::sqrt(bq * bq - 4.0 * a * c)) / (2.0 * a);
        const double p_ref = pd + r * l;
        const double q_ref = qd + x * l;
        const double u2_ref = 1.0 - 2.0 * (r * p_ref + x * q_ref) + a * l;

        auto sol = distflow::sweep_solve(net, Vec2::Zero());
        g_solutions.record(sol);
        worst = std::max({worst, std::abs(sol.p_pcc - p_ref), std::abs(sol.q_pcc - q_ref),
                          std::abs(sol.u[1] - u2_ref), std::abs(sol.l[0] - l)});
        if (k == 10) {  // tutorial load (0.5, 0.2)
            if (std::abs(sol.p_pcc - 0.50295) > 1e-5)
                return {false, "tutorial p_pcc = " + fmt(sol.p_pcc)};
        }
    }
    const double dt = seconds_since(t0);
    if (worst > 1e-10) return {false, "max closed-form deviation " + fmt(worst)};
    if (dt >= 0.1) return {false, "sweep took " + fmt(dt) + " s"};
    return {true, "20-point sweep matches closed form to " + fmt(worst)};
}

Outcome criterion_conservation() {
    if (g_solutions.count == 0) return {false, "no solutions collected"};
    if (g_solutions.max_residual > 1e-8)
        return {false, "max residual " + fmt(g_solutions.max_residual) + " over " +
                           std::to_string(g_solutions.count) + " solutions"};
    return {true, "max residual " + fmt(g_solutions.max_residual) + " over " +
                      std::to_string(g_solutions.count) + " converged solutions"};
}

Outcome criterion_loss_positivity() {
    double min_rtl = kInf, min_xtl = kInf, max_mismatch = 0.0;
    for (const auto& name : kCases) {
        auto& b = bundle(name);
        const double dp = b.net.total_demand_p();
        const double dq = b.net.total_demand_q();
        for (const auto& s : b.grid21.samples) {
            if (!s.converged) continue;
            auto sol = distflow::try_sweep_solve(b.net, s.der);
            if (!sol.converged) continue;
            g_solutions.record(sol);
            const double rtl = sol.loss_p(b.net);
            const double xtl = sol.loss_q(b.net);
            min_rtl = std::min(min_rtl, rtl);
            min_xtl = std::min(min_xtl, xtl);
            max_mismatch = std::max(
                {max_mismatch, std::abs(sol.p_pcc - (dp - s.der[0]) - rtl),
                 std::abs(sol.q_pcc - (dq - s.der[1]) - xtl)});
        }
    }
    if (min_rtl < -1e-10 || min_xtl < -1e-10)
        return {false, "loss negative: R'L " + fmt(min_rtl) + ", X'L " + fmt(min_xtl)};
    if (max_mismatch > 1e-8)
        return {false, "PCC accumulation mismatch " + fmt(max_mismatch)};
    return {true, "min R'L " + fmt(min_rtl) + ", min X'L " + fmt(min_xtl) +
                      ", accumulation error " + fmt(max_mismatch)};
}

Outcome criterion_compensation() {
    std::string detail;
    for (const auto& name : kCases) {
        const auto t0 = Clock::now();
        auto& b = bundle(name);
        auto cloud = distflow::exact_flex_cloud(b.net, 101);
        for (const auto& s : cloud.samples) g_solutions.record(s);

        const double dp = b.net.total_demand_p();
        const double dq = b.net.total_demand_q();
        double sum_lds = 0.0, sum_slc = 0.0;
        long n = 0;
        for (const auto& s : b.grid21.samples) {
            if (!s.converged) continue;
            const Vec2 u_lds(dp - s.der[0], dq - s.der[1]);
            const Vec2 u_exact = s.exchange;
            sum_lds += (u_lds - u_exact).norm();
            sum_slc += (loss_compensation::compensate(b.loss, u_lds) - u_exact).norm();
            ++n;
        }
        const double mean_lds = sum_lds / n;
        const double mean_slc = sum_slc / n;
        if (!(mean_slc < mean_lds))
            return {false, name + ": mean error " + fmt(mean_slc) + " !< " + fmt(mean_lds)};

        auto u_slc = loss_compensation::compensate_polygon(b.loss, b.polygon, 0.01);
        auto hull_pts = geometry::boundary_points(cloud.hull, 0.01);
        const double h_slc = geometry::polygon_metrics(u_slc, hull_pts).hausdorff;
        const double h_lds = geometry::polygon_metrics(b.polygon, hull_pts).hausdorff;
        if (!(h_slc < h_lds))
            return {false, name + ": Hausdorff " + fmt(h_slc) + " !< " + fmt(h_lds)};

        const double dt = seconds_since(t0);
        if (dt >= 30.0) return {false, name + " took " + fmt(dt) + " s"};
        detail += (detail.empty() ? "" : "; ") + name.substr(0, name.size() - 2) + " " +
                  fmt(mean_lds / mean_slc) + "x, Hausdorff " + fmt(h_lds) + " -> " +
                  fmt(h_slc);
    }
    return {true, detail};
}

Outcome criterion_price_split() {
    std::string detail;
    for (const auto& name : kCases) {
        auto& b = bundle(name);
        auto spec = feeder_spec(b);
        auto popts = coordination::default_price_sweep_options(b.net);
        popts.der_price_multipliers = coordination::default_price_multipliers();

        auto lds = coordination::price_sweep_dispatch(spec, coordination::Method::kLds,
                                                      popts);
        auto slc = coordination::price_sweep_dispatch(spec, coordination::Method::kSlc,
                                                      popts);
        int lds_bad_scenarios = 0;
        for (const auto& res : lds) {
            int count = 0;
            for (const auto& v : res.feeders.at(0).violations)
                if (v.magnitude > 1e-3) ++count;
            if (count > 0) ++lds_bad_scenarios;
        }
        double slc_max = 0.0;
        for (const auto& res : slc) {
            if (!res.feeders.at(0).reachable) slc_max = kInf;
            for (const auto& v : res.feeders.at(0).violations)
                slc_max = std::max(slc_max, v.magnitude);
        }
        if (lds_bad_scenarios == 0)
            return {false, name + ": lds never violates across the sweep"};
        if (slc_max > 1e-3)
            return {false, name + ": slc violation " + fmt(slc_max) + " > 1e-3"};
        detail += (detail.empty() ? "" : "; ") + name.substr(0, name.size() - 2) +
                  " lds " + std::to_string(lds_bad_scenarios) + "/7, slc max " +
                  fmt(slc_max);
    }
    return {true, detail};
}

Outcome criterion_attachments() {
    const auto t0 = Clock::now();
    auto tso_case = matpower::load_case(data_path("case30.m"));
    auto attachments = coordination::attach_feeders(tso_case, {5.0, 15.0});
    std::map<std::string, int> counts;
    for (const auto& a : attachments) ++counts[a.feeder_kind];
    const double dt = seconds_since(t0);
    if (attachments.size() != 29)
        return {false, std::to_string(attachments.size()) + " feeders"};
    if (counts["case10ba"] != 9 || counts["case33mg"] != 16 || counts["case118zh"] != 4)
        return {false, "split " + std::to_string(counts["case10ba"]) + "/" +
                           std::to_string(counts["case33mg"]) + "/" +
                           std::to_string(counts["case118zh"])};
    if (dt >= 1.0) return {false, "took " + fmt(dt) + " s"};
    return {true, "29 feeders split 9/16/4"};
}

Outcome criterion_coordination() {
    const auto t0 = Clock::now();
    auto tso_case = matpower::load_case(data_path("case30.m"));
    auto model = coordination::build_tso_model(
        tso_case, coordination::attach_feeders(tso_case, {5.0, 15.0}));

    std::map<std::string, coordination::FeederSpec> templates;
    for (const auto& att : model.attachments) {
        if (templates.count(att.feeder_kind)) continue;
        auto& b = bundle(att.feeder_kind + ".m");
        auto spec = feeder_spec(b);
        const double span_mw = spec.net.der.p.hi * spec.net.base_mva;
        spec.net.der.cost = {1.0 / std::max(span_mw, 1e-6), 2.5, 0.0};
        templates.emplace(att.feeder_kind, std::move(spec));
    }
    std::vector<coordination::FeederSpec> feeders;
    for (const auto& att : model.attachments)
        feeders.push_back(templates.at(att.feeder_kind));

    coordination::CoordinationOptions copts;
    auto ref = coordination::coordinate(model, feeders, coordination::Method::kReference,
                                        copts);
    auto lds = coordination::coordinate(model, feeders, coordination::Method::kLds, copts);
    auto slc = coordination::coordinate(model, feeders, coordination::Method::kSlc, copts);
    coordination::apply_reference_gaps(lds, ref);
    coordination::apply_reference_gaps(slc, ref);

    int lds_count = 0, slc_count = 0;
    std::map<std::string, int> lds_tags;
    for (size_t f = 0; f < feeders.size(); ++f) {
        const auto& fl = lds.feeders[f];
        const auto& fs = slc.feeders[f];
        if (fs.cost_gap > fl.cost_gap + 1e-12)
            return {false, "feeder " + std::to_string(f) + " slc gap " +
                               fmt(fs.cost_gap) + " > lds gap " + fmt(fl.cost_gap)};
        if (fl.feeder_kind == "case33mg" && !(fs.cost_gap < fl.cost_gap))
            return {false, "case33mg feeder " + std::to_string(f) +
                               " not strictly improved"};
        for (const auto& v : fl.violations)
            if (v.magnitude > 1e-3) {
                ++lds_count;
                ++lds_tags[distflow::to_string(v.tag)];
            }
        for (const auto& v : fs.violations)
            if (v.magnitude > 1e-3) ++slc_count;
    }
    if (slc_count != 0) return {false, "slc violations: " + std::to_string(slc_count)};
    if (lds_count < 1) return {false, "lds reports no violations"};
    std::string top_tag;
    int top = 0;
    for (const auto& [tag, n] : lds_tags)
        if (n > top) {
            top = n;
            top_tag = tag;
        }
    if (top_tag != "der-q" && top_tag != "pcc-q")
        return {false, "most frequent lds tag is " + top_tag};
    const double dt = seconds_since(t0);
    if (dt >= 300.0) return {false, "took " + fmt(dt) + " s"};
    return {true, "slc 0 violations, lds " + std::to_string(lds_count) + " (top " +
                      top_tag + "), gaps ordered, " + fmt(dt) + " s"};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FLEXAGG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc < 0 ? rc : WEXITSTATUS(rc);
}

Outcome criterion_determinism() {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "flexagg_acceptance";
    fs::remove_all(base);
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"aggregate --case " + data_path("case33mg.m") +
             " --resolution 41 --export-cloud --prices 0.125,1,8 --out ",
         "agg"},
        {"coordinate --case " + data_path("case30.m") + " --out ", "coord"},
    };
    for (const auto& [cmd, tag] : runs) {
        const fs::path d1 = base / (tag + "_1");
        const fs::path d2 = base / (tag + "_2");
        if (run_cli(cmd + d1.string()) != 0 || run_cli(cmd + d2.string()) != 0)
            return {false, tag + " run failed"};
        for (const auto& entry : fs::directory_iterator(d1)) {
            if (entry.path().extension() != ".csv") continue;
            const auto twin = d2 / entry.path().filename();
            if (!fs::exists(twin)) return {false, twin.filename().string() + " missing"};
            if (io::read_file(entry.path().string()) != io::read_file(twin.string()))
                return {false, entry.path().filename().string() + " differs"};
        }
    }
    fs::remove_all(base);
    return {true, "aggregate + coordinate CSVs byte-identical across reruns"};
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const std::vector<Entry> entries = {
        {1, "radiality-and-invertibility", criterion_radiality},
        {2, "two-bus-oracle", criterion_oracle},
        {3, "conservation", criterion_conservation},
        {4, "loss-positivity", criterion_loss_positivity},
        {5, "compensation-improvement", criterion_compensation},
        {6, "price-sweep-split", criterion_price_split},
        {7, "attachment-counts", criterion_attachments},
        {8, "coordination-ordering", criterion_coordination},
        {9, "determinism", criterion_determinism},
    };
    std::map<int, Outcome> results;
    for (const auto& e : entries) {
        if (e.id == 3) continue;  // conservation aggregates the others' solves
        try {
            results[e.id] = e.fn();
        } catch (const std::exception& ex) {
            results[e.id] = {false, std::string("exception: ") + ex.what()};
        }
    }
    try {
        results[3] = criterion_conservation();
    } catch (const std::exception& ex) {
        results[3] = {false, std::string("exception: ") + ex.what()};
    }

    int failures = 0;
    for (const auto& e : entries) {
        const auto& out = results[e.id];
        if (!out.pass) ++failures;
        std::printf("[%s] %d. %-28s %s\n", out.pass ? "PASS" : "FAIL", e.id, e.name,
                    out.detail.c_str());
    }
    return failures;
}
