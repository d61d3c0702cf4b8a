#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "flexagg/coordination.hpp"
#include "flexagg/distflow.hpp"
#include "flexagg/io.hpp"
#include "flexagg/lindistflow.hpp"
#include "flexagg/loss_compensation.hpp"
#include "flexagg/matpower.hpp"
#include "flexagg/network.hpp"
#include "flexagg/types.hpp"

namespace fs = std::filesystem;
using namespace flexagg;

namespace {

struct CommonOptions {
    std::string case_path;
    std::string out_dir = "out";
    double der_fraction = 0.5;
    int resolution = 101;
    std::string denominator = "sending";
    double max_edge = 0.01;
};

distflow::Denominator parse_denominator(const std::string& s) {
    if (s == "sending") return distflow::Denominator::kSendingEnd;
    if (s == "difference") return distflow::Denominator::kDifference;
    throw ConfigError("unknown denominator '" + s + "' (want sending|difference)");
}

/// FLEXAGG_SEED_BOX="pmin,pmax,qmin,qmax" overrides the clipping seed.
std::optional<geometry::BoundingBox> seed_box_from_env() {
    const char* raw = std::getenv("FLEXAGG_SEED_BOX");
    if (!raw) return std::nullopt;
    std::vector<double> vals;
    std::string tok;
    for (std::istringstream ss(raw); std::getline(ss, tok, ',');) {
        vals.push_back(std::stod(tok));
    }
    if (vals.size() != 4) {
        throw ConfigError("FLEXAGG_SEED_BOX needs 4 comma-separated numbers");
    }
    geometry::BoundingBox box;
    box.p = {vals[0], vals[1]};
    box.q = {vals[2], vals[3]};
    return box;
}

RadialNetwork load_network(const std::string& path, double der_fraction) {
    if (!fs::exists(path)) throw ConfigError("case file not found: " + path);
    auto raw = matpower::load_case(path);
    matpower::DerSizing sizing;
    sizing.fraction_p = der_fraction;
    sizing.fraction_q = der_fraction;
    return matpower::to_radial_network(raw, sizing);
}

struct Aggregation {
    coordination::FeederSpec spec;
    lindistflow::LinDistModel model;
};

Aggregation aggregate_feeder(const RadialNetwork& net, distflow::Denominator denom,
                             bool with_cloud, int resolution) {
    Aggregation agg;
    agg.spec.net = net;
    auto inc = build_incidence(net);
    agg.model = lindistflow::assemble(net, inc);

    auto seed = seed_box_from_env();
    agg.spec.polygon = lindistflow::flexibility_polygon(agg.model, net,
                                                        seed ? &*seed : nullptr);
    agg.spec.facets = geometry::polygon_facets(agg.spec.polygon);

    loss_compensation::LossMapOptions lopts;
    lopts.denominator = denom;
    agg.spec.loss = loss_compensation::build_maps(net, agg.model, lopts);

    if (with_cloud) {
        distflow::SweepOptions sweep;
        sweep.denominator = denom;
        agg.spec.cloud = distflow::exact_flex_cloud(net, resolution, sweep);
    }
    return agg;
}

int cmd_aggregate(const CommonOptions& common, bool export_cloud,
                  const std::vector<double>& prices) {
    RadialNetwork net = load_network(common.case_path, common.der_fraction);
    const auto denom = parse_denominator(common.denominator);
    Aggregation agg = aggregate_feeder(net, denom, true, common.resolution);
    const coordination::FeederSpec& spec = agg.spec;

    geometry::FlexPolygon u_slc =
        loss_compensation::compensate_polygon(spec.loss, spec.polygon, common.max_edge);

    fs::create_directories(common.out_dir);
    auto path = [&](const std::string& suffix) {
        return (fs::path(common.out_dir) / (net.name + "_" + suffix)).string();
    };
    io::write_file(path("u_lds.csv"), io::polygon_csv(spec.polygon));
    io::write_file(path("u_slc.csv"), io::polygon_csv(u_slc));
    io::write_file(path("loss_map.json"), loss_compensation::to_json(spec.loss) + "\n");

    // Overlay in the Fig.-2 visual grammar: lossless set red, compensated
    // image green, exact hull as the dashed outline.
    double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
    auto expand = [&](const geometry::FlexPolygon& poly) {
        for (const auto& v : poly.vertices) {
            xmin = std::min(xmin, v[0]);
            xmax = std::max(xmax, v[0]);
            ymin = std::min(ymin, v[1]);
            ymax = std::max(ymax, v[1]);
        }
    };
    expand(spec.polygon);
    expand(u_slc);
    expand(spec.cloud.hull);
    const double pad_x = 0.05 * (xmax - xmin) + 1e-6;
    const double pad_y = 0.05 * (ymax - ymin) + 1e-6;
    io::SvgPlot plot(640, 480);
    plot.set_view(xmin - pad_x, xmax + pad_x, ymin - pad_y, ymax + pad_y);
    plot.add_axes("p_pcc [p.u.]", "q_pcc [p.u.]");
    plot.add_region(spec.polygon, "#d62728", 0.35);
    plot.add_region(u_slc, "#2ca02c", 0.35);
    plot.add_outline(spec.cloud.hull, "#1f77b4", 1.5, true);

    if (export_cloud) {
        io::write_file(path("cloud.csv"), io::cloud_csv(spec.cloud));
    }

    if (!prices.empty()) {
        auto popts = coordination::default_price_sweep_options(net);
        popts.der_price_multipliers = prices;
        popts.reference_resolution = common.resolution;
        popts.coordination.sweep.denominator = denom;
        std::vector<coordination::DispatchResult> all;
        std::map<coordination::Method, std::vector<coordination::DispatchResult>> runs;
        for (auto method : {coordination::Method::kReference, coordination::Method::kLds,
                            coordination::Method::kSlc}) {
            runs[method] = coordination::price_sweep_dispatch(spec, method, popts);
        }
        for (size_t i = 0; i < prices.size(); ++i) {
            for (auto method : {coordination::Method::kReference,
                                coordination::Method::kLds, coordination::Method::kSlc}) {
                auto& res = runs[method][i];
                coordination::apply_reference_gaps(
                    res, runs[coordination::Method::kReference][i]);
                const Vec2 pt = res.feeders.at(0).delivered;
                if (method == coordination::Method::kReference) {
                    plot.add_marker(pt, "#1f77b4", "circle");
                } else if (method == coordination::Method::kLds) {
                    plot.add_marker(pt, "#d62728", "square");
                } else {
                    plot.add_marker(pt, "#2ca02c", "triangle");
                }
                all.push_back(res);
            }
        }
        io::write_file(path("dispatch.csv"), io::dispatch_csv(all));
    }

    io::write_file(path("overlay.svg"), plot.render());
    for (const auto& w : net.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "aggregate: wrote " << (4 + (export_cloud ? 1 : 0) +
                                         (prices.empty() ? 0 : 1))
              << " files to " << common.out_dir << "\n";
    return 0;
}

int cmd_coordinate(const CommonOptions& common, const std::string& feeder_dir,
                   const std::vector<double>& thresholds,
                   std::vector<std::string> methods, double reactive_weight,
                   double der_c1, double der_c2_scale) {
    if (!fs::exists(common.case_path)) {
        throw ConfigError("case file not found: " + common.case_path);
    }
    auto raw = matpower::load_case(common.case_path);
    coordination::AttachThresholds th;
    if (!thresholds.empty()) {
        if (thresholds.size() != 2) throw ConfigError("--thresholds wants low,high");
        th.low = thresholds[0];
        th.high = thresholds[1];
    }
    auto plan = coordination::attach_feeders(raw, th);
    auto tso = coordination::build_tso_model(raw, plan);

    const auto denom = parse_denominator(common.denominator);
    const fs::path dir = feeder_dir.empty()
                             ? fs::path(common.case_path).parent_path()
                             : fs::path(feeder_dir);

    std::map<std::string, coordination::FeederSpec> templates;
    for (const auto& att : tso.attachments) {
        if (templates.count(att.feeder_kind)) continue;
        const fs::path p = dir / (att.feeder_kind + ".m");
        if (!fs::exists(p)) throw ConfigError("feeder template not found: " + p.string());
        RadialNetwork net = load_network(p.string(), common.der_fraction);
        // DER price anchored below the TSO marginal cost, curvature scaled to
        // the feeder's own DER span so every optimum stays interior.
        const double span_mw = net.der.p.hi * net.base_mva;
        net.der.cost = {der_c2_scale / std::max(span_mw, 1e-6), der_c1, 0.0};
        templates[att.feeder_kind] =
            aggregate_feeder(net, denom, false, common.resolution).spec;
    }
    std::vector<coordination::FeederSpec> feeders;
    feeders.reserve(tso.attachments.size());
    for (const auto& att : tso.attachments) {
        feeders.push_back(templates.at(att.feeder_kind));
    }

    if (methods.empty()) methods = {"reference", "lds", "slc"};
    coordination::CoordinationOptions copts;
    copts.reactive_weight = reactive_weight;
    copts.sweep.denominator = denom;

    std::vector<coordination::DispatchResult> results;
    // The reference run always executes first so gaps are well-defined.
    std::vector<std::string> ordered = methods;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const std::string& a, const std::string& b) {
                         return (a == "reference") > (b == "reference");
                     });
    bool has_reference = std::find(ordered.begin(), ordered.end(), "reference") !=
                         ordered.end();
    if (!has_reference) ordered.insert(ordered.begin(), "reference");

    for (const auto& name : ordered) {
        auto res = coordination::coordinate(tso, feeders,
                                            coordination::method_from_string(name),
                                            copts);
        results.push_back(std::move(res));
    }
    for (auto& res : results) coordination::apply_reference_gaps(res, results.front());
    if (!has_reference) results.erase(results.begin());

    fs::create_directories(common.out_dir);
    const std::string stem = raw.name.empty() ? "tso" : raw.name;
    auto path = [&](const std::string& suffix) {
        return (fs::path(common.out_dir) / (stem + "_" + suffix)).string();
    };
    io::write_file(path("dispatch.csv"), io::dispatch_csv(results));

    // Verification summary per method.
    std::string verify = "method,feeder,feeder_kind,tso_bus,violations,max_magnitude\n";
    for (const auto& res : results) {
        std::vector<Vec2> delivered;
        for (const auto& fd : res.feeders) delivered.push_back(fd.delivered);
        auto report = coordination::post_verify(feeders, delivered, copts.sweep);
        for (size_t f = 0; f < report.entries.size(); ++f) {
            const auto& e = report.entries[f];
            double worst = 0.0;
            std::string tags;
            for (const auto& v : e.violations) {
                worst = std::max(worst, v.magnitude);
                if (v.magnitude > 1e-3) {
                    if (!tags.empty()) tags += ';';
                    tags += distflow::to_string(v.tag);
                }
            }
            verify += coordination::to_string(res.method) + "," + std::to_string(f) +
                      "," + res.feeders[f].feeder_kind + "," +
                      std::to_string(res.feeders[f].tso_bus_id) + "," + tags + "," +
                      io::format_double(worst) + "\n";
        }
    }
    io::write_file(path("verify.csv"), verify);

    // Cost-gap bars per feeder (lds vs slc) plus violation-count annotations.
    double gap_max = 1e-12;
    for (const auto& res : results) {
        for (const auto& fd : res.feeders) gap_max = std::max(gap_max, fd.cost_gap);
    }
    io::SvgPlot plot(900, 420);
    const int n_f = static_cast<int>(feeders.size());
    plot.set_view(-0.5, n_f - 0.5, 0.0, gap_max * 1.15);
    plot.add_axes("feeder", "|cost gap| / reference");
    for (const auto& res : results) {
        if (res.method == coordination::Method::kReference) continue;
        const bool lds = res.method == coordination::Method::kLds;
        for (int f = 0; f < n_f; ++f) {
            plot.add_bar(f + (lds ? -0.18 : 0.18), res.feeders[f].cost_gap, 6.0,
                         lds ? "#d62728" : "#2ca02c");
        }
    }
    int y_slot = 0;
    for (const auto& res : results) {
        int count = 0;
        for (const auto& fd : res.feeders) {
            for (const auto& v : fd.violations) {
                if (v.magnitude > 1e-3) ++count;
            }
        }
        plot.add_text(0.0, gap_max * (1.08 - 0.07 * y_slot++),
                      coordination::to_string(res.method) + ": " +
                          std::to_string(count) + " violations > 1e-3 p.u.");
    }
    io::write_file(path("coordination.svg"), plot.render());

    std::cout << "coordinate: " << feeders.size() << " feeders, "
              << results.size() << " methods, results in " << common.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feeder flexibility aggregation and TSO-DSO coordination"};
    app.require_subcommand(1);

    CommonOptions common;
    bool export_cloud = false;
    std::vector<double> prices;
    std::string feeder_dir;
    std::vector<double> thresholds;
    std::vector<std::string> methods;
    double reactive_weight = 0.05;
    double der_c1 = 2.5;
    double der_c2_scale = 1.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--case", common.case_path, "MATPOWER case file")->required();
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--der-fraction", common.der_fraction,
                        "DER bound fraction of total demand")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--resolution", common.resolution, "DER grid points per axis")
            ->check(CLI::Range(2, 2001));
        sub->add_option("--denominator", common.denominator,
                        "squared-current denominator: sending|difference");
    };

    CLI::App* agg = app.add_subcommand("aggregate",
                                       "aggregate one feeder's flexibility at the PCC");
    add_common(agg);
    agg->add_option("--max-edge", common.max_edge,
                    "boundary densification step for the compensated image");
    agg->add_flag("--export-cloud", export_cloud, "also write the exact-cloud CSV");
    agg->add_option("--prices", prices,
                    "DER price multipliers; runs the dispatch sweep when given")
        ->delimiter(',');

    CLI::App* coord = app.add_subcommand("coordinate",
                                         "multi-feeder TSO-DSO coordination experiment");
    add_common(coord);
    coord->add_option("--feeders", feeder_dir,
                      "directory with feeder templates (default: case directory)");
    coord->add_option("--thresholds", thresholds, "attachment thresholds low,high [MW]")
        ->delimiter(',');
    coord->add_option("--method", methods, "reference|lds|slc (repeatable)");
    coord->add_option("--reactive-weight", reactive_weight,
                      "interface penalty on delivered reactive exchange");
    coord->add_option("--der-c1", der_c1, "DER linear price [$/MWh]");
    coord->add_option("--der-c2-scale", der_c2_scale,
                      "DER quadratic price scale (divided by the DER span)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(agg)) {
            return cmd_aggregate(common, export_cloud, prices);
        }
        return cmd_coordinate(common, feeder_dir, thresholds, methods, reactive_weight,
                              der_c1, der_c2_scale);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
