#include "flexagg/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace flexagg::io {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string polygon_csv(const geometry::FlexPolygon& poly) {
    std::string out = "p_pcc,q_pcc\n";
    for (const auto& v : poly.vertices) {
        out += format_double(v[0]);
        out += ',';
        out += format_double(v[1]);
        out += '\n';
    }
    return out;
}

std::string cloud_csv(const distflow::ExactFlexCloud& cloud) {
    std::string out = "pg,qg,p_pcc,q_pcc,feasible,tags,iterations,residual\n";
    for (const auto& s : cloud.samples) {
        out += format_double(s.der[0]);
        out += ',';
        out += format_double(s.der[1]);
        out += ',';
        out += format_double(s.exchange[0]);
        out += ',';
        out += format_double(s.exchange[1]);
        out += ',';
        out += s.feasible ? '1' : '0';
        out += ',';
        for (size_t i = 0; i < s.violations.size(); ++i) {
            if (i) out += ';';
            out += distflow::to_string(s.violations[i].tag);
        }
        out += ',';
        out += std::to_string(s.iterations);
        out += ',';
        out += format_double(s.residual);
        out += '\n';
    }
    return out;
}

std::string dispatch_csv(std::span<const coordination::DispatchResult> results) {
    std::string out =
        "scenario,method,feeder,feeder_kind,tso_bus,planned_p,planned_q,"
        "delivered_p,delivered_q,der_planned_p,der_planned_q,der_realized_p,"
        "der_realized_q,cost,cost_gap,reachable,violations,total_cost,"
        "total_cost_gap,fixed_point_iterations\n";
    for (size_t s = 0; s < results.size(); ++s) {
        const auto& r = results[s];
        for (size_t f = 0; f < r.feeders.size(); ++f) {
            const auto& fd = r.feeders[f];
            out += std::to_string(s);
            out += ',';
            out += coordination::to_string(r.method);
            out += ',';
            out += std::to_string(f);
            out += ',';
            out += fd.feeder_kind;
            out += ',';
            out += std::to_string(fd.tso_bus_id);
            for (double v : {fd.planned[0], fd.planned[1], fd.delivered[0],
                             fd.delivered[1], fd.der_planned[0], fd.der_planned[1],
                             fd.der_realized[0], fd.der_realized[1], fd.cost,
                             fd.cost_gap}) {
                out += ',';
                out += format_double(v);
            }
            out += ',';
            out += fd.reachable ? '1' : '0';
            out += ',';
            for (size_t i = 0; i < fd.violations.size(); ++i) {
                if (i) out += ';';
                out += distflow::to_string(fd.violations[i].tag);
                out += ':';
                out += format_double(fd.violations[i].magnitude);
            }
            out += ',';
            out += format_double(r.cost_total);
            out += ',';
            out += format_double(r.cost_gap);
            out += ',';
            out += std::to_string(r.fixed_point_iterations);
            out += '\n';
        }
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SvgPlot::SvgPlot(double width, double height) : width_(width), height_(height) {}

void SvgPlot::set_view(double xmin, double xmax, double ymin, double ymax) {
    xmin_ = xmin;
    xmax_ = xmax;
    ymin_ = ymin;
    ymax_ = ymax;
}

namespace {
constexpr double kMargin = 50.0;
}

double SvgPlot::sx(double x) const {
    const double w = width_ - 2 * kMargin;
    return kMargin + (x - xmin_) / (xmax_ - xmin_) * w;
}

double SvgPlot::sy(double y) const {
    const double h = height_ - 2 * kMargin;
    return height_ - kMargin - (y - ymin_) / (ymax_ - ymin_) * h;
}

namespace {
std::string points_attr(const SvgPlot& plot, const geometry::FlexPolygon& poly,
                        double (SvgPlot::*fx)(double) const,
                        double (SvgPlot::*fy)(double) const) {
    std::string pts;
    for (const auto& v : poly.vertices) {
        if (!pts.empty()) pts += ' ';
        pts += format_double((plot.*fx)(v[0]));
        pts += ',';
        pts += format_double((plot.*fy)(v[1]));
    }
    return pts;
}
}  // namespace

void SvgPlot::add_region(const geometry::FlexPolygon& poly, const std::string& fill,
                         double opacity) {
    if (poly.empty()) return;
    elements_.push_back("<polygon points=\"" + points_attr(*this, poly, &SvgPlot::sx,
                                                           &SvgPlot::sy) +
                        "\" fill=\"" + fill + "\" fill-opacity=\"" +
                        format_double(opacity) + "\" stroke=\"none\"/>");
}

void SvgPlot::add_outline(const geometry::FlexPolygon& poly, const std::string& stroke,
                          double stroke_width, bool dashed) {
    if (poly.empty()) return;
    std::string el = "<polygon points=\"" +
                     points_attr(*this, poly, &SvgPlot::sx, &SvgPlot::sy) +
                     "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" +
                     format_double(stroke_width) + "\"";
    if (dashed) el += " stroke-dasharray=\"6 4\"";
    el += "/>";
    elements_.push_back(el);
}

void SvgPlot::add_marker(const Vec2& pt, const std::string& color,
                         const std::string& shape) {
    const double x = sx(pt[0]);
    const double y = sy(pt[1]);
    if (shape == "square") {
        elements_.push_back("<rect x=\"" + format_double(x - 4) + "\" y=\"" +
                            format_double(y - 4) +
                            "\" width=\"8\" height=\"8\" fill=\"" + color + "\"/>");
    } else if (shape == "triangle") {
        elements_.push_back("<polygon points=\"" + format_double(x) + "," +
                            format_double(y - 5) + " " + format_double(x - 5) + "," +
                            format_double(y + 4) + " " + format_double(x + 5) + "," +
                            format_double(y + 4) + "\" fill=\"" + color + "\"/>");
    } else {
        elements_.push_back("<circle cx=\"" + format_double(x) + "\" cy=\"" +
                            format_double(y) + "\" r=\"4\" fill=\"" + color + "\"/>");
    }
}

void SvgPlot::add_bar(double x, double y, double bar_width, const std::string& color) {
    const double x0 = sx(x) - bar_width / 2.0;
    const double y0 = sy(std::max(0.0, y));
    const double y1 = sy(std::min(0.0, y));
    elements_.push_back("<rect x=\"" + format_double(x0) + "\" y=\"" +
                        format_double(y0) + "\" width=\"" + format_double(bar_width) +
                        "\" height=\"" + format_double(std::max(0.5, y1 - y0)) +
                        "\" fill=\"" + color + "\"/>");
}

void SvgPlot::add_text(double x, double y, const std::string& text) {
    elements_.push_back("<text x=\"" + format_double(sx(x)) + "\" y=\"" +
                        format_double(sy(y)) + "\" font-size=\"12\" fill=\"#333\">" +
                        text + "</text>");
}

void SvgPlot::add_axes(const std::string& x_label, const std::string& y_label) {
    const double x0 = kMargin;
    const double x1 = width_ - kMargin;
    const double y0 = height_ - kMargin;
    const double y1 = kMargin;
    elements_.push_back("<rect x=\"" + format_double(x0) + "\" y=\"" +
                        format_double(y1) + "\" width=\"" + format_double(x1 - x0) +
                        "\" height=\"" + format_double(y0 - y1) +
                        "\" fill=\"none\" stroke=\"#999\"/>");
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin_ + (xmax_ - xmin_) * i / 4.0;
        const double fy = ymin_ + (ymax_ - ymin_) * i / 4.0;
        elements_.push_back("<text x=\"" + format_double(sx(fx)) + "\" y=\"" +
                            format_double(y0 + 16) +
                            "\" font-size=\"10\" text-anchor=\"middle\" fill=\"#555\">" +
                            format_double(fx) + "</text>");
        elements_.push_back("<text x=\"" + format_double(x0 - 6) + "\" y=\"" +
                            format_double(sy(fy) + 3) +
                            "\" font-size=\"10\" text-anchor=\"end\" fill=\"#555\">" +
                            format_double(fy) + "</text>");
    }
    elements_.push_back("<text x=\"" + format_double((x0 + x1) / 2) + "\" y=\"" +
                        format_double(height_ - 10) +
                        "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\">" +
                        x_label + "</text>");
    elements_.push_back("<text x=\"14\" y=\"" + format_double((y0 + y1) / 2) +
                        "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#333\" "
                        "transform=\"rotate(-90 14 " +
                        format_double((y0 + y1) / 2) + ")\">" + y_label + "</text>");
}

std::string SvgPlot::render() const {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      format_double(width_) + "\" height=\"" + format_double(height_) +
                      "\" viewBox=\"0 0 " + format_double(width_) + " " +
                      format_double(height_) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& el : elements_) {
        out += el;
        out += '\n';
    }
    out += "</svg>\n";
    return out;
}

std::map<std::string, std::string> parse_config(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r\n";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        out[key] = value;
    }
    return out;
}

}  // namespace flexagg::io
