#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "flexagg/coordination.hpp"
#include "flexagg/distflow.hpp"
#include "flexagg/geometry.hpp"
#include "flexagg/types.hpp"

namespace flexagg::io {

/// Locale-independent shortest-round-trip formatting (std::to_chars).
std::string format_double(double v);

std::string polygon_csv(const geometry::FlexPolygon& poly);
std::string cloud_csv(const distflow::ExactFlexCloud& cloud);
std::string dispatch_csv(std::span<const coordination::DispatchResult> results);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Minimal deterministic SVG plotting: filled regions, outlines, markers.
class SvgPlot {
  public:
    SvgPlot(double width, double height);

    void set_view(double xmin, double xmax, double ymin, double ymax);
    void add_region(const geometry::FlexPolygon& poly, const std::string& fill,
                    double opacity);
    void add_outline(const geometry::FlexPolygon& poly, const std::string& stroke,
                     double stroke_width, bool dashed = false);
    void add_marker(const Vec2& pt, const std::string& color, const std::string& shape);
    void add_bar(double x, double y, double bar_width, const std::string& color);
    void add_text(double x, double y, const std::string& text);
    void add_axes(const std::string& x_label, const std::string& y_label);

    std::string render() const;

  private:
    double width_, height_;
    double xmin_ = 0, xmax_ = 1, ymin_ = 0, ymax_ = 1;
    std::vector<std::string> elements_;

    double sx(double x) const;
    double sy(double y) const;
};

/// key = value scenario file; '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config(const std::string& text);

}  // namespace flexagg::io
