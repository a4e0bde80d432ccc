#pragma once

#include <string>
#include <vector>

namespace powerlag {

/// Minimal self-contained SVG line/scatter chart. Output is deterministic
/// for fixed inputs (no timestamps, fixed number formatting).
struct SvgSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_lo; // optional error bars, empty = none
    std::vector<double> y_hi;
    bool dashed = false;
    bool markers = false;
    std::string color = "#1f77b4";
    std::string label;
};

struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 480;
    std::vector<SvgSeries> series;
};

std::string render_svg(const SvgChart &chart);
void write_svg(const SvgChart &chart, const std::string &path);

} // namespace powerlag
