#include "powerlag/svg.hpp"

#include "powerlag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace powerlag {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

// Round the raw span to a 1/2/5 ladder step.
double nice_step(double span, int target_ticks) {
    if (!(span > 0.0)) {
        return 1.0;
    }
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    double step = 10.0;
    if (r <= 1.0) {
        step = 1.0;
    } else if (r <= 2.0) {
        step = 2.0;
    } else if (r <= 5.0) {
        step = 5.0;
    }
    return step * mag;
}

} // namespace

std::string render_svg(const SvgChart &chart) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto &s : chart.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            double lo = s.y_lo.empty() ? s.y[i] : s.y_lo[i];
            double hi = s.y_hi.empty() ? s.y[i] : s.y_hi[i];
            ymin = std::min(ymin, lo);
            ymax = std::max(ymax, hi);
        }
    }
    if (!std::isfinite(xmin) || !std::isfinite(ymin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax == xmin) {
        xmax = xmin + 1.0;
    }
    if (ymax == ymin) {
        ymax = ymin + 1.0;
    }
    const double xpad = 0.03 * (xmax - xmin);
    const double ypad = 0.06 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    const int ml = 64, mr = 20, mt = 36, mb = 52;
    const double pw = chart.width - ml - mr;
    const double ph = chart.height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\""
       << chart.height << "\" viewBox=\"0 0 " << chart.width << " " << chart.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << chart.width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"14\">" << chart.title << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"black\"/>\n";

    const double xstep = nice_step(xmax - xmin, 8);
    for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-12; t += xstep) {
        os << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << mt + ph << "\" x2=\"" << fmt(px(t))
           << "\" y2=\"" << mt + ph + 4 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fmt(px(t)) << "\" y=\"" << mt + ph + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt_tick(t) << "</text>\n";
    }
    const double ystep = nice_step(ymax - ymin, 6);
    for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-12; t += ystep) {
        os << "<line x1=\"" << ml - 4 << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << ml
           << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(py(t) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt_tick(t) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << chart.height - 12
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << chart.x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
       << "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">" << chart.y_label << "</text>\n";

    int legend_y = mt + 8;
    for (const auto &s : chart.series) {
        if (!s.y_lo.empty()) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                os << "<line x1=\"" << fmt(px(s.x[i])) << "\" y1=\"" << fmt(py(s.y_lo[i]))
                   << "\" x2=\"" << fmt(px(s.x[i])) << "\" y2=\"" << fmt(py(s.y_hi[i]))
                   << "\" stroke=\"" << s.color << "\" stroke-width=\"1\"/>\n";
            }
        }
        if (s.x.size() > 1 && !s.markers) {
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
            if (s.dashed) {
                os << " stroke-dasharray=\"6,4\"";
            }
            os << " points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                os << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
            }
            os << "\"/>\n";
        }
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
                   << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
            }
        }
        if (!s.label.empty()) {
            os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << legend_y << "\" x2=\""
               << ml + pw - 126 << "\" y2=\"" << legend_y << "\" stroke=\"" << s.color
               << "\" stroke-width=\"1.5\"";
            if (s.dashed) {
                os << " stroke-dasharray=\"6,4\"";
            }
            os << "/>\n";
            os << "<text x=\"" << ml + pw - 120 << "\" y=\"" << legend_y + 4
               << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
            legend_y += 16;
        }
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg(const SvgChart &chart, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    out << render_svg(chart);
}

} // namespace powerlag
