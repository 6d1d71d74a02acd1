#include "svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "flooddan/errors.hpp"

namespace flooddan::plot {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

void write_svg(const Figure& fig, const std::string& path) {
    if (fig.series.empty()) fail(ErrorCategory::config, "figure has no series");

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : fig.series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            fail(ErrorCategory::config, "series '" + s.label + "' is empty or ragged");
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (fig.has_hline) {
        ymin = std::min(ymin, fig.hline);
        ymax = std::max(ymax, fig.hline);
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = fig.width - ml - mr;
    const double ph = fig.height - mt - mb;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorCategory::io, "cannot write '" + path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << fig.width << "' height='"
        << fig.height << "' font-family='sans-serif' font-size='12'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << fig.width / 2 << "' y='22' text-anchor='middle' font-size='15'>"
        << fig.title << "</text>\n";

    // axes + ticks
    out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='#333'/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        out << "<line x1='" << px(fx) << "' y1='" << mt + ph << "' x2='" << px(fx) << "' y2='"
            << mt + ph + 5 << "' stroke='#333'/>\n";
        out << "<text x='" << px(fx) << "' y='" << mt + ph + 18 << "' text-anchor='middle'>"
            << fmt(fx) << "</text>\n";
        out << "<line x1='" << ml - 5 << "' y1='" << py(fy) << "' x2='" << ml << "' y2='" << py(fy)
            << "' stroke='#333'/>\n";
        out << "<text x='" << ml - 8 << "' y='" << py(fy) + 4 << "' text-anchor='end'>" << fmt(fy)
            << "</text>\n";
    }
    out << "<text x='" << ml + pw / 2 << "' y='" << fig.height - 8
        << "' text-anchor='middle'>" << fig.x_label << "</text>\n";
    out << "<text x='16' y='" << mt + ph / 2 << "' text-anchor='middle' transform='rotate(-90 16 "
        << mt + ph / 2 << ")'>" << fig.y_label << "</text>\n";

    double legend_y = mt + 14;
    for (const auto& s : fig.series) {
        if (s.bars) {
            const double bw = std::max(1.0, pw / static_cast<double>(s.x.size()) * 0.8);
            for (size_t i = 0; i < s.x.size(); ++i) {
                const double top = py(s.y[i]);
                out << "<rect x='" << px(s.x[i]) - bw / 2 << "' y='" << top << "' width='" << bw
                    << "' height='" << std::max(0.0, mt + ph - top) << "' fill='" << s.color
                    << "' fill-opacity='0.45'/>\n";
            }
        } else {
            out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
            for (size_t i = 0; i < s.x.size(); ++i)
                out << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
            out << "'/>\n";
        }
        out << "<rect x='" << ml + pw - 160 << "' y='" << legend_y - 9 << "' width='12' height='12' fill='"
            << s.color << "'/>\n";
        out << "<text x='" << ml + pw - 144 << "' y='" << legend_y + 1 << "'>" << s.label
            << "</text>\n";
        legend_y += 16;
    }

    if (fig.has_hline) {
        out << "<line x1='" << ml << "' y1='" << py(fig.hline) << "' x2='" << ml + pw << "' y2='"
            << py(fig.hline) << "' stroke='#d62728' stroke-dasharray='6,4'/>\n";
        out << "<text x='" << ml + 4 << "' y='" << py(fig.hline) - 4 << "' fill='#d62728'>"
            << fig.hline_label << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) fail(ErrorCategory::io, "write failed for '" + path + "'");
}

}  // namespace flooddan::plot
