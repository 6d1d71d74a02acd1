#pragma once

#include <string>
#include <vector>

namespace flooddan::plot {

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> y;
    bool bars = false;  // draw as a bar histogram instead of a polyline
};

struct Figure {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 900;
    int height = 420;
    std::vector<Series> series;
    // Optional horizontal reference line (e.g. the unsupervised DC).
    bool has_hline = false;
    double hline = 0.0;
    std::string hline_label;
};

// Writes a static SVG image.
void write_svg(const Figure& fig, const std::string& path);

}  // namespace flooddan::plot
