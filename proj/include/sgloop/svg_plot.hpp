#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sgloop/common.hpp"

namespace sgloop::svg {

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> points;
};

// Minimal SVG line plot: axes, ticks, polylines, legend. Enough for PR curves
// and trajectory overlays without an external plotting dependency.
inline void write_line_plot(const std::string& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<Series>& series) {
    const double width = 720, height = 540;
    const double ml = 70, mr = 30, mt = 50, mb = 60;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
    const double xpad = 0.03 * (xmax - xmin), ypad = 0.03 * (ymax - ymin);
    xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "' viewBox='0 0 " << width << " " << height << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << width / 2 << "' y='28' text-anchor='middle' font-size='18' "
        << "font-family='sans-serif'>" << title << "</text>\n";

    // axes + ticks
    out << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
        << height - mb << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
        << "' stroke='black'/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 5.0;
        const double fy = ymin + (ymax - ymin) * t / 5.0;
        out << "<line x1='" << sx(fx) << "' y1='" << height - mb << "' x2='" << sx(fx) << "' y2='"
            << height - mb + 5 << "' stroke='black'/>\n";
        out << "<text x='" << sx(fx) << "' y='" << height - mb + 20
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>"
            << std::round(fx * 1000) / 1000 << "</text>\n";
        out << "<line x1='" << ml - 5 << "' y1='" << sy(fy) << "' x2='" << ml << "' y2='" << sy(fy)
            << "' stroke='black'/>\n";
        out << "<text x='" << ml - 8 << "' y='" << sy(fy) + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>"
            << std::round(fy * 1000) / 1000 << "</text>\n";
    }
    out << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 15
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label
        << "</text>\n";
    out << "<text x='18' y='" << (mt + height - mb) / 2
        << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 "
        << 18 << " " << (mt + height - mb) / 2 << ")'>" << y_label << "</text>\n";

    double legend_y = mt + 8;
    for (const auto& s : series) {
        if (s.points.empty()) continue;
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.8' points='";
        for (const auto& [x, y] : s.points) out << sx(x) << "," << sy(y) << " ";
        out << "'/>\n";
        out << "<line x1='" << width - mr - 150 << "' y1='" << legend_y << "' x2='"
            << width - mr - 125 << "' y2='" << legend_y << "' stroke='" << s.color
            << "' stroke-width='2'/>\n";
        out << "<text x='" << width - mr - 118 << "' y='" << legend_y + 4
            << "' font-size='12' font-family='sans-serif'>" << s.label << "</text>\n";
        legend_y += 18;
    }
    out << "</svg>\n";

    std::ofstream file(path);
    if (!file) throw DataError("cannot open plot file for writing: " + path);
    file << out.str();
}

}  // namespace sgloop::svg
