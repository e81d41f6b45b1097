#pragma once

#include <string>
#include <utility>
#include <vector>

namespace normscape {

enum class Marker { star, square, circle };

struct PlotSeries {
    std::string label;
    Marker marker = Marker::circle;
    std::string color = "#000000";
    std::vector<std::pair<double, double>> points;  // (x, y)
};

// Static line chart with marked series, axes, ticks and a legend.
// Self-contained SVG document text.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<PlotSeries>& series, int width = 880,
                              int height = 560);

}  // namespace normscape
