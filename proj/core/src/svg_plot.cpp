#include "normscape/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace normscape {
namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string fmt_coord(double v) {
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << v;
    return os.str();
}

// Round tick spacing to 1/2/5 times a power of ten.
double nice_step(double range, int target_ticks) {
    if (!(range > 0.0)) return 1.0;
    const double raw = range / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step;
    if (norm <= 1.0) step = 1.0;
    else if (norm <= 2.0) step = 2.0;
    else if (norm <= 5.0) step = 5.0;
    else step = 10.0;
    return step * mag;
}

void marker_svg(std::ostringstream& os, Marker m, double cx, double cy, const std::string& color) {
    const double r = 4.5;
    switch (m) {
        case Marker::circle:
            os << "<circle cx=\"" << fmt_coord(cx) << "\" cy=\"" << fmt_coord(cy) << "\" r=\""
               << fmt_coord(r) << "\" fill=\"" << color << "\"/>";
            break;
        case Marker::square:
            os << "<rect x=\"" << fmt_coord(cx - r) << "\" y=\"" << fmt_coord(cy - r)
               << "\" width=\"" << fmt_coord(2 * r) << "\" height=\"" << fmt_coord(2 * r)
               << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\"/>";
            break;
        case Marker::star: {
            os << "<path d=\"";
            constexpr double pi = 3.14159265358979323846;
            const double outer = r + 1.5, inner = (r + 1.5) * 0.45;
            for (int k = 0; k < 10; ++k) {
                const double ang = -pi / 2.0 + k * pi / 5.0;
                const double rad = (k % 2 == 0) ? outer : inner;
                os << (k == 0 ? "M" : "L") << fmt_coord(cx + rad * std::cos(ang)) << " "
                   << fmt_coord(cy + rad * std::sin(ang));
            }
            os << "Z\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.4\"/>";
            break;
        }
    }
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<PlotSeries>& series,
                              int width, int height) {
    const double ml = 76, mr = 24, mt = 48, mb = 58;
    const double pw = width - ml - mr;
    const double ph = height - mt - mb;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const PlotSeries& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
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
    if (xmax == xmin) {
        xmax = xmin + 1;
        xmin -= 1;
    }
    if (ymax == ymin) {
        ymax = ymin + 0.5;
        ymin -= 0.5;
    }
    const double ypad = (ymax - ymin) * 0.08;
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"26\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"16\" fill=\"#222\">"
       << escape_xml(title) << "</text>\n";

    // Gridlines and ticks.
    const double xstep = nice_step(xmax - xmin, 8);
    const double ystep = nice_step(ymax - ymin, 6);
    os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">\n";
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9; x += xstep) {
        const double gx = px(x);
        os << "<line x1=\"" << fmt_coord(gx) << "\" y1=\"" << fmt_coord(mt) << "\" x2=\""
           << fmt_coord(gx) << "\" y2=\"" << fmt_coord(mt + ph)
           << "\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << fmt_coord(gx) << "\" y=\"" << fmt_coord(mt + ph + 18)
           << "\" text-anchor=\"middle\">" << fmt_num(x) << "</text>\n";
    }
    for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-9; y += ystep) {
        const double gy = py(y);
        os << "<line x1=\"" << fmt_coord(ml) << "\" y1=\"" << fmt_coord(gy) << "\" x2=\""
           << fmt_coord(ml + pw) << "\" y2=\"" << fmt_coord(gy)
           << "\" stroke=\"#e3e3e3\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << fmt_coord(ml - 8) << "\" y=\"" << fmt_coord(gy + 4)
           << "\" text-anchor=\"end\">" << fmt_num(y) << "</text>\n";
    }
    os << "</g>\n";

    // Axes.
    os << "<rect x=\"" << fmt_coord(ml) << "\" y=\"" << fmt_coord(mt) << "\" width=\""
       << fmt_coord(pw) << "\" height=\"" << fmt_coord(ph)
       << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1.2\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 14
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\">"
       << escape_xml(x_label) << "</text>\n";
    os << "<text x=\"20\" y=\"" << fmt_coord(mt + ph / 2)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#222\" "
          "transform=\"rotate(-90 20 "
       << fmt_coord(mt + ph / 2) << ")\">" << escape_xml(y_label) << "</text>\n";

    // Series.
    for (const PlotSeries& s : series) {
        std::ostringstream pts;
        bool any = false;
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            pts << (any ? " " : "") << fmt_coord(px(x)) << "," << fmt_coord(py(y));
            any = true;
        }
        if (!any) continue;
        os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.8\"/>\n";
        os << "<g>";
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            marker_svg(os, s.marker, px(x), py(y), s.color);
        }
        os << "</g>\n";
    }

    // Legend, top-right inside the plot area.
    double ly = mt + 16;
    for (const PlotSeries& s : series) {
        const double lx = ml + pw - 150;
        os << "<g>";
        os << "<line x1=\"" << fmt_coord(lx) << "\" y1=\"" << fmt_coord(ly) << "\" x2=\""
           << fmt_coord(lx + 26) << "\" y2=\"" << fmt_coord(ly) << "\" stroke=\"" << s.color
           << "\" stroke-width=\"1.8\"/>";
        marker_svg(os, s.marker, lx + 13, ly, s.color);
        os << "<text x=\"" << fmt_coord(lx + 34) << "\" y=\"" << fmt_coord(ly + 4)
           << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
           << escape_xml(s.label) << "</text>";
        os << "</g>\n";
        ly += 18;
    }

    os << "</svg>\n";
    return os.str();
}

}  // namespace normscape
