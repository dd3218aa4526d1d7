#pragma once

// Minimal SVG line plots for report output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace gridtune::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline std::string render(const LinePlot& plot, int width = 720, int height = 480) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    const double left = 80, right = 20, top = 40, bottom = 60;
    const double pw = width - left - right, ph = height - top - bottom;

    auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : plot.series)
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]) || (plot.log_x && s.x[k] <= 0)) continue;
            xmin = std::min(xmin, tx(s.x[k]));
            xmax = std::max(xmax, tx(s.x[k]));
            ymin = std::min(ymin, s.y[k]);
            ymax = std::max(ymax, s.y[k]);
        }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::num(width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           detail::escape(plot.title) + "</text>\n";
    out += "<rect x=\"" + detail::num(left) + "\" y=\"" + detail::num(top) + "\" width=\"" + detail::num(pw) +
           "\" height=\"" + detail::num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double fy = ymin + (ymax - ymin) * k / 4.0;
        const double gx = left + pw * k / 4.0, gy = top + ph - ph * k / 4.0;
        out += "<text x=\"" + detail::num(gx) + "\" y=\"" + detail::num(top + ph + 18) +
               "\" text-anchor=\"middle\">" + detail::num(plot.log_x ? std::pow(10.0, fx) : fx) + "</text>\n";
        out += "<text x=\"" + detail::num(left - 6) + "\" y=\"" + detail::num(gy + 4) +
               "\" text-anchor=\"end\">" + detail::num(fy) + "</text>\n";
    }
    out += "<text x=\"" + detail::num(left + pw / 2) + "\" y=\"" + detail::num(height - 15.0) +
           "\" text-anchor=\"middle\">" + detail::escape(plot.x_label) + "</text>\n";
    out += "<text transform=\"translate(18," + detail::num(top + ph / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + detail::escape(plot.y_label) + "</text>\n";

    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const char* color = colors[si % 6];
        std::string pts;
        for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k]) || (plot.log_x && s.x[k] <= 0)) continue;
            pts += detail::num(px(s.x[k])) + "," + detail::num(py(s.y[k])) + " ";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" +
               pts + "\"/>\n";
        out += "<text x=\"" + detail::num(left + 10) + "\" y=\"" + detail::num(top + 16 + 16.0 * si) +
               "\" fill=\"" + color + "\">" + detail::escape(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace gridtune::svg
