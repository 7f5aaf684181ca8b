#pragma once
// Minimal deterministic SVG line plots. One polyline per data series (frame,
// ticks, and legend swatches use path/rect elements so polyline count equals
// series count). Log y axis is selected automatically when every value is
// positive and the spread exceeds three decades.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace neurosplit {

struct plot_series {
    std::string label;
    std::vector<double> x, y;
};

namespace detail {

inline std::string fmt_px(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

inline std::string fmt_tick(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%g", v);
    return b;
}

// smallest of 1/2/5 * 10^k giving at most `target` steps across span
inline double nice_step(double span, int target) {
    double raw = span / target;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

}  // namespace detail

inline std::string render_plot(const std::vector<plot_series>& series, const std::string& title,
                               const std::string& xlabel, const std::string& ylabel) {
    if (series.empty()) throw config_error("render_plot: no series");
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool first = true, all_pos = true;
    for (const auto& s : series) {
        if (s.x.empty()) throw config_error("render_plot: empty series");
        if (s.x.size() != s.y.size()) throw config_error("render_plot: x/y lengths differ");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
                throw config_error("render_plot: non-finite value");
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
            if (!(s.y[i] > 0.0)) all_pos = false;
        }
    }
    bool logy = all_pos && ymax / ymin > 1e3;

    auto ty = [&](double v) { return logy ? std::log10(v) : v; };
    double lo = ty(ymin), hi = ty(ymax);
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    } else if (!logy) {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    if (!(xmax > xmin)) {
        xmin -= 1.0;
        xmax += 1.0;
    }

    const double w = 640, h = 420, x0 = 66, x1 = 612, y0 = 46, y1 = 358;
    auto px = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0); };
    auto py = [&](double v) { return y1 - (ty(v) - lo) / (hi - lo) * (y1 - y0); };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" "
           "viewBox=\"0 0 640 420\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"#ffffff\"/>\n";
    out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">" +
           detail::xml_escape(title) + "</text>\n";

    // frame
    out += "<path d=\"M" + detail::fmt_px(x0) + " " + detail::fmt_px(y0) + " H" +
           detail::fmt_px(x1) + " V" + detail::fmt_px(y1) + " H" + detail::fmt_px(x0) +
           " Z\" fill=\"none\" stroke=\"#333333\"/>\n";

    auto tick_text = [&](double tx, double tyy, const std::string& s, const char* anchor) {
        out += "<text x=\"" + detail::fmt_px(tx) + "\" y=\"" + detail::fmt_px(tyy) +
               "\" text-anchor=\"" + anchor +
               "\" font-family=\"sans-serif\" font-size=\"11\">" + s + "</text>\n";
    };

    // x ticks
    double xs = detail::nice_step(xmax - xmin, 6);
    for (double v = std::ceil(xmin / xs) * xs; v <= xmax + 1e-9 * xs; v += xs) {
        double p = px(v);
        out += "<path d=\"M" + detail::fmt_px(p) + " " + detail::fmt_px(y1) + " v5\" stroke=\"#333333\"/>\n";
        tick_text(p, y1 + 18, detail::fmt_tick(std::abs(v) < 1e-12 * xs ? 0.0 : v), "middle");
    }
    // y ticks: integer decades in log mode, nice steps otherwise
    if (logy) {
        for (double k = std::ceil(lo); k <= hi + 1e-9; k += 1.0) {
            double p = y1 - (k - lo) / (hi - lo) * (y1 - y0);
            out += "<path d=\"M" + detail::fmt_px(x0) + " " + detail::fmt_px(p) + " h-5\" stroke=\"#333333\"/>\n";
            tick_text(x0 - 8, p + 4, detail::fmt_tick(std::pow(10.0, k)), "end");
        }
    } else {
        double ys = detail::nice_step(hi - lo, 6);
        for (double v = std::ceil(lo / ys) * ys; v <= hi + 1e-9 * ys; v += ys) {
            double p = y1 - (v - lo) / (hi - lo) * (y1 - y0);
            out += "<path d=\"M" + detail::fmt_px(x0) + " " + detail::fmt_px(p) + " h-5\" stroke=\"#333333\"/>\n";
            tick_text(x0 - 8, p + 4, detail::fmt_tick(std::abs(v) < 1e-12 * ys ? 0.0 : v), "end");
        }
    }
    tick_text((x0 + x1) / 2, h - 8, detail::xml_escape(xlabel), "middle");
    out += "<text x=\"16\" y=\"" + detail::fmt_px((y0 + y1) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
           detail::fmt_px((y0 + y1) / 2) + ")\">" + detail::xml_escape(ylabel) + "</text>\n";

    // data series
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 8];
        out += "<polyline fill=\"none\" stroke=\"";
        out += color;
        out += "\" stroke-width=\"1.4\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) out += ' ';
            out += detail::fmt_px(px(s.x[i])) + "," + detail::fmt_px(py(s.y[i]));
        }
        out += "\"/>\n";
    }

    // legend, top-right inside the frame
    for (std::size_t si = 0; si < series.size(); ++si) {
        double ly = y0 + 14 + 16 * double(si);
        out += "<rect x=\"" + detail::fmt_px(x1 - 150) + "\" y=\"" + detail::fmt_px(ly - 4) +
               "\" width=\"18\" height=\"3\" fill=\"";
        out += palette[si % 8];
        out += "\"/>\n";
        out += "<text x=\"" + detail::fmt_px(x1 - 126) + "\" y=\"" + detail::fmt_px(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::xml_escape(series[si].label) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

inline void write_plot_file(const std::vector<plot_series>& series, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel,
                            const std::string& path) {
    std::string svg = render_plot(series, title, xlabel, ylabel);
    std::ofstream f(path);
    if (!f) throw config_error("cannot open for writing: " + path);
    f << svg;
}

}  // namespace neurosplit
