#pragma once

// SVG line chart of a gold track against any number of prediction tracks.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "emoseq/error.hpp"
#include "emoseq/metrics.hpp"

namespace emoseq {

struct PlotTrack {
    std::string name;
    std::vector<double> values;
};

struct PlotStyle {
    int width = 900;
    int height = 420;
    double segment_s = 0.25;
    std::string title = "Gold and predicted trace";
};

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace detail

/// Legend label of a prediction track, e.g. "acoustic (ccc=0.971)".
inline std::string plot_label(const PlotTrack& track, const PlotTrack& gold) {
    return track.name + " (ccc=" + detail::fmt("%.3f", ccc(track.values, gold.values)) + ")";
}

/// One polyline per track (gold first). Axis ranges cover all values with a
/// 5% margin on each side.
inline std::string render_svg(const PlotTrack& gold, const std::vector<PlotTrack>& preds, const PlotStyle& style = {}) {
    const std::size_t n = gold.values.size();
    if (n < 2) {
        throw InvalidArgument("plot: need at least 2 segments");
    }
    double lo = *std::min_element(gold.values.begin(), gold.values.end());
    double hi = *std::max_element(gold.values.begin(), gold.values.end());
    for (const auto& p : preds) {
        if (p.values.size() != n) {
            throw InvalidArgument("plot: track '" + p.name + "' has " + std::to_string(p.values.size()) +
                                  " values, gold has " + std::to_string(n));
        }
        lo = std::min(lo, *std::min_element(p.values.begin(), p.values.end()));
        hi = std::max(hi, *std::max_element(p.values.begin(), p.values.end()));
    }
    if (hi == lo) {
        hi += 0.5;
        lo -= 0.5;
    }
    const double pad_y = 0.05 * (hi - lo);
    lo -= pad_y;
    hi += pad_y;
    const double x_max = static_cast<double>(n - 1);
    const double pad_x = 0.05 * x_max;

    const double left = 60, right = 20, top = 40, bottom = 50;
    const double pw = style.width - left - right;
    const double ph = style.height - top - bottom;
    auto sx = [&](double i) { return left + (i + pad_x) / (x_max + 2 * pad_x) * pw; };
    auto sy = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };

    static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    std::vector<PlotTrack> all{gold};
    all.insert(all.end(), preds.begin(), preds.end());

    std::string title = style.title;
    for (const auto& p : preds) {
        title += "; ccc(" + p.name + ")=" + detail::fmt("%.3f", ccc(p.values, gold.values));
    }

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(style.width) + "\" height=\"" +
           std::to_string(style.height) + "\" viewBox=\"0 0 " + std::to_string(style.width) + " " +
           std::to_string(style.height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail::fmt("%.1f", left) + "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">" +
           xml_escape(title) + "</text>\n";
    svg += "<rect x=\"" + detail::fmt("%.1f", left) + "\" y=\"" + detail::fmt("%.1f", top) + "\" width=\"" +
           detail::fmt("%.1f", pw) + "\" height=\"" + detail::fmt("%.1f", ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        svg += "<text x=\"" + detail::fmt("%.1f", left - 6) + "\" y=\"" + detail::fmt("%.1f", sy(v) + 4) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + detail::fmt("%.2f", v) +
               "</text>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double i = x_max * k / 4.0;
        svg += "<text x=\"" + detail::fmt("%.1f", sx(i)) + "\" y=\"" + detail::fmt("%.1f", top + ph + 16) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">" +
               detail::fmt("%.1f", i * style.segment_s) + " s</text>\n";
    }
    for (std::size_t k = 0; k < all.size(); ++k) {
        const char* color = colors[k % std::size(colors)];
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < n; ++i) {
            if (i) svg += ' ';
            svg += detail::fmt("%.2f", sx(static_cast<double>(i))) + "," + detail::fmt("%.2f", sy(all[k].values[i]));
        }
        svg += "\"/>\n";
        const std::string label = k == 0 ? all[k].name : plot_label(all[k], gold);
        const double ly = top + ph + 34;
        const double lx = left + 200.0 * static_cast<double>(k);
        svg += "<g class=\"legend\"><line x1=\"" + detail::fmt("%.1f", lx) + "\" y1=\"" + detail::fmt("%.1f", ly) +
               "\" x2=\"" + detail::fmt("%.1f", lx + 20) + "\" y2=\"" + detail::fmt("%.1f", ly) + "\" stroke=\"" +
               color + "\" stroke-width=\"2\"/><text x=\"" + detail::fmt("%.1f", lx + 24) + "\" y=\"" +
               detail::fmt("%.1f", ly + 4) + "\" font-family=\"sans-serif\" font-size=\"11\">" + xml_escape(label) +
               "</text></g>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace emoseq
