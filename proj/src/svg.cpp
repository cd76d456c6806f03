#include "dsfl/svg.hpp"

#include "dsfl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace dsfl {

namespace {

const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return b;
}

std::string tick_label(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%g", v);
    return b;
}

// Roughly five round-valued ticks covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

} // namespace

void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double x0 = inf, x1 = -inf, y0 = inf, y1 = -inf;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ArgumentError("plot series '" + s.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (opt.log_x && !(s.x[i] > 0.0)) throw ArgumentError("log x axis needs positive x values");
            const double x = opt.log_x ? std::log10(s.x[i]) : s.x[i];
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad, y1 += pad;

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double w = opt.width - left - right, h = opt.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
    auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * h; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(opt.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(opt.title) << "</text>\n";

    for (double t : ticks(x0, x1)) {
        const double x = px(t);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << num(top) << "\" x2=\"" << num(x) << "\" y2=\"" << num(top + h)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << num(x) << "\" y=\"" << num(top + h + 16) << "\" text-anchor=\"middle\">"
           << tick_label(opt.log_x ? std::pow(10.0, t) : t) << "</text>\n";
    }
    for (double t : ticks(y0, y1)) {
        const double y = py(t);
        os << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + w) << "\" y2=\"" << num(y)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(t)
           << "</text>\n";
    }
    os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(w) << "\" height=\"" << num(h)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(left + w / 2) << "\" y=\"" << num(opt.height - 10.0) << "\" text-anchor=\"middle\">"
       << escape(opt.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << num(top + h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(opt.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = palette[k % std::size(palette)];
        std::string path;
        bool pen = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen = false;
                continue;
            }
            const double x = px(opt.log_x ? std::log10(s.x[i]) : s.x[i]);
            path += (pen ? " L" : " M") + num(x) + "," + num(py(s.y[i]));
            pen = true;
        }
        if (!path.empty())
            os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>\n";
        if (!s.label.empty())
            os << "<text x=\"" << num(left + w - 8) << "\" y=\"" << num(top + 16 + 15.0 * k) << "\" text-anchor=\"end\" fill=\""
               << colour << "\">" << escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace dsfl
