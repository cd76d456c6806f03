#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsfl {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    int width = 720;
    int height = 440;
};

/// Minimal line chart. Non-finite points break the line. Throws ArgumentError when a series
/// has mismatched x/y lengths or, with log_x, a non-positive x.
void write_svg_plot(std::ostream& os, const std::vector<PlotSeries>& series, const PlotOptions& opt = {});

} // namespace dsfl
