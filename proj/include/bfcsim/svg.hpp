// svg.hpp — minimal deterministic SVG line plots (CSV is the canonical
// output; plots are a convenience).

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bfc {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;  // draw points instead of a connected line
};

void write_line_plot_svg(std::ostream& out, std::string_view title, std::string_view x_label,
                         std::string_view y_label, const std::vector<PlotSeries>& series);

} // namespace bfc
