#pragma once

#include <string>
#include <utility>
#include <vector>

namespace transmusic {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; // drawn in order
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false; // positive values only; others are dropped
    std::vector<PlotSeries> series;
};

// Standalone SVG line chart with markers and a legend. Output bytes depend
// only on the spec, so re-emits diff clean.
void write_svg_plot(const PlotSpec& spec, const std::string& path);

} // namespace transmusic
