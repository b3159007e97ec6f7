#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace abmscope::io {

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> xs;
    std::vector<double> ys;
};

// Minimal SVG: frame, min/max tick labels, one polyline with point markers.
std::string render_svg(const LinePlot& plot, int width = 480, int height = 320);
void write_svg(const std::filesystem::path& path, const LinePlot& plot);

} // namespace abmscope::io
