#include "abmscope/io/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "abmscope/error.hpp"

namespace abmscope::io {

namespace {

std::string num(double v, const char* fmt = "%.2f") {
    char buf[48];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

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

} // namespace

std::string render_svg(const LinePlot& plot, int width, int height) {
    if (plot.xs.size() != plot.ys.size() || plot.xs.empty())
        throw ValidationError("plot", "x and y must be non-empty and equally long");
    const double left = 64, right = 16, top = 32, bottom = 48;
    const double pw = width - left - right, ph = height - top - bottom;
    auto [xmin_it, xmax_it] = std::minmax_element(plot.xs.begin(), plot.xs.end());
    auto [ymin_it, ymax_it] = std::minmax_element(plot.ys.begin(), plot.ys.end());
    double x0 = *xmin_it, x1 = *xmax_it, y0 = *ymin_it, y1 = *ymax_it;
    if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
    if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" + escape(plot.title) +
         "</text>\n";
    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(left) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"start\">" + num(x0, "%.4g") +
         "</text>\n";
    s += "<text x=\"" + num(left + pw) + "\" y=\"" + num(top + ph + 16) + "\" text-anchor=\"end\">" + num(x1, "%.4g") +
         "</text>\n";
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + ph) + "\" text-anchor=\"end\">" + num(y0, "%.4g") +
         "</text>\n";
    s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(top + 10) + "\" text-anchor=\"end\">" + num(y1, "%.4g") +
         "</text>\n";
    s += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(height - 10.0) + "\" text-anchor=\"middle\">" +
         escape(plot.x_label) + "</text>\n";
    s += "<text x=\"14\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         num(top + ph / 2) + ")\">" + escape(plot.y_label) + "</text>\n";
    s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < plot.xs.size(); ++i) s += (i ? " " : "") + num(px(plot.xs[i])) + "," + num(py(plot.ys[i]));
    s += "\"/>\n";
    for (std::size_t i = 0; i < plot.xs.size(); ++i)
        s += "<circle cx=\"" + num(px(plot.xs[i])) + "\" cy=\"" + num(py(plot.ys[i])) + "\" r=\"2.5\" fill=\"steelblue\"/>\n";
    s += "</svg>\n";
    return s;
}

void write_svg(const std::filesystem::path& path, const LinePlot& plot) {
    const std::string text = render_svg(plot);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
}

} // namespace abmscope::io
