#include "transmusic/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "transmusic/errors.hpp"

namespace transmusic {

namespace {

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 72.0, kRight = 24.0, kTop = 48.0, kBottom = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

// Tick step of the form {1,2,5} * 10^k closest below range/target.
double nice_step(double range, int target) {
    const double rough = range / std::max(target, 1);
    const double mag = std::pow(10.0, std::floor(std::log10(rough)));
    for (double mult : {1.0, 2.0, 5.0, 10.0})
        if (mult * mag >= rough) return mult * mag;
    return 10.0 * mag;
}

} // namespace

void write_svg_plot(const PlotSpec& spec, const std::string& path) {
    // Usable points per series, with log-domain filtering applied.
    std::vector<std::vector<std::pair<double, double>>> usable(spec.series.size());
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        for (const auto& [x, y] : spec.series[s].points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (spec.log_y && !(y > 0.0)) continue;
            usable[s].push_back({x, y});
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    const bool empty = !(xmin <= xmax);
    if (empty) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = spec.log_y ? 0.1 : 0.0;
        ymax = 1.0;
    }
    if (xmin == xmax) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    double ty_min, ty_max;
    if (spec.log_y) {
        ty_min = std::floor(std::log10(ymin));
        ty_max = std::ceil(std::log10(ymax));
        if (ty_min == ty_max) ty_max += 1.0;
    } else {
        if (ymin == ymax) {
            ymin -= 0.5;
            ymax += 0.5;
        }
        const double pad = 0.05 * (ymax - ymin);
        ty_min = ymin - pad;
        ty_max = ymax + pad;
    }

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto map_x = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
    auto map_y = [&](double y) {
        const double t = spec.log_y ? std::log10(y) : y;
        return kTop + (ty_max - t) / (ty_max - ty_min) * plot_h;
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("plot: cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
        << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
    out << "<rect width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">"
        << escape(spec.title) << "</text>\n";

    // frame
    out << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(plot_w)
        << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#333\"/>\n";

    // x ticks
    const double xstep = nice_step(xmax - xmin, 6);
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9 * xstep; x += xstep) {
        const double px = map_x(x);
        out << "<line x1=\"" << fmt(px) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(px)
            << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(kTop + plot_h + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << fmt(x)
            << "</text>\n";
    }

    // y ticks
    if (spec.log_y) {
        for (double t = ty_min; t <= ty_max + 1e-9; t += 1.0) {
            const double py = kTop + (ty_max - t) / (ty_max - ty_min) * plot_h;
            out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(py) << "\" x2=\""
                << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(py) << "\" stroke=\"#ddd\"/>\n";
            out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py + 4)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
                << fmt(std::pow(10.0, t)) << "</text>\n";
        }
    } else {
        const double ystep = nice_step(ty_max - ty_min, 6);
        for (double y = std::ceil(ty_min / ystep) * ystep; y <= ty_max + 1e-9 * ystep; y += ystep) {
            const double py = map_y(y);
            out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(py) << "\" x2=\""
                << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(py) << "\" stroke=\"#ddd\"/>\n";
            out << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(py + 4)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << fmt(y)
                << "</text>\n";
        }
    }

    // axis labels
    out << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(spec.x_label) << "</text>\n";
    out << "<text x=\"18\" y=\"" << fmt(kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
        << fmt(kTop + plot_h / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

    if (empty) {
        out << "<text x=\"" << fmt(kLeft + plot_w / 2) << "\" y=\"" << fmt(kTop + plot_h / 2)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
               "fill=\"#777\">no data</text>\n";
    }

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (!usable[s].empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (const auto& [x, y] : usable[s]) out << fmt(map_x(x)) << "," << fmt(map_y(y)) << " ";
            out << "\"/>\n";
            for (const auto& [x, y] : usable[s])
                out << "<circle cx=\"" << fmt(map_x(x)) << "\" cy=\"" << fmt(map_y(y))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        const double ly = kTop + 10 + 18 * static_cast<double>(s);
        out << "<line x1=\"" << fmt(kLeft + plot_w - 150) << "\" y1=\"" << fmt(ly) << "\" x2=\""
            << fmt(kLeft + plot_w - 126) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << fmt(kLeft + plot_w - 120) << "\" y=\"" << fmt(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(spec.series[s].label)
            << "</text>\n";
    }
    out << "</svg>\n";
    out.flush();
    if (!out) throw IoError("plot: write failed: " + path);
}

} // namespace transmusic
