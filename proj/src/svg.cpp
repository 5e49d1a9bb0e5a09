#include "homsum/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "homsum/errors.hpp"

namespace homsum {

namespace {

constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else if (c == '&')
            out += "&amp;";
        else
            out += c;
    }
    return out;
}

}  // namespace

std::string loglog_svg(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (s.x[i] <= 0 || s.y[i] <= 0) continue;
            x0 = std::min(x0, std::log10(s.x[i]));
            x1 = std::max(x1, std::log10(s.x[i]));
            y0 = std::min(y0, std::log10(s.y[i]));
            y1 = std::max(y1, std::log10(s.y[i]));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    x0 = std::floor(x0), x1 = std::max(std::ceil(x1), x0 + 1);
    y0 = std::floor(y0), y1 = std::max(std::ceil(y1), y0 + 1);
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    const auto px = [&](double lx) { return kLeft + (lx - x0) / (x1 - x0) * pw; };
    const auto py = [&](double ly) { return kTop + (1.0 - (ly - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double e = x0; e <= x1; e += 1)
        o << "<line x1=\"" << num(px(e)) << "\" y1=\"" << kTop + ph << "\" x2=\"" << num(px(e)) << "\" y2=\""
          << kTop + ph + 5 << "\" stroke=\"black\"/><text x=\"" << num(px(e)) << "\" y=\"" << kTop + ph + 18
          << "\" text-anchor=\"middle\">1e" << static_cast<int>(e) << "</text>\n";
    for (double e = y0; e <= y1; e += 1)
        o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py(e)) << "\" x2=\"" << kLeft << "\" y2=\""
          << num(py(e)) << "\" stroke=\"black\"/><text x=\"" << kLeft - 8 << "\" y=\"" << num(py(e) + 4)
          << "\" text-anchor=\"end\">1e" << static_cast<int>(e) << "</text>\n";
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % std::size(kColors)];
        std::string points;
        for (std::size_t i = 0; i < std::min(series[s].x.size(), series[s].y.size()); ++i) {
            if (series[s].x[i] <= 0 || series[s].y[i] <= 0) continue;
            const std::string p = num(px(std::log10(series[s].x[i]))) + "," + num(py(std::log10(series[s].y[i])));
            points += (points.empty() ? "" : " ") + p;
            o << "<circle cx=\"" << num(px(std::log10(series[s].x[i]))) << "\" cy=\""
              << num(py(std::log10(series[s].y[i]))) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << points
          << "\"/>\n";
        o << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 16 * s << "\" fill=\"" << color << "\">"
          << escape(series[s].name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void write_loglog_svg(const std::string& path, const std::vector<PlotSeries>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path);
    out << loglog_svg(series, title, x_label, y_label);
}

}  // namespace homsum
