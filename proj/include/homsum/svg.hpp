#pragma once

#include <string>
#include <vector>

namespace homsum {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Log-log line plot with decade ticks. Points with nonpositive coordinates are skipped.
std::string loglog_svg(const std::vector<PlotSeries>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label);
void write_loglog_svg(const std::string& path, const std::vector<PlotSeries>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label);

}  // namespace homsum
