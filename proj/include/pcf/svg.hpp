#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pcf {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal line plot: axes, tick labels at the corners, one polyline per
// series with a small legend. Enough to eyeball stress curves and NFE/epoch
// trends without pulling in a plotting stack.
void write_line_svg(const std::filesystem::path& file, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series);

}  // namespace pcf
